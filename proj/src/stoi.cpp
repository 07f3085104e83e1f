#include "cicoder/stoi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cicoder/error.hpp"
#include "cicoder/fft.hpp"

namespace cicoder {

namespace {

std::vector<double> at_internal_rate(const AudioSignal& signal, const StoiConfig& cfg) {
  validate(signal);
  if (signal.sample_rate_hz == cfg.internal_rate_hz) return signal.samples;
  return resample(signal, cfg.internal_rate_hz).samples;
}

std::size_t complete_frames(std::size_t len, const StoiConfig& cfg) {
  const auto n = static_cast<std::size_t>(cfg.frame_length);
  const auto hop = static_cast<std::size_t>(cfg.hop);
  return len < n ? 0 : (len - n) / hop + 1;
}

[[noreturn]] void too_short(std::size_t frames, const StoiConfig& cfg) {
  throw Error("stoi: signal too short (" + std::to_string(frames) +
              " frames after silence removal, need " + std::to_string(cfg.segment_frames) + ")");
}

double correlation(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double xy = 0.0, xx = 0.0, yy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = x[i] - mx;
    const double b = y[i] - my;
    xy += a * b;
    xx += a * a;
    yy += b * b;
  }
  if (xx <= 0.0 || yy <= 0.0) return 0.0;
  return xy / (std::sqrt(xx) * std::sqrt(yy));
}

}  // namespace

void StoiConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error("stoi config: " + msg); };
  if (internal_rate_hz <= 0) fail("internal_rate_hz must be positive");
  if (frame_length < 2 || frame_length % 2 != 0) fail("frame_length must be even and >= 2");
  if (hop * 2 != frame_length) fail("hop must be frame_length / 2");
  if (!is_power_of_two(static_cast<std::size_t>(std::max(fft_size, 0))) || fft_size < frame_length)
    fail("fft_size must be a power of two >= frame_length");
  if (num_bands < 1) fail("num_bands must be >= 1");
  if (!(lowest_center_hz > 0.0)) fail("lowest_center_hz must be positive");
  if (segment_frames < 2) fail("segment_frames must be >= 2");
  if (!(silence_range_db > 0.0)) fail("silence_range_db must be positive");
}

std::vector<BandRange> third_octave_bands(const StoiConfig& cfg) {
  cfg.validate();
  const auto bins = static_cast<std::size_t>(cfg.fft_size / 2 + 1);
  const double bin_hz = static_cast<double>(cfg.internal_rate_hz) / cfg.fft_size;
  auto nearest_bin = [&](double f) {
    const double k = std::round(f / bin_hz);
    return static_cast<std::size_t>(std::clamp(k, 0.0, static_cast<double>(bins - 1)));
  };
  std::vector<BandRange> bands;
  for (int k = 0; k < cfg.num_bands; ++k) {
    BandRange b;
    b.center_hz = cfg.lowest_center_hz * std::pow(2.0, k / 3.0);
    const double lo = cfg.lowest_center_hz * std::pow(2.0, (2.0 * k - 1.0) / 6.0);
    const double hi = cfg.lowest_center_hz * std::pow(2.0, (2.0 * k + 1.0) / 6.0);
    b.lo_bin = nearest_bin(lo);
    // Upper edges past Nyquist keep the Nyquist bin.
    b.hi_bin = hi >= cfg.internal_rate_hz / 2.0 ? bins : nearest_bin(hi);
    bands.push_back(b);
  }
  return bands;
}

Matrix band_envelopes(std::span<const double> samples, const StoiConfig& cfg) {
  const auto bands = third_octave_bands(cfg);
  const auto n = static_cast<std::size_t>(cfg.frame_length);
  const auto hop = static_cast<std::size_t>(cfg.hop);
  const std::size_t frames = complete_frames(samples.size(), cfg);
  const auto window = make_window(Taper::kHannNoZeros, n);

  Matrix env(bands.size(), frames);
  std::vector<double> buf(n);
  for (std::size_t l = 0; l < frames; ++l) {
    for (std::size_t i = 0; i < n; ++i) buf[i] = samples[l * hop + i] * window[i];
    const auto spec = rfft(buf, static_cast<std::size_t>(cfg.fft_size));
    for (std::size_t k = 0; k < bands.size(); ++k) {
      double power = 0.0;
      for (std::size_t b = bands[k].lo_bin; b < bands[k].hi_bin; ++b) power += std::norm(spec[b]);
      env(k, l) = std::sqrt(power);
    }
  }
  return env;
}

SilenceRemoval remove_silent_frames(std::span<const double> clean,
                                    std::span<const double> degraded, const StoiConfig& cfg) {
  cfg.validate();
  const std::size_t len = std::max(clean.size(), degraded.size());
  std::vector<double> x(len, 0.0), y(len, 0.0);
  std::copy(clean.begin(), clean.end(), x.begin());
  std::copy(degraded.begin(), degraded.end(), y.begin());

  const auto n = static_cast<std::size_t>(cfg.frame_length);
  const auto hop = static_cast<std::size_t>(cfg.hop);
  const std::size_t frames = complete_frames(len, cfg);
  // Periodic Hann overlap-adds to exactly 1 at 50% overlap.
  const auto window = make_window(Taper::kHann, n);

  std::vector<double> energy_db(frames);
  std::vector<bool> audible(frames);
  double loudest = -std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < frames; ++l) {
    double e = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = window[i] * x[l * hop + i];
      e += v * v;
    }
    energy_db[l] = 20.0 * std::log10(std::sqrt(e) + std::numeric_limits<double>::epsilon());
    audible[l] = e > 0.0;
    loudest = std::max(loudest, energy_db[l]);
  }

  SilenceRemoval out;
  out.frames_total = frames;
  // Digital silence is never kept, even when every frame is silent.
  std::vector<bool> keep(frames);
  for (std::size_t l = 0; l < frames; ++l) {
    keep[l] = audible[l] && energy_db[l] > loudest - cfg.silence_range_db;
    out.frames_kept += keep[l];
  }
  if (out.frames_kept == 0) return out;

  const std::size_t out_len = (out.frames_kept - 1) * hop + n;
  out.clean.assign(out_len, 0.0);
  out.degraded.assign(out_len, 0.0);
  std::size_t slot = 0;
  for (std::size_t l = 0; l < frames; ++l) {
    if (!keep[l]) continue;
    for (std::size_t i = 0; i < n; ++i) {
      out.clean[slot * hop + i] += window[i] * x[l * hop + i];
      out.degraded[slot * hop + i] += window[i] * y[l * hop + i];
    }
    ++slot;
  }
  return out;
}

Matrix third_octave_envelopes(const AudioSignal& signal, const StoiConfig& cfg) {
  cfg.validate();
  std::vector<double> x = at_internal_rate(signal, cfg);
  if (cfg.reference_method) x = remove_silent_frames(x, x, cfg).clean;
  Matrix env = band_envelopes(x, cfg);
  if (env.cols() < static_cast<std::size_t>(cfg.segment_frames)) too_short(env.cols(), cfg);
  return env;
}

StoiResult stoi(const AudioSignal& clean, const AudioSignal& degraded, const StoiConfig& cfg) {
  cfg.validate();
  std::vector<double> x = at_internal_rate(clean, cfg);
  std::vector<double> y = at_internal_rate(degraded, cfg);
  const std::size_t len = std::max(x.size(), y.size());
  x.resize(len, 0.0);
  y.resize(len, 0.0);

  if (cfg.reference_method) {
    auto removed = remove_silent_frames(x, y, cfg);
    x = std::move(removed.clean);
    y = std::move(removed.degraded);
  }
  const Matrix xe = band_envelopes(x, cfg);
  const Matrix ye = band_envelopes(y, cfg);
  const std::size_t frames = xe.cols();
  const auto seg = static_cast<std::size_t>(cfg.segment_frames);
  if (frames < seg) too_short(frames, cfg);

  const std::size_t bands = xe.rows();
  const std::size_t segments = frames - seg + 1;
  const double clip = 1.0 + std::pow(10.0, -cfg.clip_beta_db / 20.0);

  StoiResult r;
  r.frames_used = frames;
  r.segments = segments;
  r.per_band.assign(bands, 0.0);
  std::vector<double> xs(seg), ys(seg);
  double total = 0.0;
  for (std::size_t m = 0; m < segments; ++m) {
    for (std::size_t k = 0; k < bands; ++k) {
      double xx = 0.0, yy = 0.0;
      for (std::size_t i = 0; i < seg; ++i) {
        xs[i] = xe(k, m + i);
        ys[i] = ye(k, m + i);
        xx += xs[i] * xs[i];
        yy += ys[i] * ys[i];
      }
      if (cfg.reference_method) {
        const double alpha =
            std::sqrt(xx) / (std::sqrt(yy) + std::numeric_limits<double>::epsilon());
        for (std::size_t i = 0; i < seg; ++i) ys[i] = std::min(alpha * ys[i], clip * xs[i]);
      }
      const double rho = correlation(xs, ys);
      r.per_band[k] += rho;
      total += rho;
    }
  }
  for (double& b : r.per_band) b /= static_cast<double>(segments);
  r.raw_score = total / static_cast<double>(segments * bands);
  r.score = std::clamp(r.raw_score, 0.0, 1.0);
  return r;
}

}  // namespace cicoder
