#include "cicoder/ace.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cicoder/error.hpp"
#include "cicoder/fft.hpp"

namespace cicoder {

std::vector<int> default_bins_per_channel() {
  return {1, 1, 1, 1, 1, 1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 4, 4, 5, 5, 6, 7, 8};
}

std::vector<double> band_edges_from_widths(double low_edge_hz, double bin_hz,
                                           std::span<const int> bins) {
  std::vector<double> edges{low_edge_hz};
  for (int b : bins) edges.push_back(edges.back() + b * bin_hz);
  return edges;
}

void AceConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error("ace config: " + msg); };
  if (num_channels < 1) fail("num_channels must be >= 1");
  if (num_maxima < 1 || num_maxima > num_channels)
    fail("num_maxima must be in [1, num_channels]");
  if (!is_power_of_two(static_cast<std::size_t>(std::max(fft_size, 0))))
    fail("fft_size must be a power of two");
  if (hop < 1 || hop > fft_size) fail("hop must be in [1, fft_size]");
  if (sample_rate_hz <= 0) fail("sample_rate_hz must be positive");
  if (sample_rate_hz % hop != 0) fail("sample_rate_hz must be a multiple of hop");
  if (band_edges.size() != static_cast<std::size_t>(num_channels) + 1)
    fail("band_edges must have num_channels + 1 entries");
  for (std::size_t i = 0; i < band_edges.size(); ++i) {
    if (!std::isfinite(band_edges[i]) || band_edges[i] < 0.0) fail("band_edges must be >= 0");
    if (i > 0 && band_edges[i] <= band_edges[i - 1]) fail("band_edges must be strictly increasing");
  }
  if (band_edges.back() > sample_rate_hz / 2.0) fail("band_edges must not exceed Nyquist");
  if (!(lgf_base >= 0.0) || !(lgf_base < lgf_saturation)) fail("need 0 <= lgf_base < lgf_saturation");
  if (!(lgf_rho > 0.0)) fail("lgf_rho must be positive");
}

std::uint64_t hash(const AceConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << c.num_channels << ' ' << c.num_maxima << ' ' << c.fft_size << ' ' << c.hop << ' '
     << c.sample_rate_hz << ' ' << static_cast<int>(c.analysis_window) << ' ' << c.lgf_base
     << ' ' << c.lgf_saturation << ' ' << c.lgf_rho;
  for (double e : c.band_edges) os << ' ' << e;
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : os.str()) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

FilterbankMap build_filterbank(const AceConfig& config) {
  config.validate();
  FilterbankMap fb;
  fb.fft_size = static_cast<std::size_t>(config.fft_size);
  fb.bin_hz = static_cast<double>(config.sample_rate_hz) / config.fft_size;
  const std::size_t num_bins = fb.fft_size / 2 + 1;
  const auto& edges = config.band_edges;
  const std::size_t m = static_cast<std::size_t>(config.num_channels);

  fb.assignment.assign(num_bins, -1);
  fb.bins_per_channel.assign(m, 0);
  std::vector<double> center_sum(m, 0.0);
  for (std::size_t k = 0; k < num_bins; ++k) {
    const double f = static_cast<double>(k) * fb.bin_hz;
    for (std::size_t c = 0; c < m; ++c) {
      // Half-open bands except the last, which includes its upper edge.
      const bool inside = f >= edges[c] && (f < edges[c + 1] || (c + 1 == m && f == edges[m]));
      if (inside) {
        fb.assignment[k] = static_cast<int>(c);
        ++fb.bins_per_channel[c];
        center_sum[c] += f;
        break;
      }
    }
  }
  fb.centers_hz.resize(m);
  for (std::size_t c = 0; c < m; ++c) {
    if (fb.bins_per_channel[c] == 0) {
      throw Error("filterbank: channel " + std::to_string(c + 1) + " [" +
                  std::to_string(edges[c]) + ", " + std::to_string(edges[c + 1]) +
                  ") Hz contains no FFT bin centre");
    }
    fb.centers_hz[c] = center_sum[c] / fb.bins_per_channel[c];
  }
  return fb;
}

Matrix compute_envelopes(const AudioSignal& signal, const AceConfig& config,
                         const FilterbankMap& fb) {
  if (signal.sample_rate_hz != config.sample_rate_hz) {
    throw Error("ace: signal is " + std::to_string(signal.sample_rate_hz) +
                " Hz but config expects " + std::to_string(config.sample_rate_hz) + " Hz");
  }
  if (fb.fft_size != static_cast<std::size_t>(config.fft_size) ||
      fb.num_channels() != static_cast<std::size_t>(config.num_channels)) {
    throw Error("ace: filterbank does not match config");
  }
  const FrameSequence frames = frame_signal(signal, fb.fft_size,
                                            static_cast<std::size_t>(config.hop),
                                            config.analysis_window);
  // A unit sinusoid centred on a bin yields |X| = sum(w) / 2 in that bin.
  const double window_sum = std::accumulate(frames.window.begin(), frames.window.end(), 0.0);
  const double gain = 2.0 / window_sum;

  Matrix env(fb.num_channels(), frames.size());
  std::vector<double> power(fb.num_channels());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const auto spectrum = rfft(frames.frames[t], fb.fft_size);
    std::fill(power.begin(), power.end(), 0.0);
    for (std::size_t k = 0; k < spectrum.size(); ++k) {
      const int c = fb.assignment[k];
      if (c >= 0) power[static_cast<std::size_t>(c)] += std::norm(spectrum[k]);
    }
    for (std::size_t c = 0; c < power.size(); ++c) env(c, t) = gain * std::sqrt(power[c]);
  }
  return env;
}

std::vector<bool> select_maxima(std::span<const double> frame, int num_maxima) {
  const std::size_t m = frame.size();
  const std::size_t n = std::min(m, static_cast<std::size_t>(std::max(num_maxima, 0)));
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return frame[a] > frame[b] || (frame[a] == frame[b] && a < b);
                    });
  std::vector<bool> mask(m, false);
  for (std::size_t i = 0; i < n; ++i) mask[order[i]] = true;
  return mask;
}

double lgf_compress(double x, const AceConfig& config) {
  const double b = config.lgf_base;
  const double s = config.lgf_saturation;
  if (x <= b) return 0.0;
  if (x >= s) return 1.0;
  const double rho = config.lgf_rho;
  return std::log1p(rho * (x - b) / (s - b)) / std::log1p(rho);
}

std::size_t Electrodogram::nonzero_in_frame(std::size_t t) const {
  std::size_t count = 0;
  for (std::size_t c = 0; c < num_channels; ++c) count += at(c, t) != 0.0f;
  return count;
}

void Electrodogram::validate(std::size_t max_nonzero) const {
  if (magnitudes.size() != num_channels * num_frames)
    throw Error("electrodogram: storage size does not match dimensions");
  for (float v : magnitudes) {
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f)
      throw Error("electrodogram: magnitude outside [0, 1]");
  }
  if (max_nonzero == 0) return;
  for (std::size_t t = 0; t < num_frames; ++t) {
    if (nonzero_in_frame(t) > max_nonzero)
      throw Error("electrodogram: frame " + std::to_string(t) + " exceeds " +
                  std::to_string(max_nonzero) + " stimulated channels");
  }
}

Electrodogram encode(const AudioSignal& signal, const AceConfig& config) {
  return encode(signal, config, build_filterbank(config));
}

Electrodogram encode(const AudioSignal& signal, const AceConfig& config,
                     const FilterbankMap& fb) {
  const Matrix env = compute_envelopes(signal, config, fb);
  Electrodogram e(env.rows(), env.cols(), config.frame_rate_hz());
  for (std::size_t t = 0; t < env.cols(); ++t) {
    const auto frame = env.column(t);
    const auto mask = select_maxima(frame, config.num_maxima);
    for (std::size_t c = 0; c < frame.size(); ++c) {
      if (mask[c]) e.at(c, t) = static_cast<float>(lgf_compress(frame[c], config));
    }
  }
  return e;
}

}  // namespace cicoder
