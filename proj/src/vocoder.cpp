#include "cicoder/vocoder.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cicoder/error.hpp"

namespace cicoder {

double inverse_lgf(double y, const AceConfig& ace) {
  if (!(y >= 0.0 && y <= 1.0)) throw Error("inverse_lgf: magnitude outside [0, 1]");
  if (y == 0.0) return 0.0;
  if (y == 1.0) return ace.lgf_saturation;
  const double rho = ace.lgf_rho;
  const double b = ace.lgf_base;
  const double s = ace.lgf_saturation;
  return b + (s - b) * std::expm1(y * std::log1p(rho)) / rho;
}

AudioSignal synthesize_unnormalized(const Electrodogram& e, const VocoderConfig& vcfg,
                                    const AceConfig& ace) {
  std::vector<double> carriers = vcfg.carrier_freqs_hz;
  if (carriers.empty()) carriers = build_filterbank(ace).centers_hz;
  if (carriers.size() != e.num_channels) {
    throw Error("vocoder: electrodogram has " + std::to_string(e.num_channels) +
                " channels but " + std::to_string(carriers.size()) + " carriers are configured");
  }
  if (vcfg.output_rate_hz <= 0) throw Error("vocoder: output rate must be positive");
  for (std::size_t c = 0; c < carriers.size(); ++c) {
    if (!(carriers[c] > 0.0) || carriers[c] >= vcfg.output_rate_hz / 2.0 ||
        (c > 0 && carriers[c] <= carriers[c - 1])) {
      throw Error("vocoder: carriers must be increasing and below Nyquist");
    }
  }
  if (!(e.frame_rate_hz > 0.0)) throw Error("vocoder: frame rate must be positive");

  const double fs = vcfg.output_rate_hz;
  const double samples_per_frame = fs / e.frame_rate_hz;
  const auto length = static_cast<std::size_t>(std::llround(e.num_frames * samples_per_frame));
  const double pole = std::exp(-2.0 * std::numbers::pi * vcfg.envelope_smoothing_hz / fs);

  AudioSignal out;
  out.sample_rate_hz = vcfg.output_rate_hz;
  out.samples.assign(length, 0.0);

  std::vector<double> level(e.num_frames);
  for (std::size_t c = 0; c < e.num_channels; ++c) {
    bool silent = true;
    for (std::size_t t = 0; t < e.num_frames; ++t) {
      const double y = e.at(c, t);
      level[t] = vcfg.inverse_lgf ? inverse_lgf(y, ace) : y;
      silent = silent && level[t] == 0.0;
    }
    if (silent) continue;

    const double omega = 2.0 * std::numbers::pi * carriers[c] / fs;
    double smoothed = 0.0;
    for (std::size_t n = 0; n < length; ++n) {
      const auto t = std::min(e.num_frames - 1,
                              static_cast<std::size_t>(static_cast<double>(n) / samples_per_frame));
      smoothed = (1.0 - pole) * level[t] + pole * smoothed;
      // Phase from the sample index directly: continuous and drift-free.
      const double phase = std::fmod(omega * static_cast<double>(n), 2.0 * std::numbers::pi);
      out.samples[n] += smoothed * std::sin(phase);
    }
  }
  return out;
}

AudioSignal synthesize(const Electrodogram& e, const VocoderConfig& vcfg, const AceConfig& ace) {
  AudioSignal out = synthesize_unnormalized(e, vcfg, ace);
  double peak = 0.0;
  for (double s : out.samples) peak = std::max(peak, std::abs(s));
  if (peak > vcfg.peak_limit) {
    const double g = vcfg.peak_limit / peak;
    for (double& s : out.samples) s *= g;
  }
  return out;
}

}  // namespace cicoder
