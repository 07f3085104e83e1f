#pragma once

#include <vector>

#include "cicoder/ace.hpp"
#include "cicoder/audio.hpp"

namespace cicoder {

struct VocoderConfig {
  std::vector<double> carrier_freqs_hz;  // empty: use filterbank centres
  int output_rate_hz = kCanonicalRateHz;
  double envelope_smoothing_hz = 50.0;
  bool inverse_lgf = true;
  double peak_limit = 0.9;

  bool operator==(const VocoderConfig&) const = default;
};

// Inverse of lgf_compress on (B, S). 0 maps to silence, 1 to S.
double inverse_lgf(double y, const AceConfig& ace);

// Sum of per-channel carriers before peak normalisation.
AudioSignal synthesize_unnormalized(const Electrodogram& e, const VocoderConfig& vcfg,
                                    const AceConfig& ace);

// Zero-order hold to the sample rate, optional inverse LGF, one-pole
// smoothing, continuous-phase sine carriers; peak limited to 0.9.
AudioSignal synthesize(const Electrodogram& e, const VocoderConfig& vcfg,
                       const AceConfig& ace);

}  // namespace cicoder
