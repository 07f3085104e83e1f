#pragma once

// Seeded source-filter generator for speech-like test material: glottal pulse
// trains through time-varying formant resonators, fricative and plosive noise,
// word pauses and leading/trailing silence.

#include <cstdint>

#include "cicoder/audio.hpp"

namespace cicoder {

struct SpeechGenConfig {
  int sample_rate_hz = kCanonicalRateHz;
  double duration_s = 3.0;
  double target_dbfs = -26.0;
  double noise_floor_dbfs = -75.0;
};

AudioSignal generate_speech(std::uint64_t seed, const SpeechGenConfig& cfg = {});

// Gaussian white noise with the given RMS.
AudioSignal white_noise(std::size_t length, int sample_rate_hz, double rms_level,
                        std::uint64_t seed);

// clean + noise scaled to the requested SNR (dB, by RMS).
AudioSignal add_noise_at_snr(const AudioSignal& clean, double snr_db, std::uint64_t seed);

}  // namespace cicoder
