#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "cicoder/audio.hpp"
#include "cicoder/matrix.hpp"

namespace cicoder {

struct StoiConfig {
  int internal_rate_hz = 10000;
  int frame_length = 256;
  int hop = 128;
  int fft_size = 512;
  int num_bands = 15;
  double lowest_center_hz = 150.0;
  int segment_frames = 30;  // about 384 ms at 10 kHz / hop 128
  double silence_range_db = 40.0;
  double clip_beta_db = -15.0;
  // Off: no silent-frame removal, no normalisation or clipping.
  bool reference_method = true;

  void validate() const;
  bool operator==(const StoiConfig&) const = default;
};

struct StoiResult {
  double score = 0.0;      // mean correlation floored at 0
  double raw_score = 0.0;  // mean correlation, may be negative
  std::vector<double> per_band;
  std::size_t frames_used = 0;
  std::size_t segments = 0;
};

struct BandRange {
  std::size_t lo_bin = 0;  // inclusive
  std::size_t hi_bin = 0;  // exclusive
  double center_hz = 0.0;
};

// One-third-octave bands, centre 150 * 2^(k/3); edges snapped to the nearest
// FFT bin and truncated at Nyquist.
std::vector<BandRange> third_octave_bands(const StoiConfig& cfg);

// K x F band envelopes of a signal already at the internal rate, over the
// complete frames only. No silence removal.
Matrix band_envelopes(std::span<const double> samples, const StoiConfig& cfg);

// Resamples to the internal rate, removes the signal's own silent frames
// (reference method) and returns band envelopes. Throws Error("... too
// short ...") when fewer than segment_frames frames remain.
Matrix third_octave_envelopes(const AudioSignal& signal, const StoiConfig& cfg);

struct SilenceRemoval {
  std::vector<double> clean;
  std::vector<double> degraded;
  std::size_t frames_kept = 0;
  std::size_t frames_total = 0;
};

// Drops frames whose clean energy is more than silence_range_db below the
// loudest clean frame, from both signals, then overlap-adds what remains.
// Inputs are at the internal rate; the shorter one is zero-padded.
SilenceRemoval remove_silent_frames(std::span<const double> clean,
                                    std::span<const double> degraded, const StoiConfig& cfg);

StoiResult stoi(const AudioSignal& clean, const AudioSignal& degraded,
                const StoiConfig& cfg = {});

}  // namespace cicoder
