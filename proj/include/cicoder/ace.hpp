#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cicoder/audio.hpp"
#include "cicoder/matrix.hpp"

namespace cicoder {

// Bins per channel for the 22-channel, 128-point, 16 kHz allocation. Low
// channels take one 125 Hz bin each; widths grow toward the base.
std::vector<int> default_bins_per_channel();

// Band edges starting at `low_edge_hz` with `bins[c]` bins of `bin_hz` each.
std::vector<double> band_edges_from_widths(double low_edge_hz, double bin_hz,
                                           std::span<const int> bins);

struct AceConfig {
  int num_channels = 22;
  int num_maxima = 8;
  int fft_size = 128;
  int hop = 16;
  int sample_rate_hz = kCanonicalRateHz;
  Taper analysis_window = Taper::kHann;
  std::vector<double> band_edges =
      band_edges_from_widths(187.5, 125.0, default_bins_per_channel());
  // Loudness growth function, on the envelope scale where a full-scale
  // sinusoid centred on a bin reads 1.0.
  double lgf_base = 4.0 / 256.0;
  double lgf_saturation = 150.0 / 256.0;
  double lgf_rho = 416.2063;

  double frame_rate_hz() const {
    return static_cast<double>(sample_rate_hz) / static_cast<double>(hop);
  }
  // Throws Error naming the first violated invariant.
  void validate() const;

  bool operator==(const AceConfig&) const = default;
};

// Stable 64-bit FNV-1a hash over the canonical text form of the config.
std::uint64_t hash(const AceConfig& config);

struct FilterbankMap {
  std::size_t fft_size = 0;
  double bin_hz = 0.0;
  // assignment[k] is the channel of FFT bin k, or -1 if the bin is unused.
  std::vector<int> assignment;
  std::vector<double> centers_hz;
  std::vector<int> bins_per_channel;

  std::size_t num_channels() const { return centers_hz.size(); }
};

FilterbankMap build_filterbank(const AceConfig& config);

// M x T matrix of channel magnitudes, T = ceil(len / hop).
Matrix compute_envelopes(const AudioSignal& signal, const AceConfig& config,
                         const FilterbankMap& fb);

// Mask of the min(N, M) largest entries; ties go to the lower channel index.
std::vector<bool> select_maxima(std::span<const double> envelope_frame, int num_maxima);

double lgf_compress(double x, const AceConfig& config);

struct Electrodogram {
  std::size_t num_channels = 0;
  std::size_t num_frames = 0;
  double frame_rate_hz = 0.0;
  // Channel-major: magnitudes[c * num_frames + t]. Channel 0 is the lowest band.
  std::vector<float> magnitudes;

  Electrodogram() = default;
  Electrodogram(std::size_t channels, std::size_t frames, double rate)
      : num_channels(channels),
        num_frames(frames),
        frame_rate_hz(rate),
        magnitudes(channels * frames, 0.0f) {}

  float& at(std::size_t c, std::size_t t) { return magnitudes[c * num_frames + t]; }
  float at(std::size_t c, std::size_t t) const { return magnitudes[c * num_frames + t]; }

  std::size_t nonzero_in_frame(std::size_t t) const;
  // Throws Error if an entry is outside [0, 1] or non-finite, or if any frame
  // has more than `max_nonzero` stimulated channels (0 disables that check).
  void validate(std::size_t max_nonzero = 0) const;

  bool operator==(const Electrodogram&) const = default;
};

Electrodogram encode(const AudioSignal& signal, const AceConfig& config);
Electrodogram encode(const AudioSignal& signal, const AceConfig& config,
                     const FilterbankMap& fb);

// Binary format: "EGRM", u32 version, u32 M, u64 T, f64 frame rate, then
// M*T little-endian float32 in channel-major order.
std::string serialize_electrodogram(const Electrodogram& e);
Electrodogram deserialize_electrodogram(std::string_view bytes);
void write_electrodogram(const Electrodogram& e, const std::filesystem::path& path);
Electrodogram read_electrodogram(const std::filesystem::path& path);

}  // namespace cicoder
