#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace cicoder {

inline constexpr int kCanonicalRateHz = 16000;

/// Mono waveform. Samples are nominally in [-1, 1].
struct AudioSignal {
  std::vector<double> samples;
  int sample_rate_hz = kCanonicalRateHz;

  std::size_t size() const { return samples.size(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

/// Throws Error when the rate is not positive or a sample is NaN/Inf.
void validate(const AudioSignal& signal);

enum class Taper {
  kRectangular,
  kHann,           // periodic Hann, COLA at hop = N/2
  kHannNoZeros,    // 0.5 - 0.5 cos(2 pi n / (N + 1)), n = 1..N
};

std::vector<double> make_window(Taper taper, std::size_t length);

struct FrameSequence {
  std::vector<std::vector<double>> frames;
  std::size_t frame_length = 0;
  std::size_t hop = 0;
  std::vector<double> window;

  std::size_t size() const { return frames.size(); }
};

// Reads RIFF/WAVE PCM16 or float32 (plain or WAVE_FORMAT_EXTENSIBLE).
// Multichannel input is averaged to mono.
AudioSignal read_wav(const std::filesystem::path& path);

// Writes 16-bit PCM mono. Samples outside [-1, 1] are clipped.
void write_wav(const AudioSignal& signal, const std::filesystem::path& path);

// Windowed-sinc (Kaiser, beta 8) band-limited rate conversion.
AudioSignal resample(const AudioSignal& signal, int target_rate_hz);

// Frame t covers samples [t*hop, t*hop + frame_length), zero-padded past the
// end; there are ceil(len / hop) frames.
FrameSequence frame_signal(std::span<const double> samples,
                           std::size_t frame_length, std::size_t hop,
                           Taper taper);
FrameSequence frame_signal(const AudioSignal& signal, std::size_t frame_length,
                           std::size_t hop, Taper taper);

// Inverse of frame_signal with no synthesis window. Output length is
// (frames - 1) * hop + frame_length.
std::vector<double> overlap_add(const FrameSequence& frames);

double rms(std::span<const double> samples);

// Scales to the given RMS level in dBFS. Silent input is returned unchanged.
AudioSignal normalize_rms(const AudioSignal& signal, double target_dbfs);

}  // namespace cicoder
