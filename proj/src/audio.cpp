#include "cicoder/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <string>

#include "cicoder/error.hpp"

namespace cicoder {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

// Resampler design.
constexpr double kKaiserBeta = 8.0;
constexpr double kZeroCrossings = 32.0;
constexpr double kRolloff = 0.9;
constexpr long long kMaxPolyphases = 4096;

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

[[noreturn]] void wav_fail(const std::filesystem::path& path,
                           const std::string& what) {
  throw FormatError(path.string() + ": " + what);
}

struct FmtChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
};

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

struct SincKernel {
  double cutoff;      // cycles per input sample
  double half_width;  // input samples

  double operator()(double x) const {
    if (std::abs(x) >= half_width) return 0.0;
    const double r = x / half_width;
    const double kaiser = std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - r * r)) /
                          std::cyl_bessel_i(0.0, kKaiserBeta);
    return 2.0 * cutoff * sinc(2.0 * cutoff * x) * kaiser;
  }
};

}  // namespace

void validate(const AudioSignal& signal) {
  if (signal.sample_rate_hz <= 0) {
    throw Error("audio: sample rate must be positive, got " +
                std::to_string(signal.sample_rate_hz));
  }
  for (std::size_t i = 0; i < signal.samples.size(); ++i) {
    if (!std::isfinite(signal.samples[i])) {
      throw Error("audio: non-finite sample at index " + std::to_string(i));
    }
  }
}

std::vector<double> make_window(Taper taper, std::size_t length) {
  std::vector<double> w(length, 1.0);
  const double two_pi = 2.0 * std::numbers::pi;
  switch (taper) {
    case Taper::kRectangular:
      break;
    case Taper::kHann:
      for (std::size_t n = 0; n < length; ++n)
        w[n] = 0.5 - 0.5 * std::cos(two_pi * static_cast<double>(n) / length);
      break;
    case Taper::kHannNoZeros:
      for (std::size_t n = 0; n < length; ++n)
        w[n] = 0.5 - 0.5 * std::cos(two_pi * static_cast<double>(n + 1) / (length + 1));
      break;
  }
  return w;
}

AudioSignal read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) wav_fail(path, "cannot open file");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());

  if (bytes.size() < 12) wav_fail(path, "truncated chunk 'RIFF'");
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    wav_fail(path, "not a RIFF/WAVE file (chunk 'RIFF')");
  }

  FmtChunk fmt;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string id(reinterpret_cast<const char*>(bytes.data() + pos), 4);
    const std::uint32_t size = get_u32(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) wav_fail(path, "truncated chunk '" + id + "'");

    if (id == "fmt ") {
      if (size < 16) wav_fail(path, "truncated chunk 'fmt '");
      const unsigned char* p = bytes.data() + body;
      fmt.format = get_u16(p);
      fmt.channels = get_u16(p + 2);
      fmt.rate = get_u32(p + 4);
      fmt.bits = get_u16(p + 14);
      if (fmt.format == kFormatExtensible) {
        if (size < 40) wav_fail(path, "truncated chunk 'fmt '");
        fmt.format = get_u16(p + 24);  // first two bytes of the subformat GUID
      }
      have_fmt = true;
    } else if (id == "data") {
      data = bytes.data() + body;
      data_size = size;
    }
    pos = body + size + (size & 1u);
  }

  if (!have_fmt) wav_fail(path, "missing chunk 'fmt '");
  if (data == nullptr) wav_fail(path, "missing chunk 'data'");
  if (fmt.channels == 0) wav_fail(path, "zero channels in chunk 'fmt '");
  if (fmt.rate == 0) wav_fail(path, "zero sample rate in chunk 'fmt '");

  const bool pcm16 = fmt.format == kFormatPcm && fmt.bits == 16;
  const bool f32 = fmt.format == kFormatFloat && fmt.bits == 32;
  if (!pcm16 && !f32) {
    wav_fail(path, "unsupported codec (format " + std::to_string(fmt.format) + ", " +
                       std::to_string(fmt.bits) + " bits) in chunk 'fmt '");
  }

  const std::size_t bytes_per_sample = fmt.bits / 8;
  const std::size_t block = bytes_per_sample * fmt.channels;
  if (data_size % block != 0) wav_fail(path, "truncated chunk 'data'");
  const std::size_t frames = data_size / block;

  AudioSignal out;
  out.sample_rate_hz = static_cast<int>(fmt.rate);
  out.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < fmt.channels; ++c) {
      const unsigned char* p = data + i * block + c * bytes_per_sample;
      if (pcm16) {
        acc += static_cast<std::int16_t>(get_u16(p)) / 32768.0;
      } else {
        const std::uint32_t bits = get_u32(p);
        float v;
        std::memcpy(&v, &bits, sizeof v);
        acc += static_cast<double>(v);
      }
    }
    out.samples[i] = acc / fmt.channels;
  }
  try {
    validate(out);
  } catch (const Error& e) {
    wav_fail(path, std::string(e.what()) + " in chunk 'data'");
  }
  return out;
}

void write_wav(const AudioSignal& signal, const std::filesystem::path& path) {
  validate(signal);
  const auto data_bytes = static_cast<std::uint32_t>(signal.samples.size() * 2);

  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(signal.sample_rate_hz));
  put_u32(out, static_cast<std::uint32_t>(signal.sample_rate_hz) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);
  for (double s : signal.samples) {
    const double clipped = std::clamp(s, -1.0, 1.0);
    const long q = std::clamp(std::lround(clipped * 32768.0), -32768L, 32767L);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(path.string() + ": cannot open for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error(path.string() + ": write failed");
}

AudioSignal resample(const AudioSignal& signal, int target_rate_hz) {
  if (target_rate_hz <= 0) throw Error("resample: target rate must be positive");
  if (signal.sample_rate_hz <= 0) throw Error("resample: source rate must be positive");
  if (target_rate_hz == signal.sample_rate_hz) return signal;

  const long long src = signal.sample_rate_hz;
  const long long dst = target_rate_hz;
  const long long g = std::gcd(src, dst);
  const long long step = src / g;    // input advance per output, in 1/phases units
  const long long phases = dst / g;

  const std::size_t in_len = signal.samples.size();
  const auto out_len = static_cast<std::size_t>(
      std::llround(static_cast<double>(in_len) * static_cast<double>(dst) / src));

  SincKernel kernel;
  kernel.cutoff = 0.5 * std::min(1.0, static_cast<double>(dst) / src) * kRolloff;
  kernel.half_width = kZeroCrossings / (2.0 * kernel.cutoff);
  const auto reach = static_cast<long long>(std::ceil(kernel.half_width));

  const auto& x = signal.samples;
  auto sample_at = [&](long long k) -> double {
    return (k < 0 || k >= static_cast<long long>(in_len)) ? 0.0
                                                          : x[static_cast<std::size_t>(k)];
  };

  AudioSignal out;
  out.sample_rate_hz = target_rate_hz;
  out.samples.assign(out_len, 0.0);

  if (phases <= kMaxPolyphases) {
    // Tap j of phase p weights input sample i0 + j, j in [-reach, reach].
    const std::size_t taps = static_cast<std::size_t>(2 * reach + 1);
    std::vector<double> bank(static_cast<std::size_t>(phases) * taps);
    for (long long p = 0; p < phases; ++p) {
      const double frac = static_cast<double>(p) / phases;
      for (long long j = -reach; j <= reach; ++j) {
        bank[static_cast<std::size_t>(p) * taps + static_cast<std::size_t>(j + reach)] =
            kernel(frac - static_cast<double>(j));
      }
    }
    for (std::size_t n = 0; n < out_len; ++n) {
      const long long num = static_cast<long long>(n) * step;
      const long long i0 = num / phases;
      const long long p = num % phases;
      const double* h = &bank[static_cast<std::size_t>(p) * taps];
      double acc = 0.0;
      for (long long j = -reach; j <= reach; ++j) acc += h[j + reach] * sample_at(i0 + j);
      out.samples[n] = acc;
    }
  } else {
    for (std::size_t n = 0; n < out_len; ++n) {
      const long long num = static_cast<long long>(n) * step;
      const long long i0 = num / phases;
      const double frac = static_cast<double>(num % phases) / phases;
      double acc = 0.0;
      for (long long j = -reach; j <= reach; ++j)
        acc += kernel(frac - static_cast<double>(j)) * sample_at(i0 + j);
      out.samples[n] = acc;
    }
  }
  return out;
}

FrameSequence frame_signal(std::span<const double> samples, std::size_t frame_length,
                           std::size_t hop, Taper taper) {
  if (frame_length == 0) throw Error("frame_signal: frame_length must be >= 1");
  if (hop == 0 || hop > frame_length) {
    throw Error("frame_signal: hop must be in [1, frame_length]");
  }
  FrameSequence seq;
  seq.frame_length = frame_length;
  seq.hop = hop;
  seq.window = make_window(taper, frame_length);

  const std::size_t count = (samples.size() + hop - 1) / hop;
  seq.frames.assign(count, std::vector<double>(frame_length, 0.0));
  for (std::size_t t = 0; t < count; ++t) {
    const std::size_t start = t * hop;
    const std::size_t avail = std::min(frame_length, samples.size() - start);
    auto& frame = seq.frames[t];
    for (std::size_t i = 0; i < avail; ++i) frame[i] = samples[start + i] * seq.window[i];
  }
  return seq;
}

FrameSequence frame_signal(const AudioSignal& signal, std::size_t frame_length,
                           std::size_t hop, Taper taper) {
  return frame_signal(std::span<const double>(signal.samples), frame_length, hop, taper);
}

std::vector<double> overlap_add(const FrameSequence& seq) {
  if (seq.frames.empty()) return {};
  std::vector<double> out((seq.frames.size() - 1) * seq.hop + seq.frame_length, 0.0);
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    const auto& frame = seq.frames[t];
    for (std::size_t i = 0; i < frame.size(); ++i) out[t * seq.hop + i] += frame[i];
  }
  return out;
}

double rms(std::span<const double> samples) {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (double s : samples) acc += s * s;
  return std::sqrt(acc / static_cast<double>(samples.size()));
}

AudioSignal normalize_rms(const AudioSignal& signal, double target_dbfs) {
  const double level = rms(signal.samples);
  if (level <= 0.0) return signal;
  const double gain = std::pow(10.0, target_dbfs / 20.0) / level;
  AudioSignal out = signal;
  for (double& s : out.samples) s *= gain;
  return out;
}

}  // namespace cicoder
