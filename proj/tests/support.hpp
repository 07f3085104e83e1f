#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <string>
#include <unistd.h>

#include "cicoder/audio.hpp"
#include "cicoder/speechgen.hpp"

namespace cicoder::testing {

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("cicoder_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline AudioSignal tone(double freq_hz, double seconds, int rate = 16000, double amp = 0.5) {
  AudioSignal s;
  s.sample_rate_hz = rate;
  s.samples.resize(static_cast<std::size_t>(std::lround(seconds * rate)));
  for (std::size_t n = 0; n < s.samples.size(); ++n)
    s.samples[n] = amp * std::sin(2.0 * std::numbers::pi * freq_hz * static_cast<double>(n) / rate);
  return s;
}

// utt0000.wav, utt0001.wav, ... with generator seeds first_seed, first_seed + 1, ...
inline void write_speech_corpus(const std::filesystem::path& dir, int count, std::uint64_t first_seed,
                                double seconds = 3.0) {
  std::filesystem::create_directories(dir);
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "utt%04d.wav", i);
    write_wav(generate_speech(first_seed + static_cast<std::uint64_t>(i), {16000, seconds}), dir / name);
  }
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace cicoder::testing
