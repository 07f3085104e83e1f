// Writes a reproducible corpus of synthetic speech-like WAV files.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "cicoder/parallel.hpp"
#include "cicoder/speechgen.hpp"

int main(int argc, char** argv) {
  namespace fs = std::filesystem;
  std::string out;
  int count = 120;
  std::uint64_t seed = 1;
  cicoder::SpeechGenConfig cfg;

  CLI::App app{"Generate synthetic speech-like WAV files"};
  app.name("cicoder_make_corpus");
  app.add_option("--out", out, "Output directory")->required();
  app.add_option("--count", count, "Number of files")->check(CLI::Range(1, 100000));
  app.add_option("--seed", seed, "First seed; file i uses seed + i");
  app.add_option("--duration", cfg.duration_s, "Seconds per file")->check(CLI::Range(0.6, 600.0));
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    fs::create_directories(out);
    cicoder::parallel_for(static_cast<std::size_t>(count), [&](std::size_t i) {
      char name[32];
      std::snprintf(name, sizeof name, "utt%04zu.wav", i);
      cicoder::write_wav(cicoder::generate_speech(seed + i, cfg), fs::path(out) / name);
    });
  } catch (const std::exception& e) {
    std::cerr << "cicoder_make_corpus: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
