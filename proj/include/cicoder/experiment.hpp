#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cicoder/ace.hpp"
#include "cicoder/nn.hpp"
#include "cicoder/stoi.hpp"
#include "cicoder/train.hpp"
#include "cicoder/vocoder.hpp"

namespace cicoder {

struct ExperimentConfig {
  int train_files = 80;
  int val_files = 20;
  int test_files = 20;
  std::uint64_t seed = 1234;
  bool rms_normalize = true;
  double normalize_dbfs = -26.0;

  bool operator==(const ExperimentConfig&) const = default;
};

enum class Split { kTrain, kVal, kTest };
std::string to_string(Split s);

struct ManifestEntry {
  std::filesystem::path wav;            // as listed; relative paths resolve
  std::filesystem::path electrodogram;  // against the manifest directory
  double duration_s = 0.0;
  Split split = Split::kTrain;
};

struct SkippedFile {
  std::filesystem::path wav;
  std::string reason;
};

struct CorpusManifest {
  std::vector<ManifestEntry> entries;
  std::vector<SkippedFile> skipped;
  int sample_rate_hz = kCanonicalRateHz;
  bool rms_normalize = true;
  double normalize_dbfs = -26.0;
  std::uint64_t ace_config_hash = 0;
  std::uint64_t seed = 0;
  std::string split_interpretation;
  std::filesystem::path base_dir;  // directory of the manifest file

  std::vector<ManifestEntry> split(Split s) const;
  std::filesystem::path resolve(const std::filesystem::path& p) const;
  // Throws Error naming the first file that appears in more than one split.
  void validate() const;
};

// Line-oriented UTF-8, first line "CICODER-MANIFEST 1".
std::string serialize_manifest(const CorpusManifest& m);
CorpusManifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir);
void write_manifest(const CorpusManifest& m, const std::filesystem::path& path);
CorpusManifest read_manifest(const std::filesystem::path& path);

// Reads a WAV, converts to the canonical rate and applies the manifest's
// level normalisation.
AudioSignal load_for_pipeline(const std::filesystem::path& wav, bool rms_normalize,
                              double normalize_dbfs);

// Seeded shuffle of the *.wav files in `wav_dir` (sorted by name first), split
// into train/val/test, one ACE electrodogram per file under
// out_dir/electrodograms, manifest at out_dir/manifest.txt.
CorpusManifest build_dataset(const std::filesystem::path& wav_dir,
                             const std::filesystem::path& out_dir, const AceConfig& ace,
                             const ExperimentConfig& exp);

struct ReportRow {
  std::string file;
  double stoi_ace = 0.0;
  double stoi_model = 0.0;
};

struct ComparisonReport {
  std::vector<ReportRow> rows;  // test files only, manifest order
  double mean_ace = 0.0;
  double mean_model = 0.0;
  double mean_gap = 0.0;  // mean_ace - mean_model
  TrainingHistory history;  // empty when a checkpoint was loaded
  std::filesystem::path history_csv;
};

std::string report_csv(const ComparisonReport& r);

struct ExperimentSettings {
  AceConfig ace;
  ModelConfig model;
  TrainingConfig training;
  VocoderConfig vocoder;
  StoiConfig stoi;
};

// Produces the model electrodogram for a test file. Default: trained model.
using Predictor = std::function<Electrodogram(const AudioSignal& clean, const Electrodogram& ace)>;

struct ExperimentOptions {
  std::filesystem::path checkpoint;   // written after training, or read
  bool train = true;                  // false: load `checkpoint`
  std::filesystem::path out_dir;      // report.csv, summary.txt, history files
  Predictor predictor;                // overrides the model when set
  EpochCallback on_epoch;
};

ComparisonReport run_experiment(const CorpusManifest& manifest, const ExperimentSettings& s,
                                const ExperimentOptions& opts);

// Training examples (features, ACE targets) for one split.
std::vector<TrainingExample> load_examples(const CorpusManifest& manifest, Split split,
                                           const AceConfig& ace);

}  // namespace cicoder
