#include "cicoder/experiment.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "byteio.hpp"
#include "cicoder/checkpoint.hpp"
#include "cicoder/error.hpp"
#include "cicoder/parallel.hpp"
#include "cicoder/rng.hpp"

namespace cicoder {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kManifestHeader = "CICODER-MANIFEST 1";

std::string format_double(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw FormatError("manifest: unknown split '" + s + "'");
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

std::string file_label(const fs::path& p) { return p.filename().string(); }

}  // namespace

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "train";
}

std::vector<ManifestEntry> CorpusManifest::split(Split s) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries)
    if (e.split == s) out.push_back(e);
  return out;
}

fs::path CorpusManifest::resolve(const fs::path& p) const {
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

void CorpusManifest::validate() const {
  std::map<std::string, Split> seen;
  for (const auto& e : entries) {
    const std::string key = resolve(e.wav).lexically_normal().string();
    auto [it, inserted] = seen.emplace(key, e.split);
    if (!inserted) {
      throw Error("manifest: file '" + e.wav.string() + "' appears in both " +
                  to_string(it->second) + " and " + to_string(e.split) + " splits");
    }
  }
}

std::string serialize_manifest(const CorpusManifest& m) {
  std::ostringstream os;
  os << kManifestHeader << '\n';
  os << "sample_rate_hz\t" << m.sample_rate_hz << '\n';
  os << "rms_normalize\t" << (m.rms_normalize ? 1 : 0) << '\n';
  os << "normalize_dbfs\t" << format_double(m.normalize_dbfs, 3) << '\n';
  os << "ace_config_hash\t" << hex64(m.ace_config_hash) << '\n';
  os << "seed\t" << m.seed << '\n';
  os << "split_interpretation\t" << m.split_interpretation << '\n';
  for (const auto& s : m.skipped) os << "skipped\t" << s.wav.string() << '\t' << s.reason << '\n';
  for (const auto& e : m.entries) {
    os << "entry\t" << to_string(e.split) << '\t' << format_double(e.duration_s, 6) << '\t'
       << e.wav.string() << '\t' << e.electrodogram.string() << '\n';
  }
  return os.str();
}

CorpusManifest parse_manifest(std::string_view text, const fs::path& base_dir) {
  CorpusManifest m;
  m.base_dir = base_dir;
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kManifestHeader)
    throw FormatError("manifest: missing header '" + std::string(kManifestHeader) + "'");
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    auto bad = [&] { throw FormatError("manifest: malformed line " + std::to_string(line_no)); };
    try {
      if (f[0] == "entry") {
        if (f.size() != 5) bad();
        ManifestEntry e;
        e.split = split_from_string(f[1]);
        e.duration_s = std::stod(f[2]);
        e.wav = f[3];
        e.electrodogram = f[4];
        m.entries.push_back(std::move(e));
      } else if (f[0] == "skipped") {
        if (f.size() != 3) bad();
        m.skipped.push_back({f[1], f[2]});
      } else if (f.size() != 2) {
        bad();
      } else if (f[0] == "sample_rate_hz") {
        m.sample_rate_hz = std::stoi(f[1]);
      } else if (f[0] == "rms_normalize") {
        m.rms_normalize = f[1] == "1";
      } else if (f[0] == "normalize_dbfs") {
        m.normalize_dbfs = std::stod(f[1]);
      } else if (f[0] == "ace_config_hash") {
        m.ace_config_hash = std::stoull(f[1], nullptr, 16);
      } else if (f[0] == "seed") {
        m.seed = std::stoull(f[1]);
      } else if (f[0] == "split_interpretation") {
        m.split_interpretation = f[1];
      } else {
        throw FormatError("manifest: unknown key '" + f[0] + "' on line " +
                          std::to_string(line_no));
      }
    } catch (const std::logic_error&) {
      bad();
    }
  }
  return m;
}

void write_manifest(const CorpusManifest& m, const fs::path& path) {
  write_file_atomic(path, serialize_manifest(m));
}

CorpusManifest read_manifest(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return parse_manifest(text, path.parent_path());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

AudioSignal load_for_pipeline(const fs::path& wav, bool rms_normalize, double normalize_dbfs) {
  AudioSignal signal = read_wav(wav);
  if (signal.sample_rate_hz != kCanonicalRateHz) signal = resample(signal, kCanonicalRateHz);
  if (rms_normalize) signal = normalize_rms(signal, normalize_dbfs);
  return signal;
}

CorpusManifest build_dataset(const fs::path& wav_dir, const fs::path& out_dir,
                             const AceConfig& ace, const ExperimentConfig& exp) {
  ace.validate();
  if (!fs::is_directory(wav_dir)) throw Error(wav_dir.string() + ": not a directory");
  if (exp.train_files < 1 || exp.val_files < 1 || exp.test_files < 1)
    throw Error("dataset: every split needs at least one file");

  std::vector<fs::path> wavs;
  for (const auto& ent : fs::directory_iterator(wav_dir)) {
    if (!ent.is_regular_file()) continue;
    auto ext = ent.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".wav") wavs.push_back(ent.path());
  }
  std::sort(wavs.begin(), wavs.end());

  CorpusManifest m;
  m.base_dir = out_dir;
  m.sample_rate_hz = ace.sample_rate_hz;
  m.rms_normalize = exp.rms_normalize;
  m.normalize_dbfs = exp.normalize_dbfs;
  m.ace_config_hash = hash(ace);
  m.seed = exp.seed;
  m.split_interpretation = std::to_string(exp.train_files) + " train / " +
                           std::to_string(exp.val_files) + " val / " +
                           std::to_string(exp.test_files) + " test (separate counts per split)";

  std::vector<fs::path> readable;
  std::vector<double> durations;
  for (const auto& w : wavs) {
    try {
      const AudioSignal s = read_wav(w);
      readable.push_back(w);
      durations.push_back(s.duration_s());
    } catch (const Error& e) {
      std::cerr << "warning: skipping unreadable file: " << e.what() << '\n';
      m.skipped.push_back({fs::absolute(w), e.what()});
    }
  }
  const std::size_t need =
      static_cast<std::size_t>(exp.train_files + exp.val_files + exp.test_files);
  if (readable.size() < need) {
    throw Error("dataset: insufficient files: need " + std::to_string(need) + ", found " +
                std::to_string(readable.size()) + " readable WAV files in " + wav_dir.string());
  }

  std::vector<std::size_t> order(readable.size());
  std::iota(order.begin(), order.end(), 0);
  detail::SplitMix rng(exp.seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  fs::create_directories(out_dir / "electrodograms");
  for (std::size_t i = 0; i < need; ++i) {
    ManifestEntry e;
    const std::size_t idx = order[i];
    e.wav = fs::absolute(readable[idx]);
    e.duration_s = durations[idx];
    e.split = i < static_cast<std::size_t>(exp.train_files) ? Split::kTrain
              : i < static_cast<std::size_t>(exp.train_files + exp.val_files) ? Split::kVal
                                                                              : Split::kTest;
    e.electrodogram = fs::path("electrodograms") / (readable[idx].stem().string() + ".egrm");
    m.entries.push_back(std::move(e));
  }
  m.validate();

  const FilterbankMap fb = build_filterbank(ace);
  parallel_for(m.entries.size(), [&](std::size_t i) {
    const auto& e = m.entries[i];
    const AudioSignal s = load_for_pipeline(e.wav, m.rms_normalize, m.normalize_dbfs);
    write_electrodogram(encode(s, ace, fb), m.resolve(e.electrodogram));
  });
  write_manifest(m, out_dir / "manifest.txt");
  return m;
}

std::vector<TrainingExample> load_examples(const CorpusManifest& manifest, Split split,
                                           const AceConfig& ace) {
  const auto entries = manifest.split(split);
  std::vector<TrainingExample> out(entries.size());
  parallel_for(entries.size(), [&](std::size_t i) {
    const AudioSignal s =
        load_for_pipeline(manifest.resolve(entries[i].wav), manifest.rms_normalize,
                          manifest.normalize_dbfs);
    out[i].features = encoder_features(s, ace);
    out[i].target = read_electrodogram(manifest.resolve(entries[i].electrodogram));
    if (out[i].target.num_channels != out[i].features.rows() ||
        out[i].target.num_frames != out[i].features.cols()) {
      throw Error(entries[i].electrodogram.string() + ": target does not match features of " +
                  entries[i].wav.string());
    }
  });
  return out;
}

std::string report_csv(const ComparisonReport& r) {
  std::string out = "file,stoi_ace,stoi_model\n";
  for (const auto& row : r.rows)
    out += row.file + ',' + format_double(row.stoi_ace, 6) + ',' +
           format_double(row.stoi_model, 6) + '\n';
  return out;
}

ComparisonReport run_experiment(const CorpusManifest& manifest, const ExperimentSettings& s,
                                const ExperimentOptions& opts) {
  manifest.validate();
  s.ace.validate();
  if (manifest.ace_config_hash != hash(s.ace)) {
    throw Error("experiment: manifest targets were built with a different ACE config (hash " +
                hex64(manifest.ace_config_hash) + ", current " + hex64(hash(s.ace)) + ")");
  }
  if (s.model.num_channels != s.ace.num_channels)
    throw Error("experiment: model num_channels must equal ACE num_channels");
  const auto tests = manifest.split(Split::kTest);
  if (tests.empty()) throw Error("experiment: manifest has no test files");

  ComparisonReport report;
  ModelParams params;
  const bool need_model = !opts.predictor;
  if (need_model || opts.train) {
    if (opts.train) {
      const auto train_set = load_examples(manifest, Split::kTrain, s.ace);
      const auto val_set = load_examples(manifest, Split::kVal, s.ace);
      auto result = train(s.model, train_set, val_set, s.training, opts.on_epoch);
      report.history = std::move(result.history);
      if (!opts.checkpoint.empty()) {
        save_checkpoint(result.best, opts.checkpoint);
        params = load_checkpoint(opts.checkpoint);
      } else {
        params = deserialize_checkpoint(serialize_checkpoint(result.best));
      }
    } else {
      params = load_checkpoint(opts.checkpoint);
    }
  }

  const FilterbankMap fb = build_filterbank(s.ace);
  report.rows.resize(tests.size());
  parallel_for(tests.size(), [&](std::size_t i) {
    const auto& entry = tests[i];
    const AudioSignal clean =
        load_for_pipeline(manifest.resolve(entry.wav), manifest.rms_normalize,
                          manifest.normalize_dbfs);
    const Electrodogram ace_e = encode(clean, s.ace, fb);
    const Electrodogram model_e =
        opts.predictor ? opts.predictor(clean, ace_e) : infer(clean, params, s.ace);
    model_e.validate(static_cast<std::size_t>(s.ace.num_maxima));

    ReportRow row;
    row.file = file_label(entry.wav);
    try {
      row.stoi_ace = stoi(clean, synthesize(ace_e, s.vocoder, s.ace), s.stoi).score;
      row.stoi_model = stoi(clean, synthesize(model_e, s.vocoder, s.ace), s.stoi).score;
    } catch (const Error& e) {
      throw Error("experiment: test file " + entry.wav.string() + ": " + e.what());
    }
    report.rows[i] = row;
  });

  for (const auto& row : report.rows) {
    report.mean_ace += row.stoi_ace;
    report.mean_model += row.stoi_model;
  }
  report.mean_ace /= static_cast<double>(report.rows.size());
  report.mean_model /= static_cast<double>(report.rows.size());
  report.mean_gap = report.mean_ace - report.mean_model;

  if (!opts.out_dir.empty()) {
    fs::create_directories(opts.out_dir);
    write_file_atomic(opts.out_dir / "report.csv", report_csv(report));
    std::ostringstream summary;
    summary << "test_files\t" << report.rows.size() << '\n'
            << "mean_stoi_ace\t" << format_double(report.mean_ace, 6) << '\n'
            << "mean_stoi_model\t" << format_double(report.mean_model, 6) << '\n'
            << "mean_gap\t" << format_double(report.mean_gap, 6) << '\n'
            << "vocoder_inverse_lgf\t" << (s.vocoder.inverse_lgf ? 1 : 0) << '\n'
            << "stoi_reference_method\t" << (s.stoi.reference_method ? 1 : 0) << '\n'
            << "rms_normalize\t" << (manifest.rms_normalize ? 1 : 0) << '\n';
    if (!report.history.epochs.empty()) {
      summary << "epochs\t" << report.history.epochs.size() << '\n'
              << "best_epoch\t" << report.history.best_epoch << '\n'
              << "best_val_loss\t" << format_double(report.history.best_val_loss, 8) << '\n';
      report.history_csv = opts.out_dir / "history.csv";
      write_file_atomic(report.history_csv, history_csv(report.history));
      write_file_atomic(opts.out_dir / "history.dat", history_gnuplot(report.history));
    }
    write_file_atomic(opts.out_dir / "summary.txt", summary.str());
  }
  return report;
}

}  // namespace cicoder
