// cicoder: command-line front end for the ACE / neural-coder toolkit.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cicoder/checkpoint.hpp"
#include "cicoder/config.hpp"
#include "cicoder/error.hpp"
#include "cicoder/experiment.hpp"
#include "cicoder/fileio.hpp"
#include "cicoder/parallel.hpp"

namespace fs = std::filesystem;
using namespace cicoder;

namespace {

struct Options {
  std::string config;
  bool print_config = false;

  std::string in, out, manifest, checkpoint, clean, degraded, history;
  bool no_inverse_lgf = false;
  bool json = false;
  bool force_train = false;
};

GlobalConfig effective_config(const Options& o) {
  if (o.config.empty()) return GlobalConfig{};
  return load_config(o.config);
}

void log_epoch(const EpochRecord& r) {
  std::fprintf(stderr, "epoch %3d  train %.6f  val %.6f  lr %.3g\n", r.epoch, r.train_loss,
               r.val_loss, r.lr);
}

std::vector<fs::path> wav_inputs(const fs::path& in) {
  if (!fs::is_directory(in)) return {in};
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(in)) {
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (e.is_regular_file() && ext == ".wav") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw Error(in.string() + ": no .wav files");
  return out;
}

int cmd_encode(const Options& o) {
  const GlobalConfig cfg = effective_config(o);
  const auto inputs = wav_inputs(o.in);
  fs::create_directories(o.out);
  const FilterbankMap fb = build_filterbank(cfg.ace);
  parallel_for(inputs.size(), [&](std::size_t i) {
    const AudioSignal s = load_for_pipeline(inputs[i], cfg.experiment.rms_normalize,
                                            cfg.experiment.normalize_dbfs);
    write_electrodogram(encode(s, cfg.ace, fb),
                        fs::path(o.out) / (inputs[i].stem().string() + ".egrm"));
  });
  std::cerr << "encoded " << inputs.size() << " file(s) into " << o.out << '\n';
  return 0;
}

int cmd_dataset(const Options& o) {
  const GlobalConfig cfg = effective_config(o);
  const auto m = build_dataset(o.in, o.out, cfg.ace, cfg.experiment);
  std::cerr << "manifest: " << (fs::path(o.out) / "manifest.txt").string() << " ("
            << m.entries.size() << " files, " << m.skipped.size() << " skipped)\n";
  return 0;
}

int cmd_train(const Options& o) {
  const GlobalConfig cfg = effective_config(o);
  const auto manifest = read_manifest(o.manifest);
  manifest.validate();
  if (manifest.ace_config_hash != hash(cfg.ace))
    throw Error(o.manifest + ": targets were built with a different ACE config");
  const auto train_set = load_examples(manifest, Split::kTrain, cfg.ace);
  const auto val_set = load_examples(manifest, Split::kVal, cfg.ace);
  const auto result = train(cfg.model, train_set, val_set, cfg.training, log_epoch);
  save_checkpoint(result.best, o.checkpoint);
  const fs::path history =
      o.history.empty() ? fs::path(o.checkpoint).replace_extension(".history.csv") : fs::path(o.history);
  write_file_atomic(history, history_csv(result.history));
  std::cerr << "best epoch " << result.history.best_epoch << " val " << result.history.best_val_loss
            << "; checkpoint " << o.checkpoint << '\n';
  return 0;
}

int cmd_infer(const Options& o) {
  const GlobalConfig cfg = effective_config(o);
  const ModelParams params = load_checkpoint(o.checkpoint);
  if (params.config.num_channels != cfg.ace.num_channels)
    throw Error(o.checkpoint + ": model width does not match ace.num_channels");
  const AudioSignal s =
      load_for_pipeline(o.in, cfg.experiment.rms_normalize, cfg.experiment.normalize_dbfs);
  write_electrodogram(infer(s, params, cfg.ace), o.out);
  return 0;
}

int cmd_vocode(const Options& o) {
  GlobalConfig cfg = effective_config(o);
  if (o.no_inverse_lgf) cfg.vocoder.inverse_lgf = false;
  const Electrodogram e = read_electrodogram(o.in);
  write_wav(synthesize(e, cfg.vocoder, cfg.ace), o.out);
  return 0;
}

int cmd_stoi(const Options& o) {
  const GlobalConfig cfg = effective_config(o);
  const StoiResult r = stoi(read_wav(o.clean), read_wav(o.degraded), cfg.stoi);
  if (o.json) {
    nlohmann::json j;
    j["score"] = r.score;
    j["raw_score"] = r.raw_score;
    j["per_band"] = r.per_band;
    j["frames_used"] = r.frames_used;
    j["segments"] = r.segments;
    std::cout << j.dump(2) << '\n';
  } else {
    std::printf("%.4f\n", r.score);
  }
  return 0;
}

int cmd_evaluate(const Options& o) {
  const GlobalConfig cfg = effective_config(o);
  const auto manifest = read_manifest(o.manifest);
  manifest.validate();
  ExperimentOptions opts;
  opts.checkpoint = o.checkpoint;
  opts.train = o.force_train || !fs::exists(o.checkpoint);
  opts.out_dir = o.out;
  opts.on_epoch = log_epoch;
  if (!opts.train) std::cerr << "loading checkpoint " << o.checkpoint << '\n';
  const auto report = run_experiment(manifest, cfg.settings(), opts);
  std::printf("mean_stoi_ace %.4f\nmean_stoi_model %.4f\nmean_gap %.4f\n", report.mean_ace,
              report.mean_model, report.mean_gap);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Cochlear-implant sound coding: ACE reference, neural coder, vocoder, STOI"};
  app.name("cicoder");
  app.set_help_all_flag("--help-all", "Help for every subcommand");
  app.add_option("--config", o.config, "Configuration file (TOML subset)")->check(CLI::ExistingFile);
  app.add_flag("--print-config", o.print_config, "Print the effective configuration and exit");
  app.require_subcommand(0, 1);
  app.fallthrough();

  auto* encode_cmd = app.add_subcommand("encode", "ACE-encode a WAV file or directory");
  encode_cmd->add_option("--in", o.in, "WAV file or directory")->required();
  encode_cmd->add_option("--out", o.out, "Output directory for .egrm files")->required();

  auto* dataset_cmd = app.add_subcommand("dataset", "Split a WAV directory and build ACE targets");
  dataset_cmd->add_option("--in", o.in, "Directory of WAV files")->required();
  dataset_cmd->add_option("--out", o.out, "Output directory (manifest.txt, electrodograms/)")->required();

  auto* train_cmd = app.add_subcommand("train", "Train the neural coder on a manifest");
  train_cmd->add_option("--manifest", o.manifest, "Corpus manifest")->required();
  train_cmd->add_option("--checkpoint", o.checkpoint, "Checkpoint to write")->required();
  train_cmd->add_option("--history", o.history, "Training history CSV (default: next to checkpoint)");

  auto* infer_cmd = app.add_subcommand("infer", "Predict an electrodogram with a trained model");
  infer_cmd->add_option("--checkpoint", o.checkpoint, "Model checkpoint")->required();
  infer_cmd->add_option("--in", o.in, "Input WAV")->required();
  infer_cmd->add_option("--out", o.out, "Output .egrm")->required();

  auto* vocode_cmd = app.add_subcommand("vocode", "Sine-vocode an electrodogram");
  vocode_cmd->add_option("--in", o.in, "Input .egrm")->required();
  vocode_cmd->add_option("--out", o.out, "Output WAV")->required();
  vocode_cmd->add_flag("--no-inverse-lgf", o.no_inverse_lgf, "Use magnitudes directly as envelopes");

  auto* stoi_cmd = app.add_subcommand("stoi", "Score a degraded signal against a clean one");
  stoi_cmd->add_option("--clean", o.clean, "Clean WAV")->required();
  stoi_cmd->add_option("--degraded", o.degraded, "Degraded WAV")->required();
  stoi_cmd->add_flag("--json", o.json, "Print the full result as JSON");

  auto* eval_cmd = app.add_subcommand("evaluate", "Train or load a model and compare against ACE");
  eval_cmd->add_option("--manifest", o.manifest, "Corpus manifest")->required();
  eval_cmd->add_option("--checkpoint", o.checkpoint,
                       "Checkpoint; trained and written when missing, loaded otherwise")
      ->required();
  eval_cmd->add_option("--out", o.out, "Report directory")->required();
  eval_cmd->add_flag("--train", o.force_train, "Retrain even if the checkpoint exists");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    std::cerr << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  try {
    if (o.print_config) {
      std::cout << emit_config(effective_config(o));
      return 0;
    }
    if (*encode_cmd) return cmd_encode(o);
    if (*dataset_cmd) return cmd_dataset(o);
    if (*train_cmd) return cmd_train(o);
    if (*infer_cmd) return cmd_infer(o);
    if (*vocode_cmd) return cmd_vocode(o);
    if (*stoi_cmd) return cmd_stoi(o);
    if (*eval_cmd) return cmd_evaluate(o);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "cicoder: " << msg << '\n';
    return 1;
  }
  std::cerr << "error: a subcommand is required\n\n" << app.help();
  return 2;
}
