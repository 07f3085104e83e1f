#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "cicoder/ace.hpp"
#include "cicoder/experiment.hpp"
#include "cicoder/nn.hpp"
#include "cicoder/stoi.hpp"
#include "cicoder/train.hpp"
#include "cicoder/vocoder.hpp"

namespace cicoder {

// Every tunable of the toolkit, one section per module.
struct GlobalConfig {
  AceConfig ace;
  ModelConfig model;
  TrainingConfig training;
  VocoderConfig vocoder;
  StoiConfig stoi;
  ExperimentConfig experiment;

  ExperimentSettings settings() const { return {ace, model, training, vocoder, stoi}; }
  void validate() const;
  bool operator==(const GlobalConfig&) const = default;
};

// TOML subset: [section] headers, `key = value` lines, # comments.
// Values are integers, floats, true/false, "strings" and one-line [arrays].
// Keys absent from the text keep their defaults; unknown sections or keys
// and malformed values throw FormatError with the line number.
GlobalConfig parse_config(std::string_view text);
GlobalConfig load_config(const std::filesystem::path& path);

// Emits every key. parse_config(emit_config(c)) == c, and re-emitting is
// byte-identical.
std::string emit_config(const GlobalConfig& config);

}  // namespace cicoder
