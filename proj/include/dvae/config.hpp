#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dvae/dataset.hpp"
#include "dvae/model.hpp"
#include "dvae/trainer.hpp"

namespace dvae {

struct SampleConfig {
  int count = 4;
  int frames = 0;  // 0: use the training sequence length
};

// Everything one CLI invocation needs. Parsed from a JSON config file with
// strict key checking; presets fill defaults and explicit keys override them.
struct RunConfig {
  std::string preset;  // "", "desk", or "paper-wsj0"
  DvaeConfig model;
  TrainConfig train;
  DataConfig data;
  SampleConfig sample;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::string checkpoint;  // eval/resynth/sample input
  std::string resume;      // optional checkpoint to continue training from

  void validate() const;
};

// Parses the JSON text (applying its preset first), then the --set overrides
// (dot-separated paths, values parsed as JSON scalars with string fallback).
RunConfig parse_run_config(const std::string& json_text,
                           const std::vector<std::string>& set_overrides = {},
                           std::optional<std::uint64_t> seed_override = std::nullopt,
                           std::optional<std::string> out_override = std::nullopt);

RunConfig load_run_config(const std::string& path,
                          const std::vector<std::string>& set_overrides = {},
                          std::optional<std::uint64_t> seed_override = std::nullopt,
                          std::optional<std::string> out_override = std::nullopt);

std::string run_config_to_json(const RunConfig& cfg);

}  // namespace dvae
