#pragma once

// Everything a subcommand can be configured with, loaded from a YAML file. Every key is
// optional; unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "neurosleep/encoder.hpp"
#include "neurosleep/operating_point.hpp"
#include "neurosleep/params.hpp"
#include "neurosleep/training.hpp"

namespace neurosleep::app {

struct Ablations {
  bool dense_input = false;
  bool single_branch = false;
  bool no_elif = false;
};

struct RunConfig {
  EncoderConfig encoder;
  FidelityThresholds thresholds;
  SweepGrid grid = SweepGrid::standard();
  net::ModelConfig model;
  TrainConfig train;
  int cv_folds = 5;
  double cv_val_fraction = 0.15;
  std::uint64_t seed = 0;
  double gap_tolerance = 0.1;
  Ablations ablations;
  std::optional<std::filesystem::path> out;

  // Model config with the ablation switches applied.
  net::ModelConfig effective_model() const;
  void validate() const;
};

// ParameterError naming the offending key for unknown keys, wrong types or bad values.
RunConfig parse_run_config(const std::string& yaml_text);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace neurosleep::app
