#pragma once

// Line-oriented `key = value` run configuration.
//
//   # comment
//   train = data/train.hehr
//   embedding_dim = 128
//
// Unknown keys are rejected. Every key can also be given on the command
// line, which takes precedence over the file.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hehr/evaluation.hpp"
#include "hehr/model.hpp"
#include "hehr/training.hpp"

namespace hehr {

struct RunConfig {
  std::string train_path;
  std::string valid_path;
  std::string test_path;
  std::string checkpoint_path;
  std::string report_path;
  std::string log_path;
  std::string resume_path;

  ModelConfig model;
  TrainConfig train;
  RankOptions rank;
  std::size_t workers = 1;

  // Throws ConfigError on unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  std::map<std::string, std::string> to_map() const;
  // Every key `set` accepts.
  static const std::vector<std::string>& keys();

  // Numeric invariants plus existence of the input files that are set.
  void validate(bool require_train = true) const;
};

using ConfigMap = std::map<std::string, std::string>;

// Throws ConfigError (with line number) / IoFailure.
ConfigMap read_config_file(const std::string& path);
ConfigMap parse_config_text(const std::string& text);

RunConfig make_run_config(const ConfigMap& values);

// The model-shaping subset of a RunConfig, as stored in checkpoints.
ConfigMap model_config_to_map(const ModelConfig& cfg);
ModelConfig model_config_from_map(const ConfigMap& values);

}  // namespace hehr
