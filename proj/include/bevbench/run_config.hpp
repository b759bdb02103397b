#pragma once

#include <string>
#include <vector>

#include "bevbench/adapt.hpp"
#include "bevbench/dataset.hpp"
#include "bevbench/train.hpp"

namespace bevbench {

struct EvalConfig {
  std::string dataset_dir;
  std::string checkpoint;
  int views = 8;
  std::vector<std::string> modalities{"semantic"};
};

// One JSON file drives every subcommand; each section carries the defaults of
// its struct, may be given partially, and rejects keys it does not know.
struct RunConfig {
  GenConfig dataset;
  int model_mid_c = 32;
  bool model_view_relation = true;
  TrainConfig train;
  AdaptConfig adapt;
  EvalConfig eval;
};

RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& cfg);  // full effective echo

}  // namespace bevbench
