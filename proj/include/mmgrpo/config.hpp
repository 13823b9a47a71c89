#pragma once

#include <cstdint>
#include <string>

#include "mmgrpo/dataset.hpp"
#include "mmgrpo/grpo.hpp"
#include "mmgrpo/reward.hpp"

namespace mmgrpo {

struct RunConfig {
  GenConfig gen;
  TrainConfig train;
  RewardWeights reward;
  std::uint64_t eval_seed = 1234;
  std::string out_dir = "out";
  int checkpoint_every = 50;
};

void validate(const RunConfig& cfg);

/// Parses a config file with sections gen/train/reward. Missing fields keep
/// defaults; unknown fields are rejected with their path.
RunConfig load_run_config(const std::string& path);
RunConfig run_config_from_json_text(const std::string& text);

/// Every field, defaults included, so a run is reproducible from artifacts.
std::string resolved_config_text(const RunConfig& cfg);

std::string ratio_level_to_string(RatioLevel rl);
RatioLevel ratio_level_from_string(const std::string& s);

}  // namespace mmgrpo
