#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "mmgrpo/dataset.hpp"
#include "mmgrpo/policy.hpp"

namespace mmgrpo {

struct Rollout {
  std::int64_t sample_id = 0;
  Trajectory trajectory;
  double reward = 0.0;
  double advantage = 0.0;
  std::array<double, 2> old_logprob_per_token{};
  double old_logprob_sum = 0.0;
};

/// G rollouts sharing one prompt (the sample under the active corruption
/// view).
struct Group {
  Sample prompt;
  std::vector<Rollout> rollouts;
};

struct GroupStats {
  double mu_group = 0.0;
  double sigma_group = 0.0;  // population std
};

}  // namespace mmgrpo
