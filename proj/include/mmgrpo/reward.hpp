#pragma once

#include <cmath>
#include <stdexcept>

#include "mmgrpo/dataset.hpp"
#include "mmgrpo/policy.hpp"

namespace mmgrpo {

struct RewardWeights {
  double w_correct = 0.9;
  double w_format = 0.1;
};

inline void validate(const RewardWeights& w) {
  if (w.w_correct < 0.0 || w.w_correct > 1.0 || w.w_format < 0.0 ||
      w.w_format > 1.0) {
    throw std::invalid_argument("reward: weights must be in [0,1]");
  }
  if (std::abs(w.w_correct + w.w_format - 1.0) > 1e-12) {
    throw std::invalid_argument("reward: w_correct + w_format must be 1");
  }
}

/// 1 iff the predicted answer exactly matches the ground truth.
inline int correctness_reward(const Trajectory& traj, const Sample& sample) {
  return traj.answer_token == sample.answer_token ? 1 : 0;
}

/// 1 iff both tokens are in range. Structurally always 1 for trajectories
/// produced by the v1 policy; kept so externally injected trajectories are
/// scored correctly.
inline int format_reward(const Trajectory& traj,
                         int scratch_vocab = 8, int answer_vocab = kAnswerVocab) {
  const bool ok = traj.scratch_token >= 0 && traj.scratch_token < scratch_vocab &&
                  traj.answer_token >= 0 && traj.answer_token < answer_vocab;
  return ok ? 1 : 0;
}

inline double total_reward(const Trajectory& traj, const Sample& sample,
                           const RewardWeights& w) {
  return w.w_correct * correctness_reward(traj, sample) +
         w.w_format * format_reward(traj);
}

}  // namespace mmgrpo
