#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mmgrpo/corruption.hpp"
#include "mmgrpo/dataset.hpp"
#include "mmgrpo/diagnostics.hpp"
#include "mmgrpo/policy.hpp"
#include "mmgrpo/reward.hpp"
#include "mmgrpo/rollout.hpp"

namespace mmgrpo {

enum class RatioLevel { Sequence, Token };

struct TrainConfig {
  int group_size = 5;
  double temperature = 0.7;
  double eps_adv = 1e-4;
  double eps_clip = 0.2;
  double beta = 0.01;  // KL weight
  double lr = 1e-3;
  double weight_decay = 1e-2;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double max_grad_norm = 1.0;
  int batch_prompts = 32;
  int inner_epochs = 2;
  int iterations = 300;
  RatioLevel ratio_level = RatioLevel::Sequence;
  bool sample_std = false;  // Bessel-corrected std instead of population std
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& cfg);  // throws std::invalid_argument

struct OptimizerState {
  std::vector<double> m;
  std::vector<double> v;
  long t = 0;
};

GroupStats group_stats(const std::vector<double>& rewards, bool sample_std);

/// Group-normalized advantages A_i = (R_i - mu) / (sigma + eps). All-equal
/// reward groups return exact zeros; otherwise the last element closes the
/// group to an exactly zero left-to-right sum.
std::vector<double> group_advantages(const std::vector<double>& rewards,
                                     double eps_adv, bool sample_std = false);

double clipped_surrogate_term(double ratio, double advantage, double eps_clip);

/// KL over one step's full distributions; errors if q has a zero where p is
/// positive.
double kl_divergence(const std::vector<double>& p, const std::vector<double>& q);

/// Exact KL along the sampled 2-step prefix.
double exact_kl(const std::array<std::vector<double>, 2>& pi_theta_dists,
                const std::array<std::vector<double>, 2>& pi_ref_dists);

Group collect_group(const PolicySnapshot& pi_old, const Sample& sample_view,
                    const TrainConfig& cfg, const RewardWeights& rw,
                    RngStream& rng);

struct LossInfo {
  double loss = 0.0;              // negated objective
  std::vector<double> grad;       // flat, same layout as PolicyParams
  double mean_kl = 0.0;
  double clip_active_frac = 0.0;  // fraction of surrogate terms on the clipped branch
};

/// Clipped-surrogate objective with KL-to-reference penalty over all groups;
/// advantages and old log-probs are treated as constants.
LossInfo grpo_loss_and_grad(const PolicyParams& pi_theta,
                            const PolicySnapshot& pi_ref,
                            const std::vector<Group>& groups,
                            const TrainConfig& cfg);

/// Scales the gradient to max_norm if its global L2 norm exceeds it.
/// Returns the pre-clip norm.
double clip_grad_norm(std::vector<double>& grad, double max_norm);

void adamw_step(PolicyParams& params, const std::vector<double>& grad,
                OptimizerState& state, const TrainConfig& cfg);

using CheckpointHook =
    std::function<void(int iteration, const PolicyParams& params)>;

struct TrainResult {
  PolicyParams init_params;
  PolicyParams final_params;
  std::vector<MetricsRecord> metrics;
};

/// Full GRPO training run on the given corruption view of the train set.
/// Deterministic in cfg.seed; pi_ref is frozen at the initial parameters.
TrainResult train(const Dataset& train_set, const Dataset& test_set,
                  CorruptionKind kind, const TrainConfig& cfg,
                  const RewardWeights& rw, std::uint64_t eval_seed,
                  const CheckpointHook& hook = {});

}  // namespace mmgrpo
