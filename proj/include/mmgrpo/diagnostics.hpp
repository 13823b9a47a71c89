#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mmgrpo/corruption.hpp"
#include "mmgrpo/dataset.hpp"
#include "mmgrpo/policy.hpp"
#include "mmgrpo/rollout.hpp"

namespace mmgrpo {

/// The eight accuracies crossing {normal, hallucination-trained} x
/// {train, test} x {clean, corrupted}.
struct EvalMatrix {
  double s1 = 0, s2 = 0, s3 = 0, s4 = 0;  // normal model
  double s5 = 0, s6 = 0, s7 = 0, s8 = 0;  // hallucination-trained model
  CorruptionKind kind = CorruptionKind::BI;
};

struct MetricsRecord {
  int iteration = 0;
  double mean_reward = 0.0;
  double mean_correctness = 0.0;
  double frac_positive_groups = 0.0;
  double hallu_reward_rate = 0.0;
  double exact_kl_mean = 0.0;
  double grad_norm_preclip = 0.0;
  double clip_active_frac = 0.0;
  double accuracy_clean_test = 0.0;
  double accuracy_corrupted_test = 0.0;
  std::array<double, 3> per_category_clean{};
  std::array<double, 3> per_category_corrupted{};
};

struct AccuracyReport {
  double overall = 0.0;
  std::array<double, 3> per_category{};      // indexed by Category
  std::array<int, 3> category_counts{};
};

/// Answer predictor abstraction: evaluation runs greedy decoding for real
/// checkpoints; tests substitute oracle or uniform-random stubs.
using AnswerFn = std::function<int(const Sample&)>;

AccuracyReport evaluate_accuracy(const AnswerFn& answer, const Dataset& ds,
                                 CorruptionKind kind, std::uint64_t seed);
AccuracyReport evaluate_accuracy(const PolicyParams& params, const Dataset& ds,
                                 CorruptionKind kind, std::uint64_t seed);

EvalMatrix build_eval_matrix(const PolicyParams& params_normal,
                             const PolicyParams& params_hallu,
                             const Dataset& train_set, const Dataset& test_set,
                             CorruptionKind kind, std::uint64_t eval_seed);

struct HalluRewardRate {
  double rate = 0.0;
  bool undefined = false;  // no rollout landed on an unsolvable sample
};

/// Fraction of correctness-positive rollouts among rollouts on samples that
/// are unsolvable after the given corruption.
HalluRewardRate hallucination_reward_rate(const std::vector<Group>& groups,
                                          CorruptionKind kind);

std::string metrics_to_jsonl(const MetricsRecord& r);
void write_metrics(const std::vector<MetricsRecord>& records,
                   const std::string& path);
std::vector<MetricsRecord> read_metrics(const std::string& path);

}  // namespace mmgrpo
