#include "mmgrpo/diagnostics.hpp"

#include <fstream>
#include <stdexcept>

#include "mmgrpo/numfmt.hpp"
#include <json.hpp>

namespace mmgrpo {

AccuracyReport evaluate_accuracy(const AnswerFn& answer, const Dataset& ds,
                                 CorruptionKind kind, std::uint64_t seed) {
  if (ds.samples.empty()) throw std::invalid_argument("evaluate: empty dataset");
  const Dataset* view = &ds;
  Dataset corrupted;
  if (kind != CorruptionKind::None) {
    corrupted = apply_corruption(ds, kind, seed).first;
    view = &corrupted;
  }

  AccuracyReport rep;
  std::array<int, 3> hits{};
  for (const Sample& s : view->samples) {
    const int cat = static_cast<int>(s.category);
    ++rep.category_counts[cat];
    if (answer(s) == s.answer_token) ++hits[cat];
  }
  int total_hits = 0, total = 0;
  for (int c = 0; c < 3; ++c) {
    rep.per_category[c] =
        rep.category_counts[c] ? static_cast<double>(hits[c]) / rep.category_counts[c]
                               : 0.0;
    total_hits += hits[c];
    total += rep.category_counts[c];
  }
  rep.overall = static_cast<double>(total_hits) / total;
  return rep;
}

AccuracyReport evaluate_accuracy(const PolicyParams& params, const Dataset& ds,
                                 CorruptionKind kind, std::uint64_t seed) {
  return evaluate_accuracy(
      [&params](const Sample& s) { return greedy_decode(params, s).answer_token; },
      ds, kind, seed);
}

EvalMatrix build_eval_matrix(const PolicyParams& params_normal,
                             const PolicyParams& params_hallu,
                             const Dataset& train_set, const Dataset& test_set,
                             CorruptionKind kind, std::uint64_t eval_seed) {
  if (!(params_normal.dims == params_hallu.dims)) {
    throw std::invalid_argument("matrix: checkpoint dims mismatch");
  }
  // The same eval_seed is used for S3/S7 and S4/S8, so both models see
  // identical corrupted data. With kind None the corrupted cells collapse
  // onto the clean ones.
  EvalMatrix m;
  m.kind = kind;
  m.s1 = evaluate_accuracy(params_normal, train_set, CorruptionKind::None, 0).overall;
  m.s2 = evaluate_accuracy(params_normal, test_set, CorruptionKind::None, 0).overall;
  m.s3 = evaluate_accuracy(params_normal, train_set, kind, eval_seed).overall;
  m.s4 = evaluate_accuracy(params_normal, test_set, kind, eval_seed).overall;
  m.s5 = evaluate_accuracy(params_hallu, train_set, CorruptionKind::None, 0).overall;
  m.s6 = evaluate_accuracy(params_hallu, test_set, CorruptionKind::None, 0).overall;
  m.s7 = evaluate_accuracy(params_hallu, train_set, kind, eval_seed).overall;
  m.s8 = evaluate_accuracy(params_hallu, test_set, kind, eval_seed).overall;
  return m;
}

HalluRewardRate hallucination_reward_rate(const std::vector<Group>& groups,
                                          CorruptionKind kind) {
  long total = 0, positive = 0;
  for (const Group& g : groups) {
    if (solvable_after(g.prompt, kind)) continue;
    for (const Rollout& r : g.rollouts) {
      ++total;
      if (r.trajectory.answer_token == g.prompt.answer_token) ++positive;
    }
  }
  if (total == 0) return {0.0, true};
  return {static_cast<double>(positive) / total, false};
}

std::string metrics_to_jsonl(const MetricsRecord& r) {
  nlohmann::ordered_json j;
  j["iteration"] = r.iteration;
  j["mean_reward"] = r.mean_reward;
  j["mean_correctness"] = r.mean_correctness;
  j["frac_positive_groups"] = r.frac_positive_groups;
  j["hallu_reward_rate"] = r.hallu_reward_rate;
  j["exact_kl_mean"] = r.exact_kl_mean;
  j["grad_norm_preclip"] = r.grad_norm_preclip;
  j["clip_active_frac"] = r.clip_active_frac;
  j["accuracy_clean_test"] = r.accuracy_clean_test;
  j["accuracy_corrupted_test"] = r.accuracy_corrupted_test;
  j["per_category_clean"] = r.per_category_clean;
  j["per_category_corrupted"] = r.per_category_corrupted;
  return j.dump();
}

void write_metrics(const std::vector<MetricsRecord>& records,
                   const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  for (const MetricsRecord& r : records) out << metrics_to_jsonl(r) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<MetricsRecord> read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for read: " + path);
  std::vector<MetricsRecord> records;
  std::string line;
  int line_no = 0;
  int last_iteration = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": malformed JSON (" + e.what() + ")");
    }
    MetricsRecord r;
    try {
      r.iteration = j.at("iteration").get<int>();
      r.mean_reward = j.at("mean_reward").get<double>();
      r.mean_correctness = j.at("mean_correctness").get<double>();
      r.frac_positive_groups = j.at("frac_positive_groups").get<double>();
      r.hallu_reward_rate = j.at("hallu_reward_rate").get<double>();
      r.exact_kl_mean = j.at("exact_kl_mean").get<double>();
      r.grad_norm_preclip = j.at("grad_norm_preclip").get<double>();
      r.clip_active_frac = j.at("clip_active_frac").get<double>();
      r.accuracy_clean_test = j.at("accuracy_clean_test").get<double>();
      r.accuracy_corrupted_test = j.at("accuracy_corrupted_test").get<double>();
      r.per_category_clean = j.at("per_category_clean").get<std::array<double, 3>>();
      r.per_category_corrupted =
          j.at("per_category_corrupted").get<std::array<double, 3>>();
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": bad record (" + e.what() + ")");
    }
    if (r.iteration <= last_iteration) {
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": iteration not strictly increasing");
    }
    last_iteration = r.iteration;
    records.push_back(r);
  }
  return records;
}

}  // namespace mmgrpo
