#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mmgrpo/dataset.hpp"
#include "mmgrpo/rng.hpp"

namespace mmgrpo {

struct PolicyDims {
  int text_vocab = tokens::kTextVocab;
  int embed_dim = 16;
  int visual_dim = kVisualDim;
  int hidden_dim = 32;
  int scratch_vocab = 8;
  int answer_vocab = kAnswerVocab;
  int seq_len = 2;

  int input_dim() const { return 3 * embed_dim; }
  int param_count() const;
  bool operator==(const PolicyDims&) const = default;
};

/// Offsets of each parameter block inside the flat vector. Block order is
/// the checkpoint order and must not change.
struct ParamLayout {
  int text_emb;   // [text_vocab x embed_dim]
  int vis_w;      // [visual_dim x embed_dim]
  int vis_b;      // [embed_dim]
  int step_emb;   // [seq_len x embed_dim]
  int prev_emb;   // [(scratch_vocab+1) x embed_dim], row 0 = BOS
  int hid_w;      // [3*embed_dim x hidden_dim]
  int hid_b;      // [hidden_dim]
  int scr_w;      // [hidden_dim x scratch_vocab]
  int scr_b;      // [scratch_vocab]
  int ans_w;      // [hidden_dim x answer_vocab]
  int ans_b;      // [answer_vocab]
  int total;
  explicit ParamLayout(const PolicyDims& d);
};

struct PolicyParams {
  PolicyDims dims;
  std::vector<double> flat;
};

/// Frozen copies (pi_ref, pi_old) are plain value copies that callers
/// simply never mutate.
using PolicySnapshot = PolicyParams;

struct Trajectory {
  int scratch_token = 0;
  int answer_token = 0;
  std::array<double, 2> logprob_per_token{};  // temperature-1 log-softmax
  double logprob_sum = 0.0;
};

struct SeqLogprob {
  double sum = 0.0;
  std::array<double, 2> per_token{};
  std::array<std::vector<double>, 2> probs;     // full temp-1 distributions
  std::array<std::vector<double>, 2> logprobs;  // matching log-softmax values
};

PolicyParams zero_params(const PolicyDims& dims);
PolicyParams init_params(const PolicyDims& dims, std::uint64_t seed);

inline constexpr int kBosToken = 0;  // index into prev_emb; scratch s maps to s+1

/// Raw logits for one decode step. step 0 uses the scratch head, step 1 the
/// answer head; prev_token indexes prev_emb (BOS at step 0, scratch+1 at
/// step 1).
std::vector<double> forward_step(const PolicyParams& p, const Sample& input,
                                 int step, int prev_token);

Trajectory sample_trajectory(const PolicyParams& p, const Sample& input,
                             double temperature, RngStream& rng);

SeqLogprob sequence_logprob(const PolicyParams& p, const Sample& input,
                            int scratch_token, int answer_token);

/// Gradient of sum_t weight_t * log pi(token_t | prefix) w.r.t. the flat
/// parameters. Verified against central finite differences in tests.
PolicyParams backward(const PolicyParams& p, const Sample& input,
                      int scratch_token, int answer_token,
                      const std::array<double, 2>& upstream_weight_per_token);

/// Core reverse pass: accumulates the parameter gradient of the two decode
/// steps given arbitrary upstream gradients on the step logits.
void accumulate_logit_grads(const PolicyParams& p, const Sample& input,
                            int scratch_token,
                            const std::array<std::vector<double>, 2>& dlogits,
                            std::vector<double>& grad);

Trajectory greedy_decode(const PolicyParams& p, const Sample& input);

// Checkpoint: JSON header line, then one flat parameter array at 17
// significant digits. Round-trips bit-exactly.
void save_checkpoint(const PolicyParams& p, std::uint64_t seed,
                     const std::string& path);
PolicyParams load_checkpoint(const std::string& path,
                             std::uint64_t* seed_out = nullptr);

// Shared numerics.
std::vector<double> softmax(const std::vector<double>& logits);
std::vector<double> log_softmax(const std::vector<double>& logits);

}  // namespace mmgrpo
