#include "mmgrpo/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mmgrpo {

void validate(const TrainConfig& cfg) {
  if (cfg.group_size < 2) throw std::invalid_argument("train: group_size must be >= 2");
  if (!(cfg.temperature > 0.0)) throw std::invalid_argument("train: temperature must be > 0");
  if (!(cfg.eps_clip > 0.0 && cfg.eps_clip < 1.0)) {
    throw std::invalid_argument("train: eps_clip must be in (0,1)");
  }
  if (cfg.beta < 0.0) throw std::invalid_argument("train: beta must be >= 0");
  if (cfg.inner_epochs < 1) throw std::invalid_argument("train: inner_epochs must be >= 1");
  if (cfg.iterations < 0) throw std::invalid_argument("train: iterations must be >= 0");
  if (cfg.batch_prompts < 1) throw std::invalid_argument("train: batch_prompts must be >= 1");
  if (!(cfg.lr > 0.0)) throw std::invalid_argument("train: lr must be > 0");
  if (!(cfg.max_grad_norm > 0.0)) {
    throw std::invalid_argument("train: max_grad_norm must be > 0");
  }
  if (cfg.eps_adv < 0.0) throw std::invalid_argument("train: eps_adv must be >= 0");
}

GroupStats group_stats(const std::vector<double>& rewards, bool sample_std) {
  const int g = static_cast<int>(rewards.size());
  GroupStats st;
  st.mu_group = std::accumulate(rewards.begin(), rewards.end(), 0.0) / g;
  double ss = 0.0;
  for (double r : rewards) {
    const double d = r - st.mu_group;
    ss += d * d;
  }
  st.sigma_group = std::sqrt(ss / (sample_std ? g - 1 : g));
  return st;
}

std::vector<double> group_advantages(const std::vector<double>& rewards,
                                     double eps_adv, bool sample_std) {
  const int g = static_cast<int>(rewards.size());
  if (g < 2) throw std::invalid_argument("group_advantages: need G >= 2");

  const bool all_equal =
      std::all_of(rewards.begin(), rewards.end(),
                  [&](double r) { return r == rewards.front(); });
  if (all_equal) return std::vector<double>(g, 0.0);

  const GroupStats st = group_stats(rewards, sample_std);
  const double denom = st.sigma_group + eps_adv;
  std::vector<double> adv(g);
  double running = 0.0;
  for (int i = 0; i + 1 < g; ++i) {
    adv[i] = (rewards[i] - st.mu_group) / denom;
    running += adv[i];
  }
  // Close the group to an exactly zero left-to-right sum (last-ulp nudge);
  // the on-policy surrogate then vanishes identically.
  adv[g - 1] = -running;
  return adv;
}

double clipped_surrogate_term(double ratio, double advantage, double eps_clip) {
  const double clipped =
      std::clamp(ratio, 1.0 - eps_clip, 1.0 + eps_clip) * advantage;
  return std::min(ratio * advantage, clipped);
}

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl: size mismatch");
  double acc = 0.0;
  for (std::size_t v = 0; v < p.size(); ++v) {
    if (p[v] == 0.0) continue;
    if (q[v] <= 0.0) throw std::domain_error("kl: reference probability is zero");
    acc += p[v] * std::log(p[v] / q[v]);
  }
  return acc;
}

double exact_kl(const std::array<std::vector<double>, 2>& pi_theta_dists,
                const std::array<std::vector<double>, 2>& pi_ref_dists) {
  return kl_divergence(pi_theta_dists[0], pi_ref_dists[0]) +
         kl_divergence(pi_theta_dists[1], pi_ref_dists[1]);
}

Group collect_group(const PolicySnapshot& pi_old, const Sample& sample_view,
                    const TrainConfig& cfg, const RewardWeights& rw,
                    RngStream& rng) {
  Group group;
  group.prompt = sample_view;
  group.rollouts.reserve(cfg.group_size);
  for (int i = 0; i < cfg.group_size; ++i) {
    Rollout r;
    r.sample_id = sample_view.id;
    r.trajectory = sample_trajectory(pi_old, sample_view, cfg.temperature, rng);
    r.reward = total_reward(r.trajectory, sample_view, rw);
    r.old_logprob_per_token = r.trajectory.logprob_per_token;
    r.old_logprob_sum = r.trajectory.logprob_sum;
    group.rollouts.push_back(r);
  }
  return group;
}

LossInfo grpo_loss_and_grad(const PolicyParams& pi_theta,
                            const PolicySnapshot& pi_ref,
                            const std::vector<Group>& groups,
                            const TrainConfig& cfg) {
  if (groups.empty()) throw std::invalid_argument("grpo loss: no groups");

  long n_rollouts = 0;
  for (const Group& g : groups) n_rollouts += static_cast<long>(g.rollouts.size());
  const double inv_n = 1.0 / static_cast<double>(n_rollouts);

  LossInfo info;
  info.grad.assign(pi_theta.dims.param_count(), 0.0);

  double surrogate_sum = 0.0;
  double kl_sum = 0.0;
  long clip_terms = 0, total_terms = 0;

  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const Group& group = groups[gi];
    for (std::size_t ri = 0; ri < group.rollouts.size(); ++ri) {
      const Rollout& ro = group.rollouts[ri];
      const int scratch = ro.trajectory.scratch_token;
      const int answer = ro.trajectory.answer_token;
      const double a = ro.advantage;

      const SeqLogprob lp_theta = sequence_logprob(pi_theta, group.prompt, scratch, answer);
      const SeqLogprob lp_ref = sequence_logprob(pi_ref, group.prompt, scratch, answer);

      // Per-token upstream weights on d(log pi_theta); the min() selects the
      // unclipped branch on ties, so the clipped branch contributes zero
      // gradient.
      std::array<double, 2> w{0.0, 0.0};
      const int toks[2] = {scratch, answer};

      if (cfg.ratio_level == RatioLevel::Sequence) {
        const double r = std::exp(lp_theta.sum - ro.old_logprob_sum);
        const double unclipped = r * a;
        const double clipped =
            std::clamp(r, 1.0 - cfg.eps_clip, 1.0 + cfg.eps_clip) * a;
        ++total_terms;
        if (clipped < unclipped) {
          surrogate_sum += clipped;
          ++clip_terms;
        } else {
          surrogate_sum += unclipped;
          w[0] = unclipped;
          w[1] = unclipped;
        }
      } else {
        double term = 0.0;
        for (int t = 0; t < 2; ++t) {
          const double rt =
              std::exp(lp_theta.per_token[t] - ro.old_logprob_per_token[t]);
          const double unclipped = rt * a;
          const double clipped =
              std::clamp(rt, 1.0 - cfg.eps_clip, 1.0 + cfg.eps_clip) * a;
          ++total_terms;
          if (clipped < unclipped) {
            term += 0.5 * clipped;
            ++clip_terms;
          } else {
            term += 0.5 * unclipped;
            w[t] = 0.5 * unclipped;
          }
        }
        surrogate_sum += term;
      }

      std::array<double, 2> step_kl{};
      for (int t = 0; t < 2; ++t) {
        step_kl[t] = kl_divergence(lp_theta.probs[t], lp_ref.probs[t]);
      }
      kl_sum += step_kl[0] + step_kl[1];

      // d(loss)/d(logits): surrogate pulls the chosen tokens up weighted by
      // w_t; the KL term pushes pi_theta toward pi_ref.
      std::array<std::vector<double>, 2> dlogits;
      for (int t = 0; t < 2; ++t) {
        const std::vector<double>& p = lp_theta.probs[t];
        const std::vector<double>& logp = lp_theta.logprobs[t];
        const std::vector<double>& logq = lp_ref.logprobs[t];
        const bool want_surrogate = (w[t] != 0.0);
        const bool want_kl = (cfg.beta != 0.0);
        if (!want_surrogate && !want_kl) continue;
        dlogits[t].assign(p.size(), 0.0);
        for (std::size_t v = 0; v < p.size(); ++v) {
          double dz = 0.0;
          if (want_surrogate) dz -= inv_n * w[t] * (-p[v]);
          if (want_kl) {
            dz += cfg.beta * inv_n * p[v] * (logp[v] - logq[v] - step_kl[t]);
          }
          dlogits[t][v] = dz;
        }
        if (want_surrogate) {
          dlogits[t][toks[t]] -= inv_n * w[t];
        }
      }
      accumulate_logit_grads(pi_theta, group.prompt, scratch, dlogits, info.grad);
    }
  }

  info.loss = -(surrogate_sum * inv_n - cfg.beta * kl_sum * inv_n);
  info.mean_kl = kl_sum * inv_n;
  info.clip_active_frac =
      static_cast<double>(clip_terms) / static_cast<double>(total_terms);

  if (!std::isfinite(info.loss)) {
    throw std::runtime_error("grpo loss: non-finite loss value");
  }
  return info;
}

double clip_grad_norm(std::vector<double>& grad, double max_norm) {
  if (!(max_norm > 0.0)) throw std::invalid_argument("clip: max_norm must be > 0");
  double ss = 0.0;
  for (double g : grad) ss += g * g;
  const double norm = std::sqrt(ss);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (double& g : grad) g *= scale;
  }
  return norm;
}

void adamw_step(PolicyParams& params, const std::vector<double>& grad,
                OptimizerState& state, const TrainConfig& cfg) {
  const std::size_t n = params.flat.size();
  if (grad.size() != n) throw std::invalid_argument("adamw: shape mismatch");
  if (state.m.empty()) {
    state.m.assign(n, 0.0);
    state.v.assign(n, 0.0);
  }
  ++state.t;
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < n; ++i) {
    state.m[i] = cfg.adam_beta1 * state.m[i] + (1.0 - cfg.adam_beta1) * grad[i];
    state.v[i] = cfg.adam_beta2 * state.v[i] + (1.0 - cfg.adam_beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params.flat[i] -= cfg.lr * (mhat / (std::sqrt(vhat) + cfg.adam_eps)) +
                      cfg.lr * cfg.weight_decay * params.flat[i];
  }
}

namespace {

std::vector<int> shuffled_order(int n, std::uint64_t seed, std::uint64_t pass) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  RngStream rng = RngStream::keyed(seed, {salt::kPromptOrder, pass});
  for (int i = n - 1; i > 0; --i) {
    std::swap(order[i], order[rng.uniform_int(i + 1)]);
  }
  return order;
}

}  // namespace

TrainResult train(const Dataset& train_set, const Dataset& test_set,
                  CorruptionKind kind, const TrainConfig& cfg,
                  const RewardWeights& rw, std::uint64_t eval_seed,
                  const CheckpointHook& hook) {
  validate(cfg);
  validate(rw);
  if (train_set.samples.empty() || test_set.samples.empty()) {
    throw std::invalid_argument("train: empty dataset");
  }

  const PolicyDims dims;
  PolicyParams theta = init_params(dims, cfg.seed);
  const PolicySnapshot pi_ref = theta;  // frozen for the whole run

  const Dataset train_view =
      (kind == CorruptionKind::None)
          ? train_set
          : apply_corruption(train_set, kind, cfg.seed).first;
  const int n_train = static_cast<int>(train_view.samples.size());

  TrainResult result;
  result.init_params = theta;

  std::vector<int> order;
  int cursor = 0;
  std::uint64_t pass = 0;

  OptimizerState opt;

  for (int it = 0; it < cfg.iterations; ++it) {
    const PolicySnapshot pi_old = theta;

    // Cyclic shuffled prompt order, reshuffled each full pass.
    std::vector<const Sample*> batch;
    batch.reserve(cfg.batch_prompts);
    for (int b = 0; b < cfg.batch_prompts; ++b) {
      if (cursor == 0) order = shuffled_order(n_train, cfg.seed, pass++);
      batch.push_back(&train_view.samples[order[cursor]]);
      cursor = (cursor + 1) % n_train;
    }

    std::vector<Group> groups;
    groups.reserve(batch.size());
    for (const Sample* prompt : batch) {
      RngStream rng = RngStream::keyed(
          cfg.seed, {salt::kRollout, static_cast<std::uint64_t>(it),
                     static_cast<std::uint64_t>(prompt->id)});
      groups.push_back(collect_group(pi_old, *prompt, cfg, rw, rng));
    }
    for (Group& g : groups) {
      std::vector<double> rewards;
      rewards.reserve(g.rollouts.size());
      for (const Rollout& r : g.rollouts) rewards.push_back(r.reward);
      const std::vector<double> adv =
          group_advantages(rewards, cfg.eps_adv, cfg.sample_std);
      for (std::size_t i = 0; i < adv.size(); ++i) g.rollouts[i].advantage = adv[i];
    }

    MetricsRecord rec;
    rec.iteration = it;
    {
      long n = 0, correct = 0, positive_groups = 0;
      double reward_sum = 0.0;
      for (const Group& g : groups) {
        bool any_correct = false;
        for (const Rollout& r : g.rollouts) {
          ++n;
          reward_sum += r.reward;
          const bool ok = r.trajectory.answer_token == g.prompt.answer_token;
          correct += ok;
          any_correct = any_correct || ok;
        }
        positive_groups += any_correct;
      }
      rec.mean_reward = reward_sum / n;
      rec.mean_correctness = static_cast<double>(correct) / n;
      rec.frac_positive_groups =
          static_cast<double>(positive_groups) / static_cast<double>(groups.size());
      rec.hallu_reward_rate = hallucination_reward_rate(groups, kind).rate;
    }

    for (int k = 0; k < cfg.inner_epochs; ++k) {
      LossInfo info;
      try {
        info = grpo_loss_and_grad(theta, pi_ref, groups, cfg);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("iteration " + std::to_string(it) + ": " + e.what());
      }
      const double preclip = clip_grad_norm(info.grad, cfg.max_grad_norm);
      adamw_step(theta, info.grad, opt, cfg);
      if (k == 0) {
        rec.exact_kl_mean = info.mean_kl;
        rec.grad_norm_preclip = preclip;
        rec.clip_active_frac = info.clip_active_frac;
      }
    }

    const AccuracyReport clean =
        evaluate_accuracy(theta, test_set, CorruptionKind::None, 0);
    const AccuracyReport corrupted =
        evaluate_accuracy(theta, test_set, kind, eval_seed);
    rec.accuracy_clean_test = clean.overall;
    rec.accuracy_corrupted_test = corrupted.overall;
    rec.per_category_clean = clean.per_category;
    rec.per_category_corrupted = corrupted.per_category;
    result.metrics.push_back(rec);

    if (hook) hook(it, theta);
  }

  result.final_params = std::move(theta);
  return result;
}

}  // namespace mmgrpo
