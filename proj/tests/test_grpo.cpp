#include <doctest.h>

#include <cmath>

#include "mmgrpo/grpo.hpp"
#include "test_util.hpp"

using namespace mmgrpo;

namespace {

Dataset tiny_dataset(int n, std::uint64_t seed = 0) {
  GenConfig cfg;
  cfg.n_train = n;
  cfg.n_test = std::max(4, n / 4);
  cfg.seed = seed;
  return generate_dataset(cfg).first;
}

std::pair<Dataset, Dataset> tiny_splits(int n_train, int n_test,
                                        std::uint64_t seed = 0) {
  GenConfig cfg;
  cfg.n_train = n_train;
  cfg.n_test = n_test;
  cfg.seed = seed;
  return generate_dataset(cfg);
}

}  // namespace

TEST_CASE("group advantages match the hand-derived oracle values") {
  const std::vector<double> a = group_advantages({1, 0, 0, 0, 0}, 1e-4);
  CHECK(std::abs(a[0] - 1.9995001249687576) < 1e-9);
  for (int i = 1; i < 5; ++i) CHECK(std::abs(a[i] + 0.4998750312421894) < 1e-9);

  const std::vector<double> b = group_advantages({1, 1, 0, 0, 0}, 1e-4);
  CHECK(std::abs(b[0] - 1.2244949224122108) < 1e-9);
  CHECK(std::abs(b[1] - 1.2244949224122108) < 1e-9);
  for (int i = 2; i < 5; ++i) CHECK(std::abs(b[i] + 0.8163299482748072) < 1e-9);
}

TEST_CASE("group advantages: all-equal groups are exactly zero") {
  for (double r : {0.0, 0.1, 1.0}) {
    for (double a : group_advantages({r, r, r, r, r}, 1e-4)) CHECK(a == 0.0);
  }
}

TEST_CASE("group advantages sum to exactly zero in rollout order") {
  RngStream rng = RngStream::keyed(31, {0});
  for (int trial = 0; trial < 1000; ++trial) {
    const int g = 2 + rng.uniform_int(7);
    std::vector<double> rewards(g);
    for (double& r : rewards) {
      const int kind = rng.uniform_int(4);
      r = kind == 0 ? 0.0 : kind == 1 ? 0.1 : kind == 2 ? 0.9 : 1.0;
    }
    const std::vector<double> adv = group_advantages(rewards, 1e-4);
    double sum = 0.0;
    for (double a : adv) sum += a;
    CHECK(sum == 0.0);
    // monotone affine map preserves the argmax
    int amax_r = 0, amax_a = 0;
    for (int i = 1; i < g; ++i) {
      if (rewards[i] > rewards[amax_r]) amax_r = i;
      if (adv[i] > adv[amax_a]) amax_a = i;
    }
    CHECK(rewards[amax_a] == rewards[amax_r]);
  }
}

TEST_CASE("group advantages: std is sigma/(sigma+eps)") {
  const std::vector<double> rewards = {1, 0.1, 0.1, 1, 0.1};
  const GroupStats st = group_stats(rewards, false);
  const std::vector<double> adv = group_advantages(rewards, 1e-4);
  double ss = 0.0;
  for (double a : adv) ss += a * a;
  const double adv_std = std::sqrt(ss / adv.size());
  CHECK(adv_std ==
        doctest::Approx(st.sigma_group / (st.sigma_group + 1e-4)).epsilon(1e-9));
  CHECK(adv_std < 1.0);
}

TEST_CASE("group advantages are affine-covariant at eps = 0") {
  RngStream rng = RngStream::keyed(32, {0});
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> rewards(5);
    for (double& r : rewards) r = rng.uniform(0.0, 1.0);
    const std::vector<double> base = group_advantages(rewards, 0.0);

    // power-of-two scaling commutes with every FP operation involved
    std::vector<double> scaled(rewards);
    for (double& r : scaled) r *= 4.0;
    CHECK(group_advantages(scaled, 0.0) == base);

    std::vector<double> affine(rewards);
    const double c = rng.uniform(0.5, 3.0), d = rng.uniform(-1.0, 1.0);
    for (double& r : affine) r = c * r + d;
    const std::vector<double> got = group_advantages(affine, 0.0);
    for (int i = 0; i < 5; ++i) CHECK(std::abs(got[i] - base[i]) < 1e-10);
  }
}

TEST_CASE("clipped surrogate term") {
  CHECK(clipped_surrogate_term(1.0, 2.5, 0.2) == 2.5);
  CHECK(clipped_surrogate_term(1.5, 1.0, 0.2) == doctest::Approx(1.2).epsilon(1e-15));
  CHECK(clipped_surrogate_term(0.5, -1.0, 0.2) == doctest::Approx(-0.8).epsilon(1e-15));
}

TEST_CASE("exact KL") {
  CHECK(kl_divergence({0.3, 0.7}, {0.3, 0.7}) == 0.0);
  CHECK(std::abs(kl_divergence({0.75, 0.25}, {0.5, 0.5}) - 0.13081203594113697) < 1e-6);
  CHECK_THROWS_AS(kl_divergence({0.5, 0.5}, {1.0, 0.0}), std::domain_error);

  RngStream rng = RngStream::keyed(33, {0});
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + rng.uniform_int(18);
    std::vector<double> p(n), q(n);
    double ps = 0.0, qs = 0.0;
    for (int i = 0; i < n; ++i) {
      p[i] = rng.uniform(1e-3, 1.0);
      q[i] = rng.uniform(1e-3, 1.0);
      ps += p[i];
      qs += q[i];
    }
    for (int i = 0; i < n; ++i) {
      p[i] /= ps;
      q[i] /= qs;
    }
    CHECK(kl_divergence(p, q) >= -1e-12);
  }
}

TEST_CASE("collect_group basics") {
  const Dataset ds = tiny_dataset(8);
  const TrainConfig cfg;
  const RewardWeights rw;
  const PolicySnapshot pi_old = init_params({}, 1);

  RngStream rng1 = RngStream::keyed(50, {0});
  const Group g = collect_group(pi_old, ds.samples[3], cfg, rw, rng1);
  CHECK(g.rollouts.size() == 5);
  for (const Rollout& r : g.rollouts) {
    CHECK(r.sample_id == ds.samples[3].id);
    CHECK(r.old_logprob_sum == r.trajectory.logprob_sum);
  }

  RngStream rng2 = RngStream::keyed(50, {0});
  const Group g2 = collect_group(pi_old, ds.samples[3], cfg, rw, rng2);
  for (std::size_t i = 0; i < g.rollouts.size(); ++i) {
    CHECK(g.rollouts[i].trajectory.scratch_token == g2.rollouts[i].trajectory.scratch_token);
    CHECK(g.rollouts[i].trajectory.answer_token == g2.rollouts[i].trajectory.answer_token);
    CHECK(g.rollouts[i].reward == g2.rollouts[i].reward);
  }
}

TEST_CASE("collect_group with a forced-correct policy gives all rewards 1") {
  const Dataset ds = tiny_dataset(4);
  const Sample& s = ds.samples[0];
  PolicyParams forced = zero_params({});
  const ParamLayout L(forced.dims);
  forced.flat[L.ans_b + s.answer_token] = 50.0;  // overwhelming bias
  const TrainConfig cfg;
  const RewardWeights rw;
  RngStream rng = RngStream::keyed(51, {0});
  const Group g = collect_group(forced, s, cfg, rw, rng);
  for (const Rollout& r : g.rollouts) CHECK(r.reward == doctest::Approx(1.0));
}

namespace {

std::vector<Group> collect_batch(const PolicyParams& pi_old, const Dataset& ds,
                                 const TrainConfig& cfg, const RewardWeights& rw,
                                 int n_prompts, std::uint64_t seed) {
  std::vector<Group> groups;
  for (int i = 0; i < n_prompts; ++i) {
    RngStream rng = RngStream::keyed(seed, {static_cast<std::uint64_t>(i)});
    Group g = collect_group(pi_old, ds.samples[i % ds.samples.size()], cfg, rw, rng);
    std::vector<double> rewards;
    for (const Rollout& r : g.rollouts) rewards.push_back(r.reward);
    const std::vector<double> adv = group_advantages(rewards, cfg.eps_adv);
    for (std::size_t k = 0; k < adv.size(); ++k) g.rollouts[k].advantage = adv[k];
    groups.push_back(std::move(g));
  }
  return groups;
}

}  // namespace

TEST_CASE("on-policy identities: zero loss, inactive clipping") {
  const Dataset ds = tiny_dataset(16);
  TrainConfig cfg;
  const RewardWeights rw;
  const PolicyParams theta = init_params({}, 3);
  const std::vector<Group> groups = collect_batch(theta, ds, cfg, rw, 8, 52);

  for (RatioLevel rl : {RatioLevel::Sequence, RatioLevel::Token}) {
    cfg.ratio_level = rl;
    const LossInfo info = grpo_loss_and_grad(theta, theta, groups, cfg);
    CHECK(info.loss == 0.0);
    CHECK(info.clip_active_frac == 0.0);
    CHECK(info.mean_kl == 0.0);
  }
}

TEST_CASE("all-equal rewards leave only the KL gradient") {
  const Dataset ds = tiny_dataset(8);
  TrainConfig cfg;
  cfg.beta = 0.0;
  const RewardWeights rw;
  const PolicyParams theta = init_params({}, 4);
  std::vector<Group> groups = collect_batch(theta, ds, cfg, rw, 4, 53);
  for (Group& g : groups) {
    for (Rollout& r : g.rollouts) {
      r.reward = 0.1;
      r.advantage = 0.0;
    }
  }
  const LossInfo info = grpo_loss_and_grad(theta, init_params({}, 5), groups, cfg);
  for (double v : info.grad) CHECK(v == 0.0);
}

TEST_CASE("clipped terms contribute exactly zero gradient") {
  const Dataset ds = tiny_dataset(4);
  TrainConfig cfg;
  cfg.beta = 0.0;
  const RewardWeights rw;
  const PolicyParams theta = init_params({}, 6);

  Group g;
  g.prompt = ds.samples[0];
  Rollout r;
  r.sample_id = g.prompt.id;
  r.trajectory = greedy_decode(theta, g.prompt);
  // synthetic old log-probs force r = 1.5 > 1 + eps_clip with A > 0
  r.old_logprob_sum = r.trajectory.logprob_sum - std::log(1.5);
  r.old_logprob_per_token = {r.trajectory.logprob_per_token[0] - 0.5 * std::log(1.5),
                             r.trajectory.logprob_per_token[1] - 0.5 * std::log(1.5)};
  r.advantage = 1.0;
  Rollout r2 = r;  // second rollout carries zero advantage
  r2.advantage = 0.0;
  g.rollouts = {r, r2};

  for (RatioLevel rl : {RatioLevel::Sequence, RatioLevel::Token}) {
    cfg.ratio_level = rl;
    const LossInfo info = grpo_loss_and_grad(theta, theta, {g}, cfg);
    CHECK(info.clip_active_frac > 0.0);
    for (double v : info.grad) CHECK(v == 0.0);
  }
}

TEST_CASE("loss gradient matches finite differences in both ratio modes") {
  const double h = 1e-4;
  const Dataset ds = tiny_dataset(8, 9);
  const RewardWeights rw;

  for (RatioLevel rl : {RatioLevel::Sequence, RatioLevel::Token}) {
    TrainConfig cfg;
    cfg.ratio_level = rl;
    cfg.group_size = 3;
    PolicyParams theta = init_params({}, 7);
    const PolicyParams ref = init_params({}, 8);
    std::vector<Group> groups = collect_batch(theta, ds, cfg, rw, 2, 54);
    // desynchronize old log-probs so ratios leave 1 and some terms clip
    RngStream rng = RngStream::keyed(55, {static_cast<std::uint64_t>(rl)});
    for (Group& g : groups) {
      for (Rollout& r : g.rollouts) {
        const double shift = rng.uniform(-0.4, 0.4);
        r.old_logprob_sum = r.trajectory.logprob_sum - shift;
        r.old_logprob_per_token = {r.trajectory.logprob_per_token[0] - 0.5 * shift,
                                   r.trajectory.logprob_per_token[1] - 0.5 * shift};
        r.advantage = rng.uniform(-1.5, 1.5);
      }
    }

    const LossInfo info = grpo_loss_and_grad(theta, ref, groups, cfg);
    double worst = 0.0;
    for (int i = 0; i < theta.dims.param_count(); i += 5) {
      const double saved = theta.flat[i];
      theta.flat[i] = saved + h;
      const double up = grpo_loss_and_grad(theta, ref, groups, cfg).loss;
      theta.flat[i] = saved - h;
      const double down = grpo_loss_and_grad(theta, ref, groups, cfg).loss;
      theta.flat[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double denom = std::max({std::abs(fd), std::abs(info.grad[i]), 1e-6});
      worst = std::max(worst, std::abs(fd - info.grad[i]) / denom);
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("clip_grad_norm") {
  std::vector<double> g = {0.3, 0.4};  // norm 0.5
  CHECK(clip_grad_norm(g, 1.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(g == std::vector<double>{0.3, 0.4});

  g = {0.0, 4.0};
  CHECK(clip_grad_norm(g, 1.0) == doctest::Approx(4.0).epsilon(1e-15));
  double ss = 0.0;
  for (double v : g) ss += v * v;
  CHECK(std::abs(std::sqrt(ss) - 1.0) < 1e-12);

  g = {0.0, 0.0};
  CHECK(clip_grad_norm(g, 1.0) == 0.0);
  CHECK(g == std::vector<double>{0.0, 0.0});
}

TEST_CASE("adamw step") {
  TrainConfig cfg;
  PolicyDims dims;
  dims.text_vocab = 1;
  dims.embed_dim = 1;
  dims.visual_dim = 1;
  dims.hidden_dim = 1;
  dims.scratch_vocab = 1;
  dims.answer_vocab = 1;

  SUBCASE("zero grad, zero weight decay leaves params unchanged") {
    cfg.weight_decay = 0.0;
    PolicyParams p = zero_params(dims);
    for (double& v : p.flat) v = 0.7;
    const std::vector<double> before = p.flat;
    OptimizerState st;
    adamw_step(p, std::vector<double>(p.flat.size(), 0.0), st, cfg);
    CHECK(p.flat == before);
    CHECK(st.t == 1);
  }

  SUBCASE("zero grad with decay scales by (1 - lr*wd)") {
    PolicyParams p = zero_params(dims);
    for (double& v : p.flat) v = 0.7;
    OptimizerState st;
    adamw_step(p, std::vector<double>(p.flat.size(), 0.0), st, cfg);
    for (double v : p.flat) {
      CHECK(v == doctest::Approx(0.7 * (1.0 - 1e-5)).epsilon(1e-14));
    }
  }

  SUBCASE("first step with unit gradient") {
    cfg.weight_decay = 0.0;
    PolicyParams p = zero_params(dims);
    OptimizerState st;
    std::vector<double> g(p.flat.size(), 1.0);
    adamw_step(p, g, st, cfg);
    // bias-corrected mhat = vhat = 1 at t = 1
    for (double v : p.flat) {
      CHECK(v == doctest::Approx(-cfg.lr / (1.0 + cfg.adam_eps)).epsilon(1e-12));
    }
  }
}

TEST_CASE("train with zero iterations returns the initial parameters") {
  const auto [train_set, test_set] = tiny_splits(16, 8);
  TrainConfig cfg;
  cfg.iterations = 0;
  const RewardWeights rw;
  const TrainResult res =
      train(train_set, test_set, CorruptionKind::None, cfg, rw, 1);
  CHECK(res.final_params.flat == res.init_params.flat);
  CHECK(res.final_params.flat == init_params({}, cfg.seed).flat);
  CHECK(res.metrics.empty());
}

TEST_CASE("train is bitwise deterministic") {
  const auto [train_set, test_set] = tiny_splits(24, 8);
  TrainConfig cfg;
  cfg.iterations = 4;
  cfg.batch_prompts = 6;
  const RewardWeights rw;
  const TrainResult a = train(train_set, test_set, CorruptionKind::RI, cfg, rw, 1);
  const TrainResult b = train(train_set, test_set, CorruptionKind::RI, cfg, rw, 1);
  CHECK(a.final_params.flat == b.final_params.flat);
  REQUIRE(a.metrics.size() == b.metrics.size());
  for (std::size_t i = 0; i < a.metrics.size(); ++i) {
    CHECK(metrics_to_jsonl(a.metrics[i]) == metrics_to_jsonl(b.metrics[i]));
  }
  // first on-policy inner step never clips
  CHECK(a.metrics[0].clip_active_frac == 0.0);
}

TEST_CASE("Monte-Carlo expected reward matches exact trajectory enumeration") {
  const Dataset ds = tiny_dataset(5, 11);
  const PolicyParams p = init_params({}, 12);
  const RewardWeights rw;
  const double temperature = 0.7;

  double exact_mean = 0.0, exact_var = 0.0;
  const int n_prompts = 5;
  for (int i = 0; i < n_prompts; ++i) {
    const Sample& s = ds.samples[i];
    const std::vector<double> p0 = softmax([&] {
      std::vector<double> l = forward_step(p, s, 0, kBosToken);
      for (double& v : l) v /= temperature;
      return l;
    }());
    double m1 = 0.0, m2 = 0.0;
    for (int scratch = 0; scratch < 8; ++scratch) {
      const std::vector<double> p1 = softmax([&] {
        std::vector<double> l = forward_step(p, s, 1, scratch + 1);
        for (double& v : l) v /= temperature;
        return l;
      }());
      for (int answer = 0; answer < 19; ++answer) {
        Trajectory t;
        t.scratch_token = scratch;
        t.answer_token = answer;
        const double prob = p0[scratch] * p1[answer];
        const double r = total_reward(t, s, rw);
        m1 += prob * r;
        m2 += prob * r * r;
      }
    }
    exact_mean += m1 / n_prompts;
    exact_var += (m2 - m1 * m1) / (n_prompts * n_prompts);
  }

  const int draws_per_prompt = 2000;
  double mc = 0.0;
  for (int i = 0; i < n_prompts; ++i) {
    RngStream rng = RngStream::keyed(77, {static_cast<std::uint64_t>(i)});
    for (int k = 0; k < draws_per_prompt; ++k) {
      const Trajectory t = sample_trajectory(p, ds.samples[i], temperature, rng);
      mc += total_reward(t, ds.samples[i], rw);
    }
  }
  mc /= n_prompts * draws_per_prompt;
  const double sigma = std::sqrt(exact_var / draws_per_prompt);
  CHECK(std::abs(mc - exact_mean) <= 3.0 * sigma);
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  cfg.group_size = 1;
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.eps_clip = 1.0;
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.inner_epochs = 0;
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
}
