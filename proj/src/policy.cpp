#include "mmgrpo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "mmgrpo/numfmt.hpp"
#include <json.hpp>

namespace mmgrpo {

ParamLayout::ParamLayout(const PolicyDims& d) {
  int off = 0;
  auto take = [&off](int n) { int o = off; off += n; return o; };
  text_emb = take(d.text_vocab * d.embed_dim);
  vis_w = take(d.visual_dim * d.embed_dim);
  vis_b = take(d.embed_dim);
  step_emb = take(d.seq_len * d.embed_dim);
  prev_emb = take((d.scratch_vocab + 1) * d.embed_dim);
  hid_w = take(d.input_dim() * d.hidden_dim);
  hid_b = take(d.hidden_dim);
  scr_w = take(d.hidden_dim * d.scratch_vocab);
  scr_b = take(d.scratch_vocab);
  ans_w = take(d.hidden_dim * d.answer_vocab);
  ans_b = take(d.answer_vocab);
  total = off;
}

int PolicyDims::param_count() const { return ParamLayout(*this).total; }

PolicyParams zero_params(const PolicyDims& dims) {
  return PolicyParams{dims, std::vector<double>(dims.param_count(), 0.0)};
}

PolicyParams init_params(const PolicyDims& dims, std::uint64_t seed) {
  PolicyParams p = zero_params(dims);
  const ParamLayout L(dims);
  RngStream rng = RngStream::keyed(seed, {salt::kParamInit});

  // Weight matrices get U[-s, s] with s = sqrt(1/fan_in); biases stay zero.
  auto fill = [&](int off, int fan_in, int count) {
    const double s = std::sqrt(1.0 / fan_in);
    for (int i = 0; i < count; ++i) p.flat[off + i] = rng.uniform(-s, s);
  };
  fill(L.text_emb, dims.text_vocab, dims.text_vocab * dims.embed_dim);
  fill(L.vis_w, dims.visual_dim, dims.visual_dim * dims.embed_dim);
  fill(L.step_emb, dims.seq_len, dims.seq_len * dims.embed_dim);
  fill(L.prev_emb, dims.scratch_vocab + 1,
       (dims.scratch_vocab + 1) * dims.embed_dim);
  fill(L.hid_w, dims.input_dim(), dims.input_dim() * dims.hidden_dim);
  fill(L.scr_w, dims.hidden_dim, dims.hidden_dim * dims.scratch_vocab);
  fill(L.ans_w, dims.hidden_dim, dims.hidden_dim * dims.answer_vocab);
  return p;
}

namespace {

struct StepTrace {
  std::vector<double> input;   // [3*embed]
  std::vector<double> hidden;  // tanh activations
  std::vector<double> logits;
};

StepTrace run_step(const PolicyParams& p, const Sample& in, int step,
                   int prev_token) {
  const PolicyDims& d = p.dims;
  const ParamLayout L(d);
  if (step < 0 || step >= d.seq_len) throw std::invalid_argument("bad step");
  const int prev_vocab = d.scratch_vocab + 1;
  if (prev_token < 0 || prev_token >= prev_vocab) {
    throw std::invalid_argument("prev_token out of range");
  }
  for (int tok : in.text_tokens) {
    if (tok < 0 || tok >= d.text_vocab) {
      throw std::invalid_argument("text token out of range");
    }
  }

  const int ed = d.embed_dim;
  StepTrace tr;
  tr.input.assign(d.input_dim(), 0.0);

  // [0, ed): mean of text-token embeddings.
  for (int t = 0; t < kTextLen; ++t) {
    const double* row = &p.flat[L.text_emb + in.text_tokens[t] * ed];
    for (int e = 0; e < ed; ++e) tr.input[e] += row[e];
  }
  for (int e = 0; e < ed; ++e) tr.input[e] *= 0.25;

  // [ed, 2ed): projected visual vector + bias + step embedding.
  for (int v = 0; v < d.visual_dim; ++v) {
    const double x = in.visual_vec[v];
    if (x == 0.0) continue;
    const double* row = &p.flat[L.vis_w + v * ed];
    for (int e = 0; e < ed; ++e) tr.input[ed + e] += x * row[e];
  }
  for (int e = 0; e < ed; ++e) {
    tr.input[ed + e] += p.flat[L.vis_b + e] + p.flat[L.step_emb + step * ed + e];
  }

  // [2ed, 3ed): previous-token embedding.
  for (int e = 0; e < ed; ++e) {
    tr.input[2 * ed + e] = p.flat[L.prev_emb + prev_token * ed + e];
  }

  tr.hidden.assign(d.hidden_dim, 0.0);
  for (int i = 0; i < d.input_dim(); ++i) {
    const double x = tr.input[i];
    if (x == 0.0) continue;
    const double* row = &p.flat[L.hid_w + i * d.hidden_dim];
    for (int h = 0; h < d.hidden_dim; ++h) tr.hidden[h] += x * row[h];
  }
  for (int h = 0; h < d.hidden_dim; ++h) {
    tr.hidden[h] = std::tanh(tr.hidden[h] + p.flat[L.hid_b + h]);
  }

  const int head_w = (step == 0) ? L.scr_w : L.ans_w;
  const int head_b = (step == 0) ? L.scr_b : L.ans_b;
  const int vocab = (step == 0) ? d.scratch_vocab : d.answer_vocab;
  tr.logits.assign(vocab, 0.0);
  for (int h = 0; h < d.hidden_dim; ++h) {
    const double a = tr.hidden[h];
    const double* row = &p.flat[head_w + h * vocab];
    for (int k = 0; k < vocab; ++k) tr.logits[k] += a * row[k];
  }
  for (int k = 0; k < vocab; ++k) tr.logits[k] += p.flat[head_b + k];
  return tr;
}

int argmax_lowest_tie(const std::vector<double>& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

int sample_from_logits(const std::vector<double>& logits, double temperature,
                       RngStream& rng) {
  std::vector<double> scaled(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) scaled[i] = logits[i] / temperature;
  const std::vector<double> probs = softmax(scaled);
  const double u = rng.next_double();
  double cum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cum += probs[i];
    if (u < cum) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace

std::vector<double> softmax(const std::vector<double>& logits) {
  std::vector<double> lp = log_softmax(logits);
  for (double& v : lp) v = std::exp(v);
  return lp;
}

std::vector<double> log_softmax(const std::vector<double>& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

std::vector<double> forward_step(const PolicyParams& p, const Sample& input,
                                 int step, int prev_token) {
  return run_step(p, input, step, prev_token).logits;
}

SeqLogprob sequence_logprob(const PolicyParams& p, const Sample& input,
                            int scratch_token, int answer_token) {
  const PolicyDims& d = p.dims;
  if (scratch_token < 0 || scratch_token >= d.scratch_vocab) {
    throw std::invalid_argument("scratch_token out of range");
  }
  if (answer_token < 0 || answer_token >= d.answer_vocab) {
    throw std::invalid_argument("answer_token out of range");
  }
  SeqLogprob out;
  const int tokens[2] = {scratch_token, answer_token};
  const int prevs[2] = {kBosToken, scratch_token + 1};
  for (int step = 0; step < 2; ++step) {
    StepTrace tr = run_step(p, input, step, prevs[step]);
    out.logprobs[step] = log_softmax(tr.logits);
    out.probs[step].resize(tr.logits.size());
    for (std::size_t i = 0; i < tr.logits.size(); ++i) {
      out.probs[step][i] = std::exp(out.logprobs[step][i]);
    }
    out.per_token[step] = out.logprobs[step][tokens[step]];
  }
  out.sum = out.per_token[0] + out.per_token[1];
  return out;
}

Trajectory sample_trajectory(const PolicyParams& p, const Sample& input,
                             double temperature, RngStream& rng) {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
  Trajectory traj;
  traj.scratch_token =
      sample_from_logits(run_step(p, input, 0, kBosToken).logits, temperature, rng);
  traj.answer_token = sample_from_logits(
      run_step(p, input, 1, traj.scratch_token + 1).logits, temperature, rng);
  // Recorded log-probs come from the same temperature-1 path the optimizer
  // uses, so the consistency contract holds bitwise.
  const SeqLogprob lp =
      sequence_logprob(p, input, traj.scratch_token, traj.answer_token);
  traj.logprob_per_token = lp.per_token;
  traj.logprob_sum = lp.sum;
  return traj;
}

Trajectory greedy_decode(const PolicyParams& p, const Sample& input) {
  Trajectory traj;
  traj.scratch_token = argmax_lowest_tie(run_step(p, input, 0, kBosToken).logits);
  traj.answer_token =
      argmax_lowest_tie(run_step(p, input, 1, traj.scratch_token + 1).logits);
  const SeqLogprob lp =
      sequence_logprob(p, input, traj.scratch_token, traj.answer_token);
  traj.logprob_per_token = lp.per_token;
  traj.logprob_sum = lp.sum;
  return traj;
}

void accumulate_logit_grads(const PolicyParams& p, const Sample& in,
                            int scratch_token,
                            const std::array<std::vector<double>, 2>& dlogits,
                            std::vector<double>& grad) {
  const PolicyDims& d = p.dims;
  const ParamLayout L(d);
  if (static_cast<int>(grad.size()) != L.total) {
    throw std::invalid_argument("gradient buffer has wrong size");
  }
  const int ed = d.embed_dim;
  const int prevs[2] = {kBosToken, scratch_token + 1};

  for (int step = 0; step < 2; ++step) {
    const std::vector<double>& dz = dlogits[step];
    if (dz.empty()) continue;
    const int vocab = (step == 0) ? d.scratch_vocab : d.answer_vocab;
    if (static_cast<int>(dz.size()) != vocab) {
      throw std::invalid_argument("dlogits size mismatch");
    }
    const StepTrace tr = run_step(p, in, step, prevs[step]);

    const int head_w = (step == 0) ? L.scr_w : L.ans_w;
    const int head_b = (step == 0) ? L.scr_b : L.ans_b;

    std::vector<double> dhid(d.hidden_dim, 0.0);
    for (int h = 0; h < d.hidden_dim; ++h) {
      const double a = tr.hidden[h];
      double acc = 0.0;
      double* wrow = &grad[head_w + h * vocab];
      const double* prow = &p.flat[head_w + h * vocab];
      for (int k = 0; k < vocab; ++k) {
        wrow[k] += a * dz[k];
        acc += prow[k] * dz[k];
      }
      dhid[h] = acc;
    }
    for (int k = 0; k < vocab; ++k) grad[head_b + k] += dz[k];

    // tanh'
    std::vector<double> dpre(d.hidden_dim);
    for (int h = 0; h < d.hidden_dim; ++h) {
      dpre[h] = dhid[h] * (1.0 - tr.hidden[h] * tr.hidden[h]);
    }

    std::vector<double> dinput(d.input_dim(), 0.0);
    for (int i = 0; i < d.input_dim(); ++i) {
      const double x = tr.input[i];
      double* wrow = &grad[L.hid_w + i * d.hidden_dim];
      const double* prow = &p.flat[L.hid_w + i * d.hidden_dim];
      double acc = 0.0;
      for (int h = 0; h < d.hidden_dim; ++h) {
        wrow[h] += x * dpre[h];
        acc += prow[h] * dpre[h];
      }
      dinput[i] = acc;
    }
    for (int h = 0; h < d.hidden_dim; ++h) grad[L.hid_b + h] += dpre[h];

    // Mean-pooled text embeddings: each token row receives dinput/4.
    for (int t = 0; t < kTextLen; ++t) {
      double* row = &grad[L.text_emb + in.text_tokens[t] * ed];
      for (int e = 0; e < ed; ++e) row[e] += 0.25 * dinput[e];
    }
    // Visual projection, bias and step embedding.
    for (int v = 0; v < d.visual_dim; ++v) {
      const double x = in.visual_vec[v];
      if (x == 0.0) continue;
      double* row = &grad[L.vis_w + v * ed];
      for (int e = 0; e < ed; ++e) row[e] += x * dinput[ed + e];
    }
    for (int e = 0; e < ed; ++e) {
      grad[L.vis_b + e] += dinput[ed + e];
      grad[L.step_emb + step * ed + e] += dinput[ed + e];
    }
    // Previous-token embedding.
    double* prow = &grad[L.prev_emb + prevs[step] * ed];
    for (int e = 0; e < ed; ++e) prow[e] += dinput[2 * ed + e];
  }
}

PolicyParams backward(const PolicyParams& p, const Sample& input,
                      int scratch_token, int answer_token,
                      const std::array<double, 2>& upstream_weight_per_token) {
  const SeqLogprob lp = sequence_logprob(p, input, scratch_token, answer_token);
  const int toks[2] = {scratch_token, answer_token};

  std::array<std::vector<double>, 2> dlogits;
  for (int step = 0; step < 2; ++step) {
    const double w = upstream_weight_per_token[step];
    if (w == 0.0) continue;
    dlogits[step].assign(lp.probs[step].size(), 0.0);
    // d/dz of w*log softmax(z)[k] = w*(onehot(k) - p)
    for (std::size_t v = 0; v < lp.probs[step].size(); ++v) {
      dlogits[step][v] = -w * lp.probs[step][v];
    }
    dlogits[step][toks[step]] += w;
  }

  PolicyParams grad = zero_params(p.dims);
  accumulate_logit_grads(p, input, scratch_token, dlogits, grad.flat);
  return grad;
}

void save_checkpoint(const PolicyParams& p, std::uint64_t seed,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  nlohmann::ordered_json dims;
  dims["text_vocab"] = p.dims.text_vocab;
  dims["embed_dim"] = p.dims.embed_dim;
  dims["visual_dim"] = p.dims.visual_dim;
  dims["hidden_dim"] = p.dims.hidden_dim;
  dims["scratch_vocab"] = p.dims.scratch_vocab;
  dims["answer_vocab"] = p.dims.answer_vocab;
  dims["seq_len"] = p.dims.seq_len;
  nlohmann::ordered_json header;
  header["dims"] = dims;
  header["seed"] = seed;
  header["format"] = "f64-flat-v1";
  out << header.dump() << '\n';
  out << '[';
  for (std::size_t i = 0; i < p.flat.size(); ++i) {
    if (i) out << ", ";
    out << fmt_g17(p.flat[i]);
  }
  out << "]\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

PolicyParams load_checkpoint(const std::string& path, std::uint64_t* seed_out) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for read: " + path);
  std::string header_line;
  if (!std::getline(in, header_line)) {
    throw std::runtime_error("checkpoint missing header: " + path);
  }
  nlohmann::json header = nlohmann::json::parse(header_line);
  if (header.at("format").get<std::string>() != "f64-flat-v1") {
    throw std::runtime_error("unsupported checkpoint format in " + path);
  }
  const auto& dj = header.at("dims");
  PolicyDims dims;
  dims.text_vocab = dj.at("text_vocab").get<int>();
  dims.embed_dim = dj.at("embed_dim").get<int>();
  dims.visual_dim = dj.at("visual_dim").get<int>();
  dims.hidden_dim = dj.at("hidden_dim").get<int>();
  dims.scratch_vocab = dj.at("scratch_vocab").get<int>();
  dims.answer_vocab = dj.at("answer_vocab").get<int>();
  dims.seq_len = dj.at("seq_len").get<int>();
  if (seed_out) *seed_out = header.at("seed").get<std::uint64_t>();

  nlohmann::json arr = nlohmann::json::parse(in);
  if (!arr.is_array() ||
      static_cast<int>(arr.size()) != dims.param_count()) {
    throw std::runtime_error("checkpoint parameter count mismatch in " + path);
  }
  PolicyParams p = zero_params(dims);
  for (std::size_t i = 0; i < arr.size(); ++i) p.flat[i] = arr[i].get<double>();
  for (double v : p.flat) {
    if (!std::isfinite(v)) {
      throw std::runtime_error("checkpoint contains non-finite value in " + path);
    }
  }
  return p;
}

}  // namespace mmgrpo
