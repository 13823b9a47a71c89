#include "mmgrpo/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace mmgrpo {

std::string ratio_level_to_string(RatioLevel rl) {
  return rl == RatioLevel::Sequence ? "sequence" : "token";
}

RatioLevel ratio_level_from_string(const std::string& s) {
  if (s == "sequence") return RatioLevel::Sequence;
  if (s == "token") return RatioLevel::Token;
  throw std::invalid_argument("train.ratio_level: unknown value \"" + s + "\"");
}

void validate(const RunConfig& cfg) {
  validate(cfg.gen);
  validate(cfg.train);
  validate(cfg.reward);
  if (cfg.out_dir.empty()) throw std::invalid_argument("out_dir must be nonempty");
  if (cfg.checkpoint_every < 1) {
    throw std::invalid_argument("checkpoint_every must be >= 1");
  }
}

namespace {

using nlohmann::json;

template <typename T>
void read_field(const json& j, const std::string& section, const std::string& key,
                T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(section + key + ": wrong type");
  }
}

void reject_unknown(const json& j, const std::string& section,
                    std::initializer_list<const char*> known) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || (key == k);
    if (!ok) throw std::invalid_argument(section + key + ": unknown field");
  }
}

}  // namespace

RunConfig run_config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: malformed JSON (") + e.what() + ")");
  }
  reject_unknown(j, "", {"gen", "train", "reward", "eval_seed", "out_dir",
                         "checkpoint_every"});

  RunConfig cfg;
  if (j.contains("gen")) {
    const json& g = j.at("gen");
    reject_unknown(g, "gen.", {"n_train", "n_test", "frac_text_sufficient",
                               "frac_vision_required", "frac_redundant", "seed"});
    read_field(g, "gen.", "n_train", cfg.gen.n_train);
    read_field(g, "gen.", "n_test", cfg.gen.n_test);
    read_field(g, "gen.", "frac_text_sufficient", cfg.gen.frac_text_sufficient);
    read_field(g, "gen.", "frac_vision_required", cfg.gen.frac_vision_required);
    read_field(g, "gen.", "frac_redundant", cfg.gen.frac_redundant);
    read_field(g, "gen.", "seed", cfg.gen.seed);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    reject_unknown(t, "train.",
                   {"group_size", "temperature", "eps_adv", "eps_clip", "beta",
                    "lr", "weight_decay", "adam_beta1", "adam_beta2", "adam_eps",
                    "max_grad_norm", "batch_prompts", "inner_epochs", "iterations",
                    "ratio_level", "sample_std", "seed"});
    read_field(t, "train.", "group_size", cfg.train.group_size);
    read_field(t, "train.", "temperature", cfg.train.temperature);
    read_field(t, "train.", "eps_adv", cfg.train.eps_adv);
    read_field(t, "train.", "eps_clip", cfg.train.eps_clip);
    read_field(t, "train.", "beta", cfg.train.beta);
    read_field(t, "train.", "lr", cfg.train.lr);
    read_field(t, "train.", "weight_decay", cfg.train.weight_decay);
    read_field(t, "train.", "adam_beta1", cfg.train.adam_beta1);
    read_field(t, "train.", "adam_beta2", cfg.train.adam_beta2);
    read_field(t, "train.", "adam_eps", cfg.train.adam_eps);
    read_field(t, "train.", "max_grad_norm", cfg.train.max_grad_norm);
    read_field(t, "train.", "batch_prompts", cfg.train.batch_prompts);
    read_field(t, "train.", "inner_epochs", cfg.train.inner_epochs);
    read_field(t, "train.", "iterations", cfg.train.iterations);
    if (t.contains("ratio_level")) {
      cfg.train.ratio_level =
          ratio_level_from_string(t.at("ratio_level").get<std::string>());
    }
    read_field(t, "train.", "sample_std", cfg.train.sample_std);
    read_field(t, "train.", "seed", cfg.train.seed);
  }
  if (j.contains("reward")) {
    const json& r = j.at("reward");
    reject_unknown(r, "reward.", {"w_correct", "w_format"});
    read_field(r, "reward.", "w_correct", cfg.reward.w_correct);
    read_field(r, "reward.", "w_format", cfg.reward.w_format);
  }
  read_field(j, "", "eval_seed", cfg.eval_seed);
  read_field(j, "", "out_dir", cfg.out_dir);
  read_field(j, "", "checkpoint_every", cfg.checkpoint_every);

  validate(cfg);
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return run_config_from_json_text(buf.str());
}

std::string resolved_config_text(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["gen"] = {{"n_train", cfg.gen.n_train},
              {"n_test", cfg.gen.n_test},
              {"frac_text_sufficient", cfg.gen.frac_text_sufficient},
              {"frac_vision_required", cfg.gen.frac_vision_required},
              {"frac_redundant", cfg.gen.frac_redundant},
              {"seed", cfg.gen.seed}};
  j["train"] = {{"group_size", cfg.train.group_size},
                {"temperature", cfg.train.temperature},
                {"eps_adv", cfg.train.eps_adv},
                {"eps_clip", cfg.train.eps_clip},
                {"beta", cfg.train.beta},
                {"lr", cfg.train.lr},
                {"weight_decay", cfg.train.weight_decay},
                {"adam_beta1", cfg.train.adam_beta1},
                {"adam_beta2", cfg.train.adam_beta2},
                {"adam_eps", cfg.train.adam_eps},
                {"max_grad_norm", cfg.train.max_grad_norm},
                {"batch_prompts", cfg.train.batch_prompts},
                {"inner_epochs", cfg.train.inner_epochs},
                {"iterations", cfg.train.iterations},
                {"ratio_level", ratio_level_to_string(cfg.train.ratio_level)},
                {"sample_std", cfg.train.sample_std},
                {"seed", cfg.train.seed}};
  j["reward"] = {{"w_correct", cfg.reward.w_correct},
                 {"w_format", cfg.reward.w_format}};
  j["eval_seed"] = cfg.eval_seed;
  j["out_dir"] = cfg.out_dir;
  j["checkpoint_every"] = cfg.checkpoint_every;
  return j.dump(2) + "\n";
}

}  // namespace mmgrpo
