#include "mmgrpo/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mmgrpo/grpo.hpp"
#include <json.hpp>

namespace mmgrpo {

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace

std::pair<int, int> cmd_gen(const RunConfig& cfg) {
  validate(cfg);
  std::filesystem::create_directories(cfg.out_dir);
  const auto [train_set, test_set] = generate_dataset(cfg.gen);
  save_jsonl(train_set, cfg.out_dir + "/train.jsonl");
  save_jsonl(test_set, cfg.out_dir + "/test.jsonl");
  write_text(cfg.out_dir + "/resolved-config.json", resolved_config_text(cfg));
  return {static_cast<int>(train_set.samples.size()),
          static_cast<int>(test_set.samples.size())};
}

void cmd_corrupt(CorruptionKind kind, std::uint64_t seed,
                 const std::string& in_path, const std::string& out_path,
                 const std::string& manifest_path) {
  const Dataset ds = load_jsonl(in_path);
  auto [corrupted, manifest] = apply_corruption(ds, kind, seed);
  save_jsonl(corrupted, out_path);
  save_manifest(manifest, manifest_path);
}

void cmd_train(const RunConfig& cfg, const std::string& train_path,
               const std::string& test_path, CorruptionKind kind,
               const std::string& out_dir) {
  validate(cfg);
  std::filesystem::create_directories(out_dir);
  const Dataset train_set = load_jsonl(train_path);
  const Dataset test_set = load_jsonl(test_path);

  const PolicyDims dims;
  save_checkpoint(init_params(dims, cfg.train.seed), cfg.train.seed,
                  out_dir + "/checkpoint-init.json");

  const CheckpointHook hook = [&](int iteration, const PolicyParams& params) {
    if ((iteration + 1) % cfg.checkpoint_every == 0) {
      char name[64];
      std::snprintf(name, sizeof(name), "/checkpoint-%06d.json", iteration + 1);
      save_checkpoint(params, cfg.train.seed, out_dir + name);
    }
  };

  const TrainResult result =
      train(train_set, test_set, kind, cfg.train, cfg.reward, cfg.eval_seed, hook);

  save_checkpoint(result.final_params, cfg.train.seed,
                  out_dir + "/checkpoint-final.json");
  write_metrics(result.metrics, out_dir + "/metrics.jsonl");
  write_text(out_dir + "/resolved-config.json", resolved_config_text(cfg));
}

std::string eval_matrix_json(const EvalMatrix& m) {
  nlohmann::ordered_json j;
  j["kind"] = corruption_kind_to_string(m.kind);
  j["s1"] = m.s1;
  j["s2"] = m.s2;
  j["s3"] = m.s3;
  j["s4"] = m.s4;
  j["s5"] = m.s5;
  j["s6"] = m.s6;
  j["s7"] = m.s7;
  j["s8"] = m.s8;
  return j.dump(2) + "\n";
}

EvalMatrix cmd_matrix(const std::string& normal_ckpt, const std::string& hallu_ckpt,
                      const std::string& train_path, const std::string& test_path,
                      CorruptionKind kind, std::uint64_t eval_seed,
                      const std::string& out_path) {
  const PolicyParams normal = load_checkpoint(normal_ckpt);
  const PolicyParams hallu = load_checkpoint(hallu_ckpt);
  const Dataset train_set = load_jsonl(train_path);
  const Dataset test_set = load_jsonl(test_path);
  const EvalMatrix m =
      build_eval_matrix(normal, hallu, train_set, test_set, kind, eval_seed);
  if (!out_path.empty()) write_text(out_path, eval_matrix_json(m));
  return m;
}

AccuracyReport cmd_eval(const std::string& ckpt_path, const std::string& data_path,
                        CorruptionKind kind, std::uint64_t eval_seed) {
  const PolicyParams params = load_checkpoint(ckpt_path);
  const Dataset ds = load_jsonl(data_path);
  return evaluate_accuracy(params, ds, kind, eval_seed);
}

}  // namespace mmgrpo
