// mmgrpo command-line entry point: dataset generation, corruption,
// GRPO training, single-checkpoint evaluation and the S1-S8 matrix.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include "mmgrpo/commands.hpp"
#include <CLI11.hpp>

namespace {

mmgrpo::RunConfig load_or_default(const std::string& config_path) {
  if (config_path.empty()) return mmgrpo::RunConfig{};
  return mmgrpo::load_run_config(config_path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GRPO training sandbox for a synthetic two-modality reasoning "
               "task with modality-corruption diagnostics"};
  app.require_subcommand(1);

  std::string config_path, in_path, out_path, manifest_path;
  std::string train_path, test_path, out_dir;
  std::string normal_ckpt, hallu_ckpt, ckpt_path;
  std::string kind_str = "none";
  std::uint64_t seed = 0, eval_seed = 1234;
  int iterations = -1;

  auto* gen = app.add_subcommand("gen", "generate train/test JSONL splits");
  gen->add_option("--config", config_path, "run config JSON");
  gen->add_option("--out-dir", out_dir, "output directory (overrides config)");

  auto* corrupt = app.add_subcommand("corrupt", "apply a modality corruption");
  corrupt->add_option("--kind", kind_str, "bi|ri|tr|none")->required();
  corrupt->add_option("--seed", seed, "corruption seed");
  corrupt->add_option("--in", in_path, "input dataset JSONL")->required();
  corrupt->add_option("--out", out_path, "output dataset JSONL")->required();
  corrupt->add_option("--manifest", manifest_path, "manifest JSON")->required();

  auto* train = app.add_subcommand("train", "run GRPO training");
  train->add_option("--config", config_path, "run config JSON");
  train->add_option("--data", train_path, "training dataset JSONL")->required();
  train->add_option("--test", test_path, "test dataset JSONL")->required();
  train->add_option("--corrupt", kind_str, "training corruption: none|bi|ri|tr");
  train->add_option("--out-dir", out_dir, "output directory (overrides config)");
  train->add_option("--iterations", iterations, "override train.iterations");

  auto* matrix = app.add_subcommand("matrix", "emit the S1-S8 evaluation matrix");
  matrix->add_option("--normal-ckpt", normal_ckpt, "normally trained checkpoint")->required();
  matrix->add_option("--hallu-ckpt", hallu_ckpt, "hallucination-trained checkpoint")->required();
  matrix->add_option("--train", train_path, "train split JSONL")->required();
  matrix->add_option("--test", test_path, "test split JSONL")->required();
  matrix->add_option("--kind", kind_str, "bi|ri|tr")->required();
  matrix->add_option("--eval-seed", eval_seed, "corruption seed for S3/S4/S7/S8");
  matrix->add_option("--out", out_path, "also write matrix JSON here");

  auto* eval = app.add_subcommand("eval", "single-checkpoint accuracy");
  eval->add_option("--ckpt", ckpt_path, "checkpoint JSON")->required();
  eval->add_option("--data", train_path, "dataset JSONL")->required();
  eval->add_option("--kind", kind_str, "none|bi|ri|tr");
  eval->add_option("--eval-seed", eval_seed, "corruption seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << e.what() << "\n";
    return 1;
  }

  try {
    if (gen->parsed()) {
      mmgrpo::RunConfig cfg = load_or_default(config_path);
      if (!out_dir.empty()) cfg.out_dir = out_dir;
      const auto [n_train, n_test] = mmgrpo::cmd_gen(cfg);
      std::cout << "wrote " << n_train << " train and " << n_test
                << " test records to " << cfg.out_dir << "\n";
    } else if (corrupt->parsed()) {
      mmgrpo::cmd_corrupt(mmgrpo::corruption_kind_from_string(kind_str), seed,
                          in_path, out_path, manifest_path);
      std::cout << "wrote " << out_path << " and " << manifest_path << "\n";
    } else if (train->parsed()) {
      mmgrpo::RunConfig cfg = load_or_default(config_path);
      if (!out_dir.empty()) cfg.out_dir = out_dir;
      if (iterations >= 0) cfg.train.iterations = iterations;
      mmgrpo::cmd_train(cfg, train_path, test_path,
                        mmgrpo::corruption_kind_from_string(kind_str), cfg.out_dir);
      std::cout << "training artifacts written to " << cfg.out_dir << "\n";
    } else if (matrix->parsed()) {
      const mmgrpo::EvalMatrix m = mmgrpo::cmd_matrix(
          normal_ckpt, hallu_ckpt, train_path, test_path,
          mmgrpo::corruption_kind_from_string(kind_str), eval_seed, out_path);
      std::cout << mmgrpo::eval_matrix_json(m);
    } else if (eval->parsed()) {
      const mmgrpo::AccuracyReport rep = mmgrpo::cmd_eval(
          ckpt_path, train_path, mmgrpo::corruption_kind_from_string(kind_str),
          eval_seed);
      std::printf("overall %.6f  per-category [%.6f, %.6f, %.6f]\n", rep.overall,
                  rep.per_category[0], rep.per_category[1], rep.per_category[2]);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
