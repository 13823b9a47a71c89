#pragma once

#include <cstdint>
#include <string>

#include "mmgrpo/config.hpp"
#include "mmgrpo/corruption.hpp"
#include "mmgrpo/diagnostics.hpp"

namespace mmgrpo {

/// Generates train/test splits and writes train.jsonl, test.jsonl and
/// resolved-config.json into cfg.out_dir. Returns the sample counts.
std::pair<int, int> cmd_gen(const RunConfig& cfg);

/// Applies a corruption to a JSONL dataset; writes the corrupted dataset and
/// the manifest.
void cmd_corrupt(CorruptionKind kind, std::uint64_t seed,
                 const std::string& in_path, const std::string& out_path,
                 const std::string& manifest_path);

/// Full training run. Writes checkpoint-init.json, periodic
/// checkpoint-NNNN.json files, checkpoint-final.json, metrics.jsonl and
/// resolved-config.json into out_dir.
void cmd_train(const RunConfig& cfg, const std::string& train_path,
               const std::string& test_path, CorruptionKind kind,
               const std::string& out_dir);

EvalMatrix cmd_matrix(const std::string& normal_ckpt, const std::string& hallu_ckpt,
                      const std::string& train_path, const std::string& test_path,
                      CorruptionKind kind, std::uint64_t eval_seed,
                      const std::string& out_path = {});

std::string eval_matrix_json(const EvalMatrix& m);

AccuracyReport cmd_eval(const std::string& ckpt_path, const std::string& data_path,
                        CorruptionKind kind, std::uint64_t eval_seed);

}  // namespace mmgrpo
