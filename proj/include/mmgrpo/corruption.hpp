#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>

#include "mmgrpo/dataset.hpp"

namespace mmgrpo {

enum class CorruptionKind { None, BI, RI, TR };

std::string corruption_kind_to_string(CorruptionKind k);
CorruptionKind corruption_kind_from_string(const std::string& s);

struct CorruptionManifest {
  CorruptionKind kind = CorruptionKind::None;
  std::uint64_t seed = 0;
  std::map<std::int64_t, std::int64_t> donor;  // RI only, donor[i] != i
};

/// Applies one modality-specific corruption as a deterministic transform.
/// BI zeroes the visual channel, RI swaps in a non-self donor's visual
/// vector, TR replaces the text with the TEMPLATE/MASK fallback. Ids,
/// categories, answers and specs are never touched.
std::pair<Dataset, CorruptionManifest> apply_corruption(const Dataset& ds,
                                                        CorruptionKind kind,
                                                        std::uint64_t seed);

/// Reconstructs the corrupted dataset from the original plus a manifest.
Dataset replay_manifest(const Dataset& ds, const CorruptionManifest& m);

/// Whether the post-corruption input still determines the answer.
/// RI on Redundant is labeled unsolvable: the mismatched image conflicts
/// with the text, so a correct answer is not grounded in consistent input.
bool solvable_after(const Sample& sample, CorruptionKind kind);

void save_manifest(const CorruptionManifest& m, const std::string& path);
CorruptionManifest load_manifest(const std::string& path);

}  // namespace mmgrpo
