#include "mmgrpo/corruption.hpp"

#include <fstream>
#include <stdexcept>

#include "mmgrpo/rng.hpp"
#include <json.hpp>

namespace mmgrpo {

std::string corruption_kind_to_string(CorruptionKind k) {
  switch (k) {
    case CorruptionKind::None: return "none";
    case CorruptionKind::BI: return "bi";
    case CorruptionKind::RI: return "ri";
    case CorruptionKind::TR: return "tr";
  }
  throw std::invalid_argument("invalid corruption kind");
}

CorruptionKind corruption_kind_from_string(const std::string& s) {
  if (s == "none") return CorruptionKind::None;
  if (s == "bi") return CorruptionKind::BI;
  if (s == "ri") return CorruptionKind::RI;
  if (s == "tr") return CorruptionKind::TR;
  throw std::invalid_argument("unknown corruption kind \"" + s + "\"");
}

namespace {

void corrupt_in_place(Dataset& out, const Dataset& original,
                      const CorruptionManifest& m) {
  const std::size_t n = out.samples.size();
  switch (m.kind) {
    case CorruptionKind::None:
      break;
    case CorruptionKind::BI:
      for (Sample& s : out.samples) s.visual_vec.fill(0.0);
      break;
    case CorruptionKind::RI:
      for (std::size_t i = 0; i < n; ++i) {
        Sample& s = out.samples[i];
        auto it = m.donor.find(s.id);
        if (it == m.donor.end()) {
          throw std::runtime_error("RI manifest missing donor for id " +
                                   std::to_string(s.id));
        }
        const std::int64_t d = it->second;
        if (d < 0 || d >= static_cast<std::int64_t>(n) || d == s.id) {
          throw std::runtime_error("RI manifest donor invalid for id " +
                                   std::to_string(s.id));
        }
        s.visual_vec = original.samples[static_cast<std::size_t>(d)].visual_vec;
      }
      break;
    case CorruptionKind::TR:
      for (Sample& s : out.samples) {
        s.text_tokens = {tokens::kTemplate, tokens::kMask, tokens::kMask,
                         tokens::kMask};
      }
      break;
  }
}

}  // namespace

std::pair<Dataset, CorruptionManifest> apply_corruption(const Dataset& ds,
                                                        CorruptionKind kind,
                                                        std::uint64_t seed) {
  if (ds.samples.empty()) throw std::invalid_argument("corruption: empty dataset");
  const auto n = static_cast<std::int64_t>(ds.samples.size());

  CorruptionManifest m;
  m.kind = kind;
  m.seed = seed;
  if (kind == CorruptionKind::RI) {
    if (n < 2) throw std::invalid_argument("RI needs at least 2 samples");
    for (const Sample& s : ds.samples) {
      // Per-sample stream keyed by id, so donor draws are order-independent.
      RngStream rng = RngStream::keyed(
          seed, {salt::kRiDonor, static_cast<std::uint64_t>(s.id)});
      std::int64_t d = rng.uniform_int(static_cast<int>(n) - 1);
      if (d >= s.id) ++d;  // uniform over {0..n-1} \ {id}
      m.donor[s.id] = d;
    }
  }

  Dataset out = ds;
  corrupt_in_place(out, ds, m);
  return {std::move(out), std::move(m)};
}

Dataset replay_manifest(const Dataset& ds, const CorruptionManifest& m) {
  Dataset out = ds;
  corrupt_in_place(out, ds, m);
  return out;
}

bool solvable_after(const Sample& sample, CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::None:
      return true;
    case CorruptionKind::BI:
      return sample.category == Category::TextSufficient ||
             sample.category == Category::Redundant;
    case CorruptionKind::TR:
      return sample.category == Category::VisionRequired ||
             sample.category == Category::Redundant;
    case CorruptionKind::RI:
      return sample.category == Category::TextSufficient;
  }
  throw std::invalid_argument("invalid corruption kind");
}

void save_manifest(const CorruptionManifest& m, const std::string& path) {
  nlohmann::ordered_json j;
  j["kind"] = corruption_kind_to_string(m.kind);
  j["seed"] = m.seed;
  if (m.kind == CorruptionKind::RI) {
    nlohmann::ordered_json donors = nlohmann::ordered_json::object();
    for (const auto& [id, d] : m.donor) donors[std::to_string(id)] = d;
    j["donor"] = donors;
  } else {
    j["donor"] = nullptr;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << j.dump(2) << '\n';
}

CorruptionManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for read: " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  CorruptionManifest m;
  m.kind = corruption_kind_from_string(j.at("kind").get<std::string>());
  m.seed = j.at("seed").get<std::uint64_t>();
  if (!j.at("donor").is_null()) {
    for (const auto& [key, value] : j.at("donor").items()) {
      m.donor[std::stoll(key)] = value.get<std::int64_t>();
    }
  }
  return m;
}

}  // namespace mmgrpo
