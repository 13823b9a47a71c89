#include "mmgrpo/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mmgrpo/numfmt.hpp"
#include "mmgrpo/rng.hpp"
#include <json.hpp>

namespace mmgrpo {

void validate(const GenConfig& cfg) {
  if (cfg.n_train <= 0 || cfg.n_test <= 0) {
    throw std::invalid_argument("gen: n_train and n_test must be positive");
  }
  const double fs[3] = {cfg.frac_text_sufficient, cfg.frac_vision_required,
                        cfg.frac_redundant};
  double sum = 0.0;
  for (double f : fs) {
    if (f < 0.0) throw std::invalid_argument("gen: fractions must be nonnegative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw std::invalid_argument("gen: fractions must sum to 1");
  }
}

int ground_truth_answer(const TaskSpec& spec) {
  switch (spec.op) {
    case Op::Add: return spec.a + spec.b;
    case Op::Max: return std::max(spec.a, spec.b);
    case Op::AbsDiff: return std::abs(spec.a - spec.b);
  }
  throw std::invalid_argument("invalid op");
}

std::array<int, 3> category_counts(int n, const GenConfig& cfg) {
  // Cumulative rounding: boundary_k = round(n * prefix_sum_k). Counts are
  // exact, deterministic, and always sum to n.
  const double prefix[3] = {
      cfg.frac_text_sufficient,
      cfg.frac_text_sufficient + cfg.frac_vision_required,
      1.0};
  std::array<int, 3> counts{};
  int prev = 0;
  for (int k = 0; k < 3; ++k) {
    int boundary = (k == 2) ? n : static_cast<int>(std::llround(n * prefix[k]));
    counts[k] = boundary - prev;
    prev = boundary;
  }
  return counts;
}

namespace {

Sample make_sample(std::int64_t id, Category cat, std::uint64_t seed,
                   std::uint64_t split_salt) {
  RngStream rng = RngStream::keyed(
      seed, {split_salt, salt::kSample, static_cast<std::uint64_t>(id)});

  Sample s;
  s.id = id;
  s.category = cat;
  s.spec.op = static_cast<Op>(rng.uniform_int(3));
  s.spec.a = rng.uniform_int(10);
  s.spec.b = rng.uniform_int(10);
  s.answer_token = ground_truth_answer(s.spec);

  const bool text_has_digits = (cat != Category::VisionRequired);
  s.text_tokens[0] = tokens::kOpBase + static_cast<int>(s.spec.op);
  s.text_tokens[1] = text_has_digits ? tokens::digit(s.spec.a) : tokens::kMask;
  s.text_tokens[2] = text_has_digits ? tokens::digit(s.spec.b) : tokens::kMask;
  s.text_tokens[3] = tokens::kQuery;

  // Visual layout: [0..2] op one-hot (always truthful), [3..12] a one-hot,
  // [13..22] b one-hot, [23..32] noise block in [0, 0.1].
  int vis_a = s.spec.a;
  int vis_b = s.spec.b;
  if (cat == Category::TextSufficient) {
    vis_a = rng.uniform_int(10);  // distractor values, independent of truth
    vis_b = rng.uniform_int(10);
  }
  s.visual_vec.fill(0.0);
  s.visual_vec[static_cast<int>(s.spec.op)] = 1.0;
  s.visual_vec[3 + vis_a] = 1.0;
  s.visual_vec[13 + vis_b] = 1.0;
  for (int k = 0; k < 10; ++k) {
    s.visual_vec[23 + k] = rng.uniform(0.0, 0.1);
  }
  return s;
}

Dataset generate_split(int n, Split split, const GenConfig& cfg) {
  const std::uint64_t split_salt =
      (split == Split::Train) ? salt::kTrainSplit : salt::kTestSplit;

  const std::array<int, 3> counts = category_counts(n, cfg);
  std::vector<Category> cats;
  cats.reserve(n);
  for (int k = 0; k < 3; ++k) {
    cats.insert(cats.end(), counts[k], static_cast<Category>(k));
  }
  // Fisher-Yates so categories are mixed across ids while counts stay exact.
  RngStream shuffle_rng =
      RngStream::keyed(cfg.seed, {split_salt, salt::kCategoryShuffle});
  for (int i = n - 1; i > 0; --i) {
    std::swap(cats[i], cats[shuffle_rng.uniform_int(i + 1)]);
  }

  Dataset ds;
  ds.split = split;
  ds.gen_seed = cfg.seed;
  ds.samples.reserve(n);
  for (int i = 0; i < n; ++i) {
    ds.samples.push_back(make_sample(i, cats[i], cfg.seed, split_salt));
  }
  return ds;
}

}  // namespace

std::pair<Dataset, Dataset> generate_dataset(const GenConfig& cfg) {
  validate(cfg);
  return {generate_split(cfg.n_train, Split::Train, cfg),
          generate_split(cfg.n_test, Split::Test, cfg)};
}

std::string op_to_string(Op op) {
  switch (op) {
    case Op::Add: return "Add";
    case Op::Max: return "Max";
    case Op::AbsDiff: return "AbsDiff";
  }
  throw std::invalid_argument("invalid op");
}

Op op_from_string(const std::string& s) {
  if (s == "Add") return Op::Add;
  if (s == "Max") return Op::Max;
  if (s == "AbsDiff") return Op::AbsDiff;
  throw std::invalid_argument("unknown op \"" + s + "\"");
}

std::string category_to_string(Category c) {
  switch (c) {
    case Category::TextSufficient: return "TextSufficient";
    case Category::VisionRequired: return "VisionRequired";
    case Category::Redundant: return "Redundant";
  }
  throw std::invalid_argument("invalid category");
}

Category category_from_string(const std::string& s) {
  if (s == "TextSufficient") return Category::TextSufficient;
  if (s == "VisionRequired") return Category::VisionRequired;
  if (s == "Redundant") return Category::Redundant;
  throw std::invalid_argument("unknown category \"" + s + "\"");
}

std::string sample_to_jsonl(const Sample& s) {
  std::string out;
  out.reserve(1024);
  out += "{\"id\": " + std::to_string(s.id);
  out += ", \"text_tokens\": [";
  for (int t = 0; t < kTextLen; ++t) {
    if (t) out += ", ";
    out += std::to_string(s.text_tokens[t]);
  }
  out += "], \"visual_vec\": [";
  for (int v = 0; v < kVisualDim; ++v) {
    if (v) out += ", ";
    out += fmt_g17(s.visual_vec[v]);
  }
  out += "], \"category\": \"" + category_to_string(s.category) + "\"";
  out += ", \"answer_token\": " + std::to_string(s.answer_token);
  out += ", \"op\": \"" + op_to_string(s.spec.op) + "\"";
  out += ", \"a\": " + std::to_string(s.spec.a);
  out += ", \"b\": " + std::to_string(s.spec.b);
  out += "}";
  return out;
}

void save_jsonl(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  for (const Sample& s : ds.samples) {
    out << sample_to_jsonl(s) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

namespace {

Sample parse_sample_line(const std::string& line, int line_no) {
  auto fail = [line_no](const std::string& msg) -> Sample {
    throw std::runtime_error("line " + std::to_string(line_no) + ": " + msg);
  };

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    return fail(std::string("malformed JSON (") + e.what() + ")");
  }

  Sample s;
  try {
    s.id = j.at("id").get<std::int64_t>();
    const auto& tt = j.at("text_tokens");
    if (!tt.is_array() || tt.size() != kTextLen) {
      return fail("text_tokens must have 4 entries");
    }
    for (int t = 0; t < kTextLen; ++t) s.text_tokens[t] = tt[t].get<int>();
    const auto& vv = j.at("visual_vec");
    if (!vv.is_array() || vv.size() != kVisualDim) {
      return fail("visual_vec must have 33 entries");
    }
    for (int v = 0; v < kVisualDim; ++v) s.visual_vec[v] = vv[v].get<double>();
    s.category = category_from_string(j.at("category").get<std::string>());
    s.answer_token = j.at("answer_token").get<int>();
    s.spec.op = op_from_string(j.at("op").get<std::string>());
    s.spec.a = j.at("a").get<int>();
    s.spec.b = j.at("b").get<int>();
  } catch (const nlohmann::json::exception& e) {
    return fail(std::string("bad record (") + e.what() + ")");
  }

  if (s.id < 0) return fail("id out of range");
  for (int t : s.text_tokens) {
    if (t < 0 || t >= tokens::kTextVocab) return fail("text_tokens out of range");
  }
  for (double v : s.visual_vec) {
    if (!std::isfinite(v) || v < -0.1 || v > 1.1) {
      return fail("visual_vec out of range");
    }
  }
  if (s.answer_token < 0 || s.answer_token >= kAnswerVocab) {
    return fail("answer_token out of range");
  }
  if (s.spec.a < 0 || s.spec.a > 9 || s.spec.b < 0 || s.spec.b > 9) {
    return fail("a/b out of range");
  }
  if (s.answer_token != ground_truth_answer(s.spec)) {
    return fail("answer_token inconsistent with op/a/b");
  }
  return s;
}

}  // namespace

Dataset load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for read: " + path);
  Dataset ds;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ds.samples.push_back(parse_sample_line(line, line_no));
  }
  return ds;
}

}  // namespace mmgrpo
