#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace mmgrpo {

enum class Op { Add, Max, AbsDiff };
enum class Category { TextSufficient, VisionRequired, Redundant };
enum class Split { Train, Test };

inline constexpr int kTextLen = 4;
inline constexpr int kVisualDim = 33;
inline constexpr int kAnswerVocab = 19;

// Text token ids: 3 ops, 10 digits, MASK, QUERY, TEMPLATE.
namespace tokens {
inline constexpr int kOpBase = 0;  // Add=0, Max=1, AbsDiff=2
inline constexpr int kDigitBase = 3;
inline constexpr int kMask = 13;
inline constexpr int kQuery = 14;
inline constexpr int kTemplate = 15;
inline constexpr int kTextVocab = 16;

inline int digit(int d) { return kDigitBase + d; }
inline bool is_digit(int tok) { return tok >= kDigitBase && tok < kDigitBase + 10; }
inline int digit_value(int tok) { return tok - kDigitBase; }
}  // namespace tokens

struct TaskSpec {
  Op op = Op::Add;
  int a = 0;  // in [0,9]
  int b = 0;  // in [0,9]
  bool operator==(const TaskSpec&) const = default;
};

struct Sample {
  std::int64_t id = 0;
  std::array<int, kTextLen> text_tokens{};
  std::array<double, kVisualDim> visual_vec{};
  Category category = Category::TextSufficient;
  int answer_token = 0;  // in [0,18]
  TaskSpec spec;
  bool operator==(const Sample&) const = default;
};

struct Dataset {
  std::vector<Sample> samples;
  Split split = Split::Train;
  std::uint64_t gen_seed = 0;
};

struct GenConfig {
  int n_train = 512;
  int n_test = 128;
  double frac_text_sufficient = 0.4;
  double frac_vision_required = 0.3;
  double frac_redundant = 0.3;
  std::uint64_t seed = 0;
};

void validate(const GenConfig& cfg);  // throws std::invalid_argument

int ground_truth_answer(const TaskSpec& spec);

/// Exact per-category counts for n samples: cumulative rounding over the
/// fraction prefix sums, so counts are deterministic and sum to n.
std::array<int, 3> category_counts(int n, const GenConfig& cfg);

std::pair<Dataset, Dataset> generate_dataset(const GenConfig& cfg);

std::string op_to_string(Op op);
Op op_from_string(const std::string& s);
std::string category_to_string(Category c);
Category category_from_string(const std::string& s);

/// One JSONL record per sample, floats at 17 significant digits.
std::string sample_to_jsonl(const Sample& s);
void save_jsonl(const Dataset& ds, const std::string& path);
Dataset load_jsonl(const std::string& path);

}  // namespace mmgrpo
