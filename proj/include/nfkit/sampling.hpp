#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "nfkit/clean.hpp"

namespace nfkit {

enum class Rounding { largest_remainder };

// Per-source annotation quotas proportional to corpus composition.
struct SamplePlan {
  std::uint64_t n_total = 1000;
  std::uint64_t seed = 0;
  std::map<std::string, std::uint64_t> per_source_quota;
  Rounding rounding = Rounding::largest_remainder;

  nlohmann::ordered_json to_json() const;
  static SamplePlan from_json(const nlohmann::json& j);
};

// quota_s = n_total * count_s / total, rounded by the largest-remainder
// method. Remainders are compared exactly; ties go to the source whose name
// sorts first. Throws DataError if n_total exceeds the corpus or a count is 0.
SamplePlan plan_sample(const std::map<std::string, std::uint64_t>& corpus_counts,
                       std::uint64_t n_total, std::uint64_t seed);

// Uniform sampling without replacement inside each source, then a seeded
// shuffle of the union. `ids_by_source` must be in corpus order.
std::vector<std::string> draw_sample(
    const std::map<std::string, std::vector<std::string>>& ids_by_source,
    const SamplePlan& plan);

// Same, keyed by CleanPost::key().
std::vector<std::string> draw_sample(const MergedCorpus& corpus,
                                     const SamplePlan& plan);

using SplitRatios = std::array<double, 3>;  // train, validation, test

struct DatasetSplit {
  std::vector<std::string> train_ids;
  std::vector<std::string> validation_ids;
  std::vector<std::string> test_ids;
  SplitRatios ratios{0.8, 0.1, 0.1};
  std::uint64_t seed = 0;
  bool stratified = false;

  std::size_t size() const {
    return train_ids.size() + validation_ids.size() + test_ids.size();
  }
};

// Partition sizes: floor(n * r_i), then leftovers handed out one at a time
// in the order train, validation, test.
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios);

// Seeded shuffle followed by a contiguous partition. Throws DataError on an
// empty list, duplicate ids, a negative ratio, or ratios not summing to 1.
DatasetSplit split(std::span<const std::string> ids, const SplitRatios& ratios,
                   std::uint64_t seed);

// Splits positives and negatives separately with the same rule and
// concatenates per partition.
DatasetSplit split_stratified(std::span<const std::string> ids,
                              const std::map<std::string, bool>& labels,
                              const SplitRatios& ratios, std::uint64_t seed);

// One line of the gold split files handed to the fine-tuning trainer:
// {"post_id", "text", "label"}.
struct GoldExample {
  std::string post_id;
  std::string text;
  bool label = false;

  bool operator==(const GoldExample&) const = default;
};

nlohmann::ordered_json to_json(const GoldExample& e);
// Throws DataError on missing or mistyped fields, extra keys, or empty text.
GoldExample gold_example_from_json(const nlohmann::json& j);
void write_gold_examples(std::ostream& out, std::span<const GoldExample> examples);
std::vector<GoldExample> read_gold_examples(std::istream& in);

}  // namespace nfkit
