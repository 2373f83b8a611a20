#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nfkit/config.hpp"
#include "nfkit/time.hpp"

namespace nfkit {

// One worker's answer for one post; true = contains neo-fascist talking
// points.
struct WorkerLabel {
  std::string worker_id;
  std::string post_id;
  bool label = false;
  int batch_index = 1;
  std::optional<Timestamp> submitted_at;
};

struct LabeledExample {
  std::string post_id;
  bool gold_label = false;
  std::size_t positive_count = 0;
  std::size_t negative_count = 0;
  std::vector<std::string> annotator_ids;
  int batch_index = 1;
};

struct LabelAnomaly {
  std::string post_id;
  std::string reason;  // "label_count" or "duplicate_worker"
  std::size_t label_count = 0;
  std::vector<std::string> worker_ids;
};

struct AggregateResult {
  std::vector<LabeledExample> examples;
  std::vector<LabelAnomaly> anomalies;
};

// Strict majority of `total` votes.
inline bool majority_positive(std::size_t positives, std::size_t total) {
  return 2 * positives > total;
}

// Majority vote per post. A post is labeled only when it has exactly
// `annotators_per_item` labels from as many distinct workers; anything else
// is reported as an anomaly. Output follows first appearance of each post.
AggregateResult aggregate(std::span<const WorkerLabel> labels,
                          std::size_t annotators_per_item = 3);

struct BatchPolicy {
  std::vector<double> thresholds{0.90, 0.95, 0.98};
  double kappa_gate = 0.2;
  std::size_t annotators_per_item = 3;

  void validate() const;
  // Keys: thresholds, kappa_gate, annotators_per_item
  static BatchPolicy from_config(const KeyValueConfig& cfg,
                                 std::string_view prefix = "");
};

struct KappaResult {
  double value = 0.0;
  // Both raters constant: 1 when they agree, 0 when they differ.
  bool degenerate = false;
};

// Cohen's kappa for two binary raters over the same items:
// (p_o - p_e) / (1 - p_e). Throws DataError on empty or unequal input.
KappaResult cohen_kappa(std::span<const bool> a, std::span<const bool> b);

// Fleiss' kappa for binary ratings. Each entry holds the number of positive
// ratings for one item; every item has `raters` ratings.
std::optional<KappaResult> fleiss_kappa(std::span<const std::size_t> positives,
                                        std::size_t raters);

using WorkerPair = std::pair<std::string, std::string>;  // first < second

struct AgreementReport {
  std::map<WorkerPair, double> pairwise_kappa;
  std::map<WorkerPair, std::size_t> pairwise_items;
  // Worker against the majority of the other raters of each shared item
  // (items where the others tie are skipped). This is the gating statistic.
  std::map<std::string, double> per_worker_kappa;
  // Mean of the worker's pairwise kappas.
  std::map<std::string, double> per_worker_pairwise_mean;
  std::optional<double> mean_pairwise_kappa;
  std::optional<double> fleiss_kappa;
  std::size_t fleiss_items = 0;
  std::size_t fleiss_raters = 0;
  std::size_t item_count = 0;
  std::vector<std::string> warnings;

  nlohmann::ordered_json to_json() const;
  static AgreementReport from_json(const nlohmann::json& j);
};

AgreementReport agreement_report(std::span<const WorkerLabel> labels);

// Workers whose per-worker kappa is strictly below the gate.
std::set<std::string> gate_workers(const AgreementReport& report,
                                   const BatchPolicy& policy);

struct BatchFile {
  std::string csv;  // header post_id,text
  nlohmann::ordered_json manifest;
};

// Builds a crowdsourcing batch for `batch_index` (1-based). Throws DataError
// for an empty id list, an id without text, or a batch index beyond the
// policy's thresholds.
BatchFile export_batch(std::span<const std::string> post_ids,
                       const std::map<std::string, std::string>& texts,
                       int batch_index, const BatchPolicy& policy,
                       std::string_view instructions_ref = "coding_scheme/v1");

// Splits an id list into `batches` contiguous chunks whose sizes differ by
// at most one, larger chunks first.
std::vector<std::vector<std::string>> partition_batches(
    std::span<const std::string> ids, std::size_t batches);

// CSV with header worker_id,post_id,label,batch_index[,submitted_at];
// label is "true" or "false".
std::vector<WorkerLabel> read_worker_labels(std::istream& in);
void write_worker_labels(std::ostream& out, std::span<const WorkerLabel> labels);

nlohmann::ordered_json to_json(const LabeledExample& e);
LabeledExample labeled_example_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const LabelAnomaly& a);
void write_labeled_examples(std::ostream& out,
                            std::span<const LabeledExample> examples);
std::vector<LabeledExample> read_labeled_examples(std::istream& in);

}  // namespace nfkit
