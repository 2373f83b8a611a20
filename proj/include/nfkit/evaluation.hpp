#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "nfkit/annotation.hpp"
#include "nfkit/inference.hpp"

namespace nfkit {

// Positive class = neo-fascist.
struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
  std::size_t excluded = 0;  // refusal and unparseable verdicts

  std::size_t scored() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionMatrix&) const = default;
  nlohmann::ordered_json to_json() const;
  static ConfusionMatrix from_json(const nlohmann::json& j);
};

std::map<std::string, bool> gold_labels(std::span<const LabeledExample> gold);

// Throws DataError for a verdict whose post is not in `gold` or a post
// with more than one verdict.
ConfusionMatrix confusion(std::span<const Verdict> verdicts,
                          const std::map<std::string, bool>& gold);

// Undefined values stay empty; nothing is reported as 0 for lack of data.
struct MetricSet {
  std::optional<double> accuracy;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;

  nlohmann::ordered_json to_json() const;
  static MetricSet from_json(const nlohmann::json& j);
};

// Throws DataError when nothing was scored. f1 is undefined unless precision
// and recall are both defined with a non-zero sum.
MetricSet metrics(const ConfusionMatrix& m);

struct MetricSummary {
  std::optional<double> mean;
  std::optional<double> std;  // population
  std::optional<double> min;
  std::optional<double> max;
  std::size_t runs_used = 0;
  std::size_t runs_excluded = 0;  // runs where the metric was undefined
};

struct RunAggregate {
  MetricSummary accuracy;
  MetricSummary precision;
  MetricSummary recall;
  MetricSummary f1;

  nlohmann::ordered_json to_json() const;
};

// Throws DataError on an empty list.
RunAggregate aggregate_runs(std::span<const MetricSet> runs);

struct EvalReport {
  std::string model_name;
  Modality modality = Modality::zero_shot;
  std::vector<ConfusionMatrix> confusions;  // one per run
  std::vector<MetricSet> runs;
  RunAggregate aggregate;

  std::size_t run_count() const { return runs.size(); }
  const ConfusionMatrix& last_confusion() const { return confusions.back(); }

  nlohmann::ordered_json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
};

EvalReport make_report(std::string model_name, Modality modality,
                       std::vector<ConfusionMatrix> confusions);

struct RenderedReport {
  nlohmann::ordered_json json;
  std::string text;
};

// Groups rows by modality (zero_shot, few_shot, finetuned), models in input
// order. Values are run means with 4 decimals; '*' marks the best value of a
// column inside a group of two or more rows; "n/a" marks undefined values.
RenderedReport render_report(std::span<const EvalReport> reports);

// Target,Prediction,N rows for external plotting.
std::string confusion_grid_csv(const ConfusionMatrix& m);

}  // namespace nfkit
