#include "nfkit/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "nfkit/error.hpp"
#include "nfkit/text.hpp"

namespace nfkit {

nlohmann::ordered_json ConfusionMatrix::to_json() const {
  return {{"tp", tp}, {"fp", fp}, {"fn", fn}, {"tn", tn}, {"excluded", excluded}};
}

ConfusionMatrix ConfusionMatrix::from_json(const nlohmann::json& j) {
  ConfusionMatrix m;
  m.tp = j.at("tp").get<std::size_t>();
  m.fp = j.at("fp").get<std::size_t>();
  m.fn = j.at("fn").get<std::size_t>();
  m.tn = j.at("tn").get<std::size_t>();
  m.excluded = j.at("excluded").get<std::size_t>();
  return m;
}

std::map<std::string, bool> gold_labels(std::span<const LabeledExample> gold) {
  std::map<std::string, bool> out;
  for (const auto& e : gold) {
    if (!out.emplace(e.post_id, e.gold_label).second) {
      throw DataError("gold: duplicate post '" + e.post_id + "'");
    }
  }
  return out;
}

ConfusionMatrix confusion(std::span<const Verdict> verdicts,
                          const std::map<std::string, bool>& gold) {
  ConfusionMatrix m;
  std::set<std::string_view> seen;
  for (const auto& v : verdicts) {
    auto it = gold.find(v.post_id);
    if (it == gold.end()) {
      throw DataError("verdict for post '" + v.post_id + "' has no gold label");
    }
    if (!seen.insert(v.post_id).second) {
      throw DataError("more than one verdict for post '" + v.post_id + "'");
    }
    const bool truth = it->second;
    switch (v.parsed) {
      case Parsed::positive: ++(truth ? m.tp : m.fp); break;
      case Parsed::negative: ++(truth ? m.fn : m.tn); break;
      case Parsed::refusal:
      case Parsed::unparseable: ++m.excluded; break;
    }
  }
  return m;
}

namespace {

nlohmann::ordered_json opt(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json();
}

std::optional<double> opt_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

nlohmann::ordered_json MetricSet::to_json() const {
  return {{"accuracy", opt(accuracy)},
          {"f1", opt(f1)},
          {"precision", opt(precision)},
          {"recall", opt(recall)}};
}

MetricSet MetricSet::from_json(const nlohmann::json& j) {
  return {opt_from(j, "accuracy"), opt_from(j, "precision"), opt_from(j, "recall"),
          opt_from(j, "f1")};
}

MetricSet metrics(const ConfusionMatrix& m) {
  if (m.scored() == 0) throw DataError("metrics: no scored items");
  MetricSet s;
  s.accuracy = ratio(m.tp + m.tn, m.scored());
  s.precision = ratio(m.tp, m.tp + m.fp);
  s.recall = ratio(m.tp, m.tp + m.fn);
  if (s.precision && s.recall && *s.precision + *s.recall > 0) {
    s.f1 = 2 * *s.precision * *s.recall / (*s.precision + *s.recall);
  }
  return s;
}

namespace {

MetricSummary summarize(std::span<const MetricSet> runs,
                        std::optional<double> MetricSet::*field) {
  MetricSummary s;
  std::vector<double> values;
  for (const auto& r : runs) {
    if (r.*field) {
      values.push_back(*(r.*field));
    } else {
      ++s.runs_excluded;
    }
  }
  s.runs_used = values.size();
  if (values.empty()) return s;
  double sum = 0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double sq = 0;
  for (double v : values) sq += (v - mean) * (v - mean);
  s.mean = mean;
  s.std = std::sqrt(sq / static_cast<double>(values.size()));
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  // Rounding can push the mean of identical values one ulp outside.
  s.mean = std::clamp(*s.mean, *s.min, *s.max);
  return s;
}

nlohmann::ordered_json summary_json(const MetricSummary& s) {
  return {{"mean", opt(s.mean)},         {"std", opt(s.std)},
          {"min", opt(s.min)},           {"max", opt(s.max)},
          {"runs_used", s.runs_used},    {"runs_excluded", s.runs_excluded}};
}

}  // namespace

nlohmann::ordered_json RunAggregate::to_json() const {
  return {{"accuracy", summary_json(accuracy)},
          {"f1", summary_json(f1)},
          {"precision", summary_json(precision)},
          {"recall", summary_json(recall)}};
}

RunAggregate aggregate_runs(std::span<const MetricSet> runs) {
  if (runs.empty()) throw DataError("aggregate_runs: no runs");
  RunAggregate a;
  a.accuracy = summarize(runs, &MetricSet::accuracy);
  a.precision = summarize(runs, &MetricSet::precision);
  a.recall = summarize(runs, &MetricSet::recall);
  a.f1 = summarize(runs, &MetricSet::f1);
  return a;
}

EvalReport make_report(std::string model_name, Modality modality,
                       std::vector<ConfusionMatrix> confusions) {
  if (confusions.empty()) throw DataError("report for " + model_name + " has no runs");
  EvalReport r;
  r.model_name = std::move(model_name);
  r.modality = modality;
  r.confusions = std::move(confusions);
  for (const auto& c : r.confusions) r.runs.push_back(metrics(c));
  r.aggregate = aggregate_runs(r.runs);
  return r;
}

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["model_name"] = model_name;
  j["modality"] = to_string(modality);
  j["run_count"] = run_count();
  j["mean"] = {{"accuracy", opt(aggregate.accuracy.mean)},
               {"f1", opt(aggregate.f1.mean)},
               {"precision", opt(aggregate.precision.mean)},
               {"recall", opt(aggregate.recall.mean)}};
  j["aggregate"] = aggregate.to_json();
  j["runs"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    auto run = runs[i].to_json();
    run["confusion"] = confusions[i].to_json();
    j["runs"].push_back(run);
  }
  j["confusion_last_run"] = last_confusion().to_json();
  return j;
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  try {
    std::vector<ConfusionMatrix> confusions;
    for (const auto& run : j.at("runs")) {
      confusions.push_back(ConfusionMatrix::from_json(run.at("confusion")));
    }
    return make_report(j.at("model_name").get<std::string>(),
                       parse_modality(j.at("modality").get<std::string>()),
                       std::move(confusions));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("report: ") + e.what());
  }
}

namespace {

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string pad_right(const std::string& s, std::size_t width) {
  const std::size_t n = text::codepoint_count(s);
  return n >= width ? s : s + std::string(width - n, ' ');
}

std::string pad_left(const std::string& s, std::size_t width) {
  const std::size_t n = text::codepoint_count(s);
  return n >= width ? s : std::string(width - n, ' ') + s;
}

}  // namespace

RenderedReport render_report(std::span<const EvalReport> reports) {
  static const char* const metric_names[] = {"Accuracy", "F1", "Precision", "Recall"};
  auto means = [](const EvalReport& r) {
    return std::array<std::optional<double>, 4>{
        r.aggregate.accuracy.mean, r.aggregate.f1.mean, r.aggregate.precision.mean,
        r.aggregate.recall.mean};
  };

  RenderedReport out;
  out.json = {{"columns", {"Accuracy", "F1", "Precision", "Recall"}},
              {"groups", nlohmann::ordered_json::array()}};

  std::size_t name_width = 5;  // "Model"
  for (const auto& r : reports) {
    name_width = std::max(name_width, text::codepoint_count(r.model_name));
  }
  const std::size_t col = 11;

  std::string header = pad_right("Model", name_width);
  for (const char* m : metric_names) header += pad_left(m, col);
  header += pad_left("Runs", 6);
  header += pad_left("Excluded", 10);
  std::string body;

  for (Modality group : {Modality::zero_shot, Modality::few_shot, Modality::finetuned}) {
    std::vector<const EvalReport*> rows;
    for (const auto& r : reports) {
      if (r.modality == group) rows.push_back(&r);
    }
    if (rows.empty()) continue;

    // Best rounded value per column; only marked when there is a contest.
    std::array<std::optional<std::string>, 4> best;
    if (rows.size() >= 2) {
      for (std::size_t c = 0; c < 4; ++c) {
        std::optional<double> top;
        for (const auto* r : rows) {
          const auto v = means(*r)[c];
          if (v && (!top || *v > *top)) top = v;
        }
        if (top) best[c] = fixed4(*top);
      }
    }

    nlohmann::ordered_json g;
    g["modality"] = to_string(group);
    g["rows"] = nlohmann::ordered_json::array();
    body += std::string(to_string(group)) + "\n";
    for (const auto* r : rows) {
      const auto vals = means(*r);
      std::size_t excluded = 0;
      for (const auto& c : r->confusions) excluded += c.excluded;
      std::string line = pad_right(r->model_name, name_width);
      nlohmann::ordered_json row;
      row["model_name"] = r->model_name;
      row["run_count"] = r->run_count();
      row["excluded"] = excluded;
      for (std::size_t c = 0; c < 4; ++c) {
        std::string cell = "n/a ";
        bool is_best = false;
        if (vals[c]) {
          const std::string s = fixed4(*vals[c]);
          is_best = best[c] && *best[c] == s;
          cell = s + (is_best ? "*" : " ");
        }
        line += pad_left(cell, col);
        row[metric_names[c]] = {{"mean", opt(vals[c])}, {"best", is_best}};
      }
      line += pad_left(std::to_string(r->run_count()), 6);
      line += pad_left(std::to_string(excluded), 10);
      body += line + "\n";
      g["rows"].push_back(row);
    }
    out.json["groups"].push_back(g);
  }
  out.text = header + "\n" + body;
  return out;
}

std::string confusion_grid_csv(const ConfusionMatrix& m) {
  return "Target,Prediction,N\n"
         "true,true," + std::to_string(m.tp) + "\n"
         "true,false," + std::to_string(m.fn) + "\n"
         "false,true," + std::to_string(m.fp) + "\n"
         "false,false," + std::to_string(m.tn) + "\n";
}

}  // namespace nfkit
