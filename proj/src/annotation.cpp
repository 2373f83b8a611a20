#include "nfkit/annotation.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>
#include <unordered_map>

#include "nfkit/csv.hpp"
#include "nfkit/error.hpp"
#include "nfkit/text.hpp"

namespace nfkit {

AggregateResult aggregate(std::span<const WorkerLabel> labels,
                          std::size_t annotators_per_item) {
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<const WorkerLabel*>> by_post;
  for (const auto& l : labels) {
    auto [it, inserted] = by_post.try_emplace(l.post_id);
    if (inserted) order.push_back(l.post_id);
    it->second.push_back(&l);
  }

  AggregateResult result;
  for (const auto& post_id : order) {
    const auto& votes = by_post.at(post_id);
    std::vector<std::string> workers;
    for (const auto* v : votes) workers.push_back(v->worker_id);
    std::set<std::string> distinct(workers.begin(), workers.end());

    if (distinct.size() != workers.size()) {
      result.anomalies.push_back({post_id, "duplicate_worker", votes.size(), workers});
      continue;
    }
    if (votes.size() != annotators_per_item) {
      result.anomalies.push_back({post_id, "label_count", votes.size(), workers});
      continue;
    }
    LabeledExample e;
    e.post_id = post_id;
    for (const auto* v : votes) (v->label ? e.positive_count : e.negative_count)++;
    e.gold_label = majority_positive(e.positive_count, votes.size());
    e.annotator_ids = std::move(workers);
    e.batch_index = votes.front()->batch_index;
    result.examples.push_back(std::move(e));
  }
  return result;
}

void BatchPolicy::validate() const {
  if (thresholds.empty()) throw ConfigError("batch policy: no thresholds");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (thresholds[i] < 0 || thresholds[i] > 1) {
      throw ConfigError("batch policy: thresholds must lie in [0, 1]");
    }
    if (i > 0 && thresholds[i] < thresholds[i - 1]) {
      throw ConfigError("batch policy: thresholds must be non-decreasing");
    }
  }
  if (kappa_gate < -1 || kappa_gate > 1) {
    throw ConfigError("batch policy: kappa_gate must lie in [-1, 1]");
  }
  if (annotators_per_item == 0) {
    throw ConfigError("batch policy: annotators_per_item must be positive");
  }
}

BatchPolicy BatchPolicy::from_config(const KeyValueConfig& cfg,
                                     std::string_view prefix) {
  const std::string p = prefix.empty() ? "" : std::string(prefix) + ".";
  BatchPolicy b;
  if (auto list = cfg.get_list(p + "thresholds")) {
    b.thresholds.clear();
    for (const auto& item : *list) {
      try {
        b.thresholds.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw ConfigError(cfg.origin() + ": bad threshold '" + item + "'");
      }
    }
  }
  if (auto v = cfg.get_double(p + "kappa_gate")) b.kappa_gate = *v;
  if (auto v = cfg.get_int(p + "annotators_per_item")) {
    b.annotators_per_item = static_cast<std::size_t>(*v);
  }
  b.validate();
  return b;
}

namespace {

struct PairTally {
  long long n = 0, agree = 0, a1 = 0, b1 = 0;
  void add(bool a, bool b) {
    ++n;
    agree += a == b;
    a1 += a;
    b1 += b;
  }
};

// Integer form: kappa = (n*agree - S) / (n^2 - S), S = A1*B1 + A0*B0.
KappaResult kappa_from(const PairTally& t) {
  const long long chance = t.a1 * t.b1 + (t.n - t.a1) * (t.n - t.b1);
  const long long denom = t.n * t.n - chance;
  const bool a_const = t.a1 == 0 || t.a1 == t.n;
  const bool b_const = t.b1 == 0 || t.b1 == t.n;
  if (denom == 0) return {1.0, true};          // both constant, identical
  if (a_const && b_const) return {0.0, true};  // both constant, different
  return {static_cast<double>(t.n * t.agree - chance) / static_cast<double>(denom),
          false};
}

}  // namespace

KappaResult cohen_kappa(std::span<const bool> a, std::span<const bool> b) {
  if (a.empty() || a.size() != b.size()) {
    throw DataError("cohen_kappa: sequences must be non-empty and equal length");
  }
  PairTally t;
  for (std::size_t i = 0; i < a.size(); ++i) t.add(a[i], b[i]);
  return kappa_from(t);
}

std::optional<KappaResult> fleiss_kappa(std::span<const std::size_t> positives,
                                        std::size_t raters) {
  if (positives.empty() || raters < 2) return std::nullopt;
  const double m = static_cast<double>(raters);
  const double items = static_cast<double>(positives.size());
  double agreement_sum = 0;
  double total_pos = 0;
  for (std::size_t pos : positives) {
    if (pos > raters) throw DataError("fleiss_kappa: more positives than raters");
    const double p = static_cast<double>(pos);
    const double q = m - p;
    agreement_sum += (p * p + q * q - m) / (m * (m - 1));
    total_pos += p;
  }
  const double p_bar = agreement_sum / items;
  const double share = total_pos / (items * m);
  const double p_e = share * share + (1 - share) * (1 - share);
  if (total_pos == 0 || total_pos == items * m) return KappaResult{1.0, true};
  return KappaResult{(p_bar - p_e) / (1 - p_e), false};
}

namespace {

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::optional<double> optional_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

nlohmann::ordered_json AgreementReport::to_json() const {
  nlohmann::ordered_json j;
  j["item_count"] = item_count;
  j["fleiss_kappa"] = optional_json(fleiss_kappa);
  j["fleiss_items"] = fleiss_items;
  j["fleiss_raters"] = fleiss_raters;
  j["mean_pairwise_kappa"] = optional_json(mean_pairwise_kappa);
  auto pairs = nlohmann::ordered_json::array();
  for (const auto& [pair, k] : pairwise_kappa) {
    pairs.push_back({{"a", pair.first},
                     {"b", pair.second},
                     {"kappa", k},
                     {"items", pairwise_items.at(pair)}});
  }
  j["pairwise"] = std::move(pairs);
  auto workers = nlohmann::ordered_json::object();
  for (const auto& [w, k] : per_worker_kappa) workers[w] = k;
  j["per_worker_kappa"] = std::move(workers);
  auto means = nlohmann::ordered_json::object();
  for (const auto& [w, k] : per_worker_pairwise_mean) means[w] = k;
  j["per_worker_pairwise_mean"] = std::move(means);
  j["warnings"] = warnings;
  return j;
}

AgreementReport AgreementReport::from_json(const nlohmann::json& j) {
  AgreementReport r;
  r.item_count = j.at("item_count").get<std::size_t>();
  r.fleiss_kappa = optional_from(j, "fleiss_kappa");
  r.fleiss_items = j.at("fleiss_items").get<std::size_t>();
  r.fleiss_raters = j.at("fleiss_raters").get<std::size_t>();
  r.mean_pairwise_kappa = optional_from(j, "mean_pairwise_kappa");
  for (const auto& p : j.at("pairwise")) {
    WorkerPair key{p.at("a").get<std::string>(), p.at("b").get<std::string>()};
    r.pairwise_kappa[key] = p.at("kappa").get<double>();
    r.pairwise_items[key] = p.at("items").get<std::size_t>();
  }
  for (const auto& [w, k] : j.at("per_worker_kappa").items()) {
    r.per_worker_kappa[w] = k.get<double>();
  }
  for (const auto& [w, k] : j.at("per_worker_pairwise_mean").items()) {
    r.per_worker_pairwise_mean[w] = k.get<double>();
  }
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  return r;
}

AgreementReport agreement_report(std::span<const WorkerLabel> labels) {
  AgreementReport report;
  // item -> worker -> label, first label wins for duplicates.
  std::map<std::string, std::map<std::string, bool>> items;
  std::size_t duplicates = 0;
  for (const auto& l : labels) {
    if (!items[l.post_id].emplace(l.worker_id, l.label).second) ++duplicates;
  }
  if (duplicates > 0) {
    report.warnings.push_back(std::to_string(duplicates) +
                              " duplicate (worker, post) labels ignored");
  }
  report.item_count = items.size();

  std::set<std::string> workers;
  for (const auto& [item, ratings] : items) {
    for (const auto& [w, l] : ratings) workers.insert(w);
  }
  if (workers.size() < 2) {
    report.warnings.push_back("fewer than two workers; no agreement computed");
    return report;
  }

  // Pairwise Cohen over shared items.
  std::map<WorkerPair, PairTally> shared;
  for (const auto& [item, ratings] : items) {
    for (auto a = ratings.begin(); a != ratings.end(); ++a) {
      for (auto b = std::next(a); b != ratings.end(); ++b) {
        shared[{a->first, b->first}].add(a->second, b->second);
      }
    }
  }
  if (shared.empty()) {
    report.warnings.push_back("no item is shared by two workers");
    return report;
  }
  std::map<std::string, std::vector<double>> per_worker_pairs;
  double sum = 0;
  for (const auto& [pair, tally] : shared) {
    const auto k = kappa_from(tally);
    report.pairwise_kappa[pair] = k.value;
    report.pairwise_items[pair] = static_cast<std::size_t>(tally.n);
    per_worker_pairs[pair.first].push_back(k.value);
    per_worker_pairs[pair.second].push_back(k.value);
    sum += k.value;
  }
  report.mean_pairwise_kappa = sum / static_cast<double>(shared.size());
  for (const auto& [w, ks] : per_worker_pairs) {
    double s = 0;
    for (double k : ks) s += k;
    report.per_worker_pairwise_mean[w] = s / static_cast<double>(ks.size());
  }

  // Worker against the majority of co-raters.
  for (const auto& worker : workers) {
    PairTally tally;
    for (const auto& [item, ratings] : items) {
      auto self = ratings.find(worker);
      if (self == ratings.end() || ratings.size() < 2) continue;
      std::size_t pos = 0, n = 0;
      for (const auto& [w, l] : ratings) {
        if (w == worker) continue;
        pos += l;
        ++n;
      }
      if (2 * pos == n) continue;  // tie among co-raters
      tally.add(self->second, majority_positive(pos, n));
    }
    if (tally.n == 0) continue;
    report.per_worker_kappa[worker] = kappa_from(tally).value;
  }

  // Fleiss over items carrying the full rater count.
  std::size_t raters = 0;
  for (const auto& [item, ratings] : items) raters = std::max(raters, ratings.size());
  std::vector<std::size_t> positives;
  for (const auto& [item, ratings] : items) {
    if (ratings.size() != raters) continue;
    std::size_t pos = 0;
    for (const auto& [w, l] : ratings) pos += l;
    positives.push_back(pos);
  }
  report.fleiss_raters = raters;
  report.fleiss_items = positives.size();
  if (auto f = fleiss_kappa(positives, raters)) report.fleiss_kappa = f->value;
  return report;
}

std::set<std::string> gate_workers(const AgreementReport& report,
                                   const BatchPolicy& policy) {
  std::set<std::string> barred;
  for (const auto& [worker, kappa] : report.per_worker_kappa) {
    if (kappa < policy.kappa_gate) barred.insert(worker);
  }
  return barred;
}

BatchFile export_batch(std::span<const std::string> post_ids,
                       const std::map<std::string, std::string>& texts,
                       int batch_index, const BatchPolicy& policy,
                       std::string_view instructions_ref) {
  policy.validate();
  if (post_ids.empty()) throw DataError("export_batch: empty id list");
  if (batch_index < 1 ||
      static_cast<std::size_t>(batch_index) > policy.thresholds.size()) {
    throw DataError("export_batch: batch index " + std::to_string(batch_index) +
                    " outside 1.." + std::to_string(policy.thresholds.size()));
  }
  std::ostringstream csv;
  CsvWriter writer(csv);
  writer.write_row({"post_id", "text"});
  for (const auto& id : post_ids) {
    auto it = texts.find(id);
    if (it == texts.end()) throw DataError("export_batch: no text for post '" + id + "'");
    writer.write_row({id, it->second});
  }
  BatchFile file;
  file.csv = csv.str();
  file.manifest["batch_index"] = batch_index;
  file.manifest["row_count"] = post_ids.size();
  file.manifest["required_qualification_rate"] =
      policy.thresholds[static_cast<std::size_t>(batch_index - 1)];
  file.manifest["annotators_per_item"] = policy.annotators_per_item;
  file.manifest["kappa_gate"] = policy.kappa_gate;
  file.manifest["instructions"] = instructions_ref;
  return file;
}

std::vector<std::vector<std::string>> partition_batches(
    std::span<const std::string> ids, std::size_t batches) {
  if (batches == 0) throw DataError("partition_batches: zero batches");
  std::vector<std::vector<std::string>> out(batches);
  const std::size_t base = ids.size() / batches;
  const std::size_t extra = ids.size() % batches;
  std::size_t pos = 0;
  for (std::size_t b = 0; b < batches; ++b) {
    const std::size_t n = base + (b < extra ? 1 : 0);
    out[b].assign(ids.begin() + static_cast<std::ptrdiff_t>(pos),
                  ids.begin() + static_cast<std::ptrdiff_t>(pos + n));
    pos += n;
  }
  return out;
}

std::vector<WorkerLabel> read_worker_labels(std::istream& in) {
  CsvReader reader(in, ',');
  CsvRow row;
  if (!reader.next(row)) return {};
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < row.fields.size(); ++i) {
    col[std::string(text::trim(row.fields[i]))] = i;
  }
  for (const char* required : {"worker_id", "post_id", "label", "batch_index"}) {
    if (!col.count(required)) {
      throw DataError(std::string("labels file: missing column '") + required + "'");
    }
  }
  const auto ts_col = col.find("submitted_at");

  std::vector<WorkerLabel> labels;
  while (reader.next(row)) {
    const std::string where = "labels file line " + std::to_string(row.line);
    if (row.malformed || row.fields.size() != col.size()) {
      throw DataError(where + ": malformed row");
    }
    WorkerLabel l;
    l.worker_id = std::string(text::trim(row.fields[col["worker_id"]]));
    l.post_id = std::string(text::trim(row.fields[col["post_id"]]));
    if (l.worker_id.empty() || l.post_id.empty()) {
      throw DataError(where + ": empty worker_id or post_id");
    }
    const auto label = text::ascii_lower(text::trim(row.fields[col["label"]]));
    if (label == "true") {
      l.label = true;
    } else if (label == "false") {
      l.label = false;
    } else {
      throw DataError(where + ": label must be \"true\" or \"false\"");
    }
    const auto bi = text::trim(row.fields[col["batch_index"]]);
    auto [ptr, ec] = std::from_chars(bi.data(), bi.data() + bi.size(), l.batch_index);
    if (ec != std::errc{} || ptr != bi.data() + bi.size() || l.batch_index < 1) {
      throw DataError(where + ": batch_index must be an integer >= 1");
    }
    if (ts_col != col.end()) {
      const auto& v = row.fields[ts_col->second];
      if (!text::trim(v).empty()) {
        l.submitted_at = parse_timestamp(v, "rfc3339");
        if (!l.submitted_at) throw DataError(where + ": bad submitted_at");
      }
    }
    labels.push_back(std::move(l));
  }
  return labels;
}

void write_worker_labels(std::ostream& out, std::span<const WorkerLabel> labels) {
  CsvWriter writer(out);
  writer.write_row({"worker_id", "post_id", "label", "batch_index", "submitted_at"});
  for (const auto& l : labels) {
    writer.write_row({l.worker_id, l.post_id, l.label ? "true" : "false",
                      std::to_string(l.batch_index),
                      l.submitted_at ? format_rfc3339(*l.submitted_at) : ""});
  }
}

nlohmann::ordered_json to_json(const LabeledExample& e) {
  nlohmann::ordered_json j;
  j["post_id"] = e.post_id;
  j["gold_label"] = e.gold_label;
  j["votes"] = {{"positive", e.positive_count}, {"negative", e.negative_count}};
  j["annotator_ids"] = e.annotator_ids;
  j["batch_index"] = e.batch_index;
  return j;
}

LabeledExample labeled_example_from_json(const nlohmann::json& j) {
  LabeledExample e;
  e.post_id = j.at("post_id").get<std::string>();
  e.gold_label = j.at("gold_label").get<bool>();
  e.positive_count = j.at("votes").at("positive").get<std::size_t>();
  e.negative_count = j.at("votes").at("negative").get<std::size_t>();
  e.annotator_ids = j.at("annotator_ids").get<std::vector<std::string>>();
  e.batch_index = j.at("batch_index").get<int>();
  if (e.gold_label != majority_positive(e.positive_count,
                                        e.positive_count + e.negative_count)) {
    throw DataError("gold label of " + e.post_id + " disagrees with its votes");
  }
  return e;
}

nlohmann::ordered_json to_json(const LabelAnomaly& a) {
  return {{"post_id", a.post_id},
          {"reason", a.reason},
          {"label_count", a.label_count},
          {"worker_ids", a.worker_ids}};
}

void write_labeled_examples(std::ostream& out,
                            std::span<const LabeledExample> examples) {
  for (const auto& e : examples) out << to_json(e).dump() << '\n';
}

std::vector<LabeledExample> read_labeled_examples(std::istream& in) {
  std::vector<LabeledExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(labeled_example_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("gold line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace nfkit
