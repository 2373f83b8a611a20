#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "nfkit/annotation.hpp"
#include "nfkit/error.hpp"

using namespace nfkit;

namespace {

// Straight from the definition with proportions; no integer tricks.
double cohen_oracle(const std::vector<bool>& a, const std::vector<bool>& b) {
  const double n = static_cast<double>(a.size());
  double agree = 0, pa = 0, pb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    agree += a[i] == b[i];
    pa += a[i];
    pb += b[i];
  }
  const double po = agree / n;
  pa /= n;
  pb /= n;
  const double pe = pa * pb + (1 - pa) * (1 - pb);
  if (pe == 1.0) return 1.0;
  return (po - pe) / (1 - pe);
}

std::vector<WorkerLabel> labels_for(const std::string& worker, const std::vector<bool>& values) {
  std::vector<WorkerLabel> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out.push_back({worker, "p" + std::to_string(i), values[i], 1, std::nullopt});
  }
  return out;
}

}  // namespace

TEST_CASE("majority of three over all label combinations") {
  for (int mask = 0; mask < 8; ++mask) {
    std::vector<WorkerLabel> labels;
    std::size_t positives = 0;
    for (int w = 0; w < 3; ++w) {
      const bool l = (mask >> w) & 1;
      positives += l;
      labels.push_back({"w" + std::to_string(w), "post", l, 1, std::nullopt});
    }
    CAPTURE(mask);
    const auto r = aggregate(labels);
    REQUIRE(r.examples.size() == 1);
    CHECK(r.anomalies.empty());
    CHECK(r.examples[0].gold_label == (positives >= 2));
    CHECK(r.examples[0].positive_count == positives);
    CHECK(r.examples[0].negative_count == 3 - positives);
    CHECK(majority_positive(positives, 3) == (positives >= 2));
  }
  CHECK_FALSE(majority_positive(1, 2));
  CHECK(majority_positive(2, 2));
}

TEST_CASE("aggregate reports anomalies and keeps first-seen order") {
  std::vector<WorkerLabel> labels{
      {"a", "p2", true, 1, std::nullopt},  {"a", "p1", true, 1, std::nullopt},
      {"b", "p2", true, 1, std::nullopt},  {"b", "p1", false, 1, std::nullopt},
      {"c", "p2", false, 2, std::nullopt}, {"c", "p1", false, 1, std::nullopt},
      {"a", "p3", true, 1, std::nullopt},  {"b", "p3", true, 1, std::nullopt},
      {"a", "p4", true, 1, std::nullopt},  {"a", "p4", false, 1, std::nullopt},
      {"b", "p4", true, 1, std::nullopt},
  };
  const auto r = aggregate(labels);
  REQUIRE(r.examples.size() == 2);
  CHECK(r.examples[0].post_id == "p2");
  CHECK(r.examples[0].gold_label);
  CHECK(r.examples[0].annotator_ids == std::vector<std::string>{"a", "b", "c"});
  CHECK(r.examples[1].post_id == "p1");
  CHECK_FALSE(r.examples[1].gold_label);
  REQUIRE(r.anomalies.size() == 2);
  CHECK(r.anomalies[0].post_id == "p3");
  CHECK(r.anomalies[0].reason == "label_count");
  CHECK(r.anomalies[0].label_count == 2);
  CHECK(r.anomalies[1].post_id == "p4");
  CHECK(r.anomalies[1].reason == "duplicate_worker");
}

TEST_CASE("cohen kappa known values") {
  // 20 yes/yes, 5 yes/no, 10 no/yes, 15 no/no: p_o = 0.7, p_e = 0.5.
  bool a[50], b[50];
  std::size_t n = 0;
  auto add = [&](int count, bool x, bool y) {
    for (int i = 0; i < count; ++i, ++n) {
      a[n] = x;
      b[n] = y;
    }
  };
  add(20, true, true);
  add(5, true, false);
  add(10, false, true);
  add(15, false, false);
  REQUIRE(n == 50);
  const auto k = cohen_kappa(a, b);
  CHECK(k.value == doctest::Approx(0.4).epsilon(1e-12));
  CHECK_FALSE(k.degenerate);

  const bool same[] = {true, false, true, true};
  CHECK(cohen_kappa(same, same).value == 1.0);
  const bool ones[] = {true, true};
  const bool zeros[] = {false, false};
  CHECK(cohen_kappa(ones, ones).value == 1.0);
  CHECK(cohen_kappa(ones, ones).degenerate);
  CHECK(cohen_kappa(ones, zeros).value == 0.0);
  CHECK(cohen_kappa(ones, zeros).degenerate);
  const bool flipped[] = {false, true, false, false};
  CHECK(cohen_kappa(same, flipped).value == doctest::Approx(-0.6));  // p_o = 0, p_e = 0.375
  CHECK_THROWS_AS(cohen_kappa(std::span<const bool>(), std::span<const bool>()), DataError);
  CHECK_THROWS_AS(cohen_kappa(same, ones), DataError);
}

TEST_CASE("property: cohen kappa matches the proportion oracle") {
  std::mt19937_64 rng(7);
  for (int iter = 0; iter < 100000; ++iter) {
    const std::size_t n = 1 + rng() % 6;
    std::vector<bool> a(n), b(n);
    bool ab[6], bb[6];
    for (std::size_t i = 0; i < n; ++i) {
      ab[i] = a[i] = rng() & 1;
      bb[i] = b[i] = rng() & 1;
    }
    const auto k = cohen_kappa({ab, n}, {bb, n});
    const double expected = cohen_oracle(a, b);
    if (std::abs(k.value - expected) > 1e-9) {
      FAIL("kappa " << k.value << " vs oracle " << expected << " for n=" << n);
    }
    // Symmetric in its arguments.
    if (cohen_kappa({bb, n}, {ab, n}).value != k.value) FAIL("kappa not symmetric");
  }
}

TEST_CASE("fleiss kappa") {
  // P_i = 1, 1, 1/3, 1/3 so P = 2/3; half of all ratings positive so P_e = 1/2.
  const std::size_t pos[] = {3, 0, 2, 1};
  const auto k = fleiss_kappa(pos, 3);
  REQUIRE(k);
  CHECK(k->value == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  const std::size_t unanimous[] = {3, 0, 3, 0};
  CHECK(fleiss_kappa(unanimous, 3)->value == doctest::Approx(1.0));
  const std::size_t all_pos[] = {3, 3};
  CHECK(fleiss_kappa(all_pos, 3)->degenerate);
  CHECK_FALSE(fleiss_kappa(std::span<const std::size_t>(), 3));
  CHECK_FALSE(fleiss_kappa(pos, 1));
  const std::size_t too_many[] = {4};
  CHECK_THROWS_AS(fleiss_kappa(too_many, 3), DataError);
}

TEST_CASE("fleiss with two raters agrees with Scott's pi") {
  // Scott's pi for two raters: P_e uses pooled marginals.
  std::mt19937_64 rng(3);
  for (int iter = 0; iter < 2000; ++iter) {
    const std::size_t n = 2 + rng() % 10;
    std::vector<std::size_t> pos(n);
    double agree = 0, pooled = 0;
    for (auto& p : pos) {
      const bool a = rng() & 1, b = rng() & 1;
      p = std::size_t{a} + std::size_t{b};
      agree += a == b;
      pooled += p;
    }
    const double share = pooled / (2.0 * static_cast<double>(n));
    const double pe = share * share + (1 - share) * (1 - share);
    const auto k = fleiss_kappa(pos, 2);
    REQUIRE(k);
    if (pe == 1.0) continue;
    CHECK(k->value == doctest::Approx((agree / static_cast<double>(n) - pe) / (1 - pe)));
  }
}

TEST_CASE("gate uses a strict lower bound") {
  AgreementReport report;
  report.per_worker_kappa = {{"low", 0.19}, {"edge", 0.20}, {"high", 0.9}};
  BatchPolicy policy;
  CHECK(gate_workers(report, policy) == std::set<std::string>{"low"});
  policy.kappa_gate = 0.95;
  CHECK(gate_workers(report, policy) == std::set<std::string>{"edge", "high", "low"});
}

TEST_CASE("agreement report flags an adversarial worker") {
  const std::vector<bool> truth{true, false, false, true, false, true, true, false, true, false};
  std::vector<bool> inverted;
  for (bool t : truth) inverted.push_back(!t);
  std::vector<WorkerLabel> labels;
  for (const auto& w : {"w1", "w2", "w3"}) {
    auto l = labels_for(w, truth);
    labels.insert(labels.end(), l.begin(), l.end());
  }
  auto bad = labels_for("w4", inverted);
  labels.insert(labels.end(), bad.begin(), bad.end());

  const auto report = agreement_report(labels);
  CHECK(report.item_count == 10);
  CHECK(report.pairwise_kappa.at({"w1", "w2"}) == 1.0);
  CHECK(report.pairwise_kappa.at({"w1", "w4"}) == -1.0);
  CHECK(report.pairwise_items.at({"w2", "w3"}) == 10);
  CHECK(report.per_worker_kappa.at("w1") == 1.0);
  CHECK(report.per_worker_kappa.at("w4") == -1.0);
  CHECK(report.per_worker_pairwise_mean.at("w1") == doctest::Approx(1.0 / 3.0));
  REQUIRE(report.mean_pairwise_kappa);
  CHECK(*report.mean_pairwise_kappa == doctest::Approx(0.0));
  CHECK(report.fleiss_raters == 4);
  CHECK(report.fleiss_items == 10);
  REQUIRE(report.fleiss_kappa);
  CHECK(gate_workers(report, BatchPolicy{}) == std::set<std::string>{"w4"});

  const auto back = AgreementReport::from_json(nlohmann::json::parse(report.to_json().dump()));
  CHECK(back.pairwise_kappa == report.pairwise_kappa);
  CHECK(back.per_worker_kappa == report.per_worker_kappa);
  CHECK(back.fleiss_kappa == report.fleiss_kappa);
  CHECK(back.item_count == report.item_count);
}

TEST_CASE("agreement report degenerate inputs") {
  CHECK_FALSE(agreement_report(labels_for("solo", {true, false})).warnings.empty());
  std::vector<WorkerLabel> disjoint{{"a", "p1", true, 1, std::nullopt},
                                    {"b", "p2", true, 1, std::nullopt}};
  const auto r = agreement_report(disjoint);
  CHECK(r.pairwise_kappa.empty());
  CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("batch policy") {
  BatchPolicy p;
  CHECK(p.thresholds == std::vector<double>{0.90, 0.95, 0.98});
  CHECK(p.kappa_gate == 0.2);
  CHECK(p.annotators_per_item == 3);
  const auto cfg = KeyValueConfig::parse(
      "thresholds = 0.5, 0.6\nkappa_gate = 0.3\nannotators_per_item = 5\n", "t");
  const auto q = BatchPolicy::from_config(cfg);
  CHECK(q.thresholds == std::vector<double>{0.5, 0.6});
  CHECK(q.annotators_per_item == 5);
  CHECK_THROWS_AS(BatchPolicy::from_config(KeyValueConfig::parse("thresholds = 0.9, 0.8\n", "t")),
                  ConfigError);
  CHECK_THROWS_AS(BatchPolicy::from_config(KeyValueConfig::parse("kappa_gate = 2\n", "t")),
                  ConfigError);
}

TEST_CASE("batch export and partition") {
  std::vector<std::string> ids{"s:1", "s:2", "s:3"};
  std::map<std::string, std::string> texts{{"s:1", "one"}, {"s:2", "two, \"2\""}, {"s:3", "three"}};
  const auto f = export_batch(ids, texts, 2, BatchPolicy{});
  CHECK(f.csv == "post_id,text\ns:1,one\ns:2,\"two, \"\"2\"\"\"\ns:3,three\n");
  CHECK(f.manifest["required_qualification_rate"] == 0.95);
  CHECK(f.manifest["row_count"] == 3);
  CHECK(f.manifest["batch_index"] == 2);
  CHECK_THROWS_AS(export_batch(ids, texts, 4, BatchPolicy{}), DataError);
  CHECK_THROWS_AS(export_batch(ids, texts, 0, BatchPolicy{}), DataError);
  CHECK_THROWS_AS(export_batch({}, texts, 1, BatchPolicy{}), DataError);
  texts.erase("s:3");
  CHECK_THROWS_AS(export_batch(ids, texts, 1, BatchPolicy{}), DataError);

  std::vector<std::string> ten;
  for (int i = 0; i < 10; ++i) ten.push_back(std::to_string(i));
  const auto parts = partition_batches(ten, 3);
  REQUIRE(parts.size() == 3);
  CHECK(parts[0] == std::vector<std::string>{"0", "1", "2", "3"});
  CHECK(parts[1].size() == 3);
  CHECK(parts[2] == std::vector<std::string>{"7", "8", "9"});
  CHECK(partition_batches(std::span<const std::string>(ten).first(2), 3)[2].empty());
  CHECK_THROWS_AS(partition_batches(ten, 0), DataError);
}

TEST_CASE("worker label CSV") {
  std::istringstream in(
      "worker_id,post_id,label,batch_index,submitted_at\n"
      "w1,s:1,TRUE,1,2024-01-02T03:04:05Z\n"
      "w2,s:1,false,2,\n");
  const auto labels = read_worker_labels(in);
  REQUIRE(labels.size() == 2);
  CHECK(labels[0].label);
  CHECK(labels[0].submitted_at);
  CHECK_FALSE(labels[1].label);
  CHECK(labels[1].batch_index == 2);
  std::ostringstream out;
  write_worker_labels(out, labels);
  std::istringstream again(out.str());
  const auto back = read_worker_labels(again);
  REQUIRE(back.size() == 2);
  CHECK(back[0].submitted_at == labels[0].submitted_at);
  CHECK(back[1].worker_id == "w2");

  std::istringstream bad_label("worker_id,post_id,label,batch_index\nw,p,yes,1\n");
  CHECK_THROWS_AS(read_worker_labels(bad_label), DataError);
  std::istringstream missing("worker_id,post_id,label\nw,p,true\n");
  CHECK_THROWS_AS(read_worker_labels(missing), DataError);
  std::istringstream bad_batch("worker_id,post_id,label,batch_index\nw,p,true,0\n");
  CHECK_THROWS_AS(read_worker_labels(bad_batch), DataError);
}

TEST_CASE("labeled examples JSONL") {
  std::vector<LabeledExample> v{{"s:1", true, 2, 1, {"a", "b", "c"}, 1},
                                {"i:2", false, 0, 3, {"a", "b", "d"}, 3}};
  std::ostringstream out;
  write_labeled_examples(out, v);
  std::istringstream in(out.str());
  const auto back = read_labeled_examples(in);
  REQUIRE(back.size() == 2);
  CHECK(back[1].annotator_ids == v[1].annotator_ids);
  CHECK(back[1].batch_index == 3);
  CHECK(back[0].gold_label);
}
