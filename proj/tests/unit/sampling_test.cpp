#include <doctest.h>

#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "nfkit/error.hpp"
#include "nfkit/sampling.hpp"
#include "schema_check.hpp"

using namespace nfkit;
using nfkit::testing::schema_errors;

namespace {

std::vector<std::string> make_ids(std::size_t n, const std::string& prefix = "p") {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(prefix + std::to_string(i));
  return ids;
}

std::set<std::string> as_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST_CASE("plan for the full corpus") {
  const auto plan = plan_sample({{"iron_march", 63569}, {"stormfront", 585698}}, 1000, 7);
  CHECK(plan.per_source_quota.at("iron_march") == 98);
  CHECK(plan.per_source_quota.at("stormfront") == 902);
  CHECK(plan.seed == 7);
  const auto back = SamplePlan::from_json(nlohmann::json::parse(plan.to_json().dump()));
  CHECK(back.per_source_quota == plan.per_source_quota);
  CHECK(back.n_total == 1000);
}

TEST_CASE("plan ties go to the first name") {
  const auto plan = plan_sample({{"a", 1}, {"b", 1}, {"c", 1}}, 2, 0);
  CHECK(plan.per_source_quota.at("a") == 1);
  CHECK(plan.per_source_quota.at("b") == 1);
  CHECK(plan.per_source_quota.at("c") == 0);
}

TEST_CASE("property: plan is a largest-remainder apportionment") {
  std::mt19937_64 rng(99);
  for (int iter = 0; iter < 3000; ++iter) {
    std::map<std::string, std::uint64_t> counts;
    const auto k = 1 + rng() % 5;
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < k; ++i) {
      const auto c = 1 + rng() % 1000;
      counts["s" + std::to_string(i)] = c;
      total += c;
    }
    const auto n = rng() % (total + 1);
    const auto plan = plan_sample(counts, n, 0);
    std::uint64_t sum = 0;
    for (const auto& [name, c] : counts) {
      const auto q = plan.per_source_quota.at(name);
      sum += q;
      // floor(n*c/total) <= q <= ceil(n*c/total), checked without division
      CHECK(q * total <= n * c + total - 1);
      CHECK((q + 1) * total > n * c);
    }
    CHECK(sum == n);
    // Every rounded-up source has a remainder at least as large as every
    // rounded-down source.
    for (const auto& [a, ca] : counts) {
      for (const auto& [b, cb] : counts) {
        const bool up_a = plan.per_source_quota.at(a) * total > n * ca;
        const bool up_b = plan.per_source_quota.at(b) * total > n * cb;
        if (up_a && !up_b) CHECK((n * ca) % total >= (n * cb) % total);
      }
    }
  }
}

TEST_CASE("plan errors") {
  CHECK_THROWS_AS(plan_sample({}, 1, 0), DataError);
  CHECK_THROWS_AS(plan_sample({{"a", 0}, {"b", 5}}, 1, 0), DataError);
  CHECK_THROWS_AS(plan_sample({{"a", 2}, {"b", 2}}, 5, 0), DataError);
}

TEST_CASE("draw respects quotas and is reproducible") {
  std::map<std::string, std::vector<std::string>> ids{{"iron_march", make_ids(300, "i")},
                                                      {"stormfront", make_ids(2700, "s")}};
  const auto plan = plan_sample({{"iron_march", 300}, {"stormfront", 2700}}, 100, 42);
  const auto a = draw_sample(ids, plan);
  const auto b = draw_sample(ids, plan);
  CHECK(a == b);
  REQUIRE(a.size() == 100);
  CHECK(as_set(a).size() == 100);
  std::size_t iron = 0;
  for (const auto& id : a) iron += id[0] == 'i';
  CHECK(iron == plan.per_source_quota.at("iron_march"));

  auto other = plan;
  other.seed = 43;
  CHECK(draw_sample(ids, other) != a);

  auto greedy = plan;
  greedy.per_source_quota["iron_march"] = 301;
  CHECK_THROWS_AS(draw_sample(ids, greedy), DataError);
}

TEST_CASE("split sizes") {
  const SplitRatios r{0.8, 0.1, 0.1};
  CHECK(split_sizes(1000, r) == std::array<std::size_t, 3>{800, 100, 100});
  CHECK(split_sizes(10, r) == std::array<std::size_t, 3>{8, 1, 1});
  CHECK(split_sizes(7, r) == std::array<std::size_t, 3>{6, 1, 0});
  CHECK(split_sizes(1, r) == std::array<std::size_t, 3>{1, 0, 0});
  CHECK(split_sizes(5, {0.0, 0.5, 0.5}) == std::array<std::size_t, 3>{0, 3, 2});

  std::mt19937_64 rng(5);
  for (int iter = 0; iter < 2000; ++iter) {
    const auto n = rng() % 5000;
    const double a = static_cast<double>(rng() % 1000) / 1000.0;
    const double b = static_cast<double>(rng() % 1000) / 1000.0 * (1.0 - a);
    const SplitRatios rr{a, b, 1.0 - a - b};
    const auto s = split_sizes(n, rr);
    CHECK(s[0] + s[1] + s[2] == n);
    for (int i = 0; i < 3; ++i) {
      const double exact = static_cast<double>(n) * rr[i];
      CHECK(static_cast<double>(s[i]) >= std::floor(exact) - 1);
      CHECK(static_cast<double>(s[i]) <= std::floor(exact) + 1 + 1e-6);
    }
  }
}

TEST_CASE("split of 1000 ids") {
  const auto ids = make_ids(1000);
  const auto s = split(ids, {0.8, 0.1, 0.1}, 2024);
  CHECK(s.train_ids.size() == 800);
  CHECK(s.validation_ids.size() == 100);
  CHECK(s.test_ids.size() == 100);
  std::set<std::string> all;
  for (const auto* part : {&s.train_ids, &s.validation_ids, &s.test_ids}) {
    for (const auto& id : *part) CHECK(all.insert(id).second);
  }
  CHECK(all == as_set(ids));

  const auto again = split(ids, {0.8, 0.1, 0.1}, 2024);
  CHECK(again.train_ids == s.train_ids);
  CHECK(again.validation_ids == s.validation_ids);
  CHECK(again.test_ids == s.test_ids);
  CHECK(split(ids, {0.8, 0.1, 0.1}, 2025).test_ids != s.test_ids);
}

TEST_CASE("stratified split keeps class proportions") {
  const auto ids = make_ids(200);
  std::map<std::string, bool> labels;
  for (std::size_t i = 0; i < ids.size(); ++i) labels[ids[i]] = i % 4 == 0;  // 50 positives
  const auto s = split_stratified(ids, labels, {0.8, 0.1, 0.1}, 11);
  CHECK(s.stratified);
  CHECK(s.size() == 200);
  auto positives = [&](const std::vector<std::string>& part) {
    std::size_t n = 0;
    for (const auto& id : part) n += labels.at(id);
    return n;
  };
  CHECK(positives(s.train_ids) == 40);
  CHECK(positives(s.validation_ids) == 5);
  CHECK(positives(s.test_ids) == 5);
  CHECK(s.test_ids.size() == 20);

  labels.erase(ids[3]);
  CHECK_THROWS_AS(split_stratified(ids, labels, {0.8, 0.1, 0.1}, 11), DataError);
}

TEST_CASE("split errors") {
  const auto ids = make_ids(10);
  CHECK_THROWS_AS(split({}, {0.8, 0.1, 0.1}, 1), DataError);
  CHECK_THROWS_AS(split(ids, {0.8, 0.1, 0.2}, 1), DataError);
  CHECK_THROWS_AS(split(ids, {1.2, -0.1, -0.1}, 1), DataError);
  std::vector<std::string> dup{"a", "b", "a"};
  CHECK_THROWS_AS(split(dup, {0.8, 0.1, 0.1}, 1), DataError);
}

TEST_CASE("gold examples are strict") {
  const GoldExample e{"stormfront:5", "a \"quoted\"\nline", true};
  std::ostringstream out;
  std::vector<GoldExample> v{e, {"iron_march:1", "x", false}};
  write_gold_examples(out, v);
  std::istringstream in(out.str());
  CHECK(read_gold_examples(in) == v);

  using nlohmann::json;
  CHECK_THROWS_AS(gold_example_from_json(json::parse(R"({"post_id":"a","text":"b"})")), DataError);
  CHECK_THROWS_AS(
      gold_example_from_json(json::parse(R"({"post_id":"a","text":"b","label":true,"x":1})")),
      DataError);
  CHECK_THROWS_AS(gold_example_from_json(json::parse(R"({"post_id":"a","text":"b","label":1})")),
                  DataError);
  CHECK_THROWS_AS(gold_example_from_json(json::parse(R"({"post_id":"a","text":"","label":true})")),
                  DataError);
  std::istringstream bad("{\"post_id\":\n");
  CHECK_THROWS_AS(read_gold_examples(bad), DataError);
}

TEST_CASE("gold examples match the published schema") {
  std::ifstream in(std::string(NFKIT_TEST_DATA_DIR) + "/schemas/gold_split.schema.json");
  REQUIRE(in);
  const auto schema = nlohmann::json::parse(in);
  const auto ok = nlohmann::json::parse(to_json(GoldExample{"a", "b", false}).dump());
  CHECK(schema_errors(schema, ok).empty());
  auto extra = ok;
  extra["gold_label"] = true;
  CHECK_FALSE(schema_errors(schema, extra).empty());
}
