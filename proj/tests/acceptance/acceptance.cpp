// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any of them fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nfkit/annotation.hpp"
#include "nfkit/clean.hpp"
#include "nfkit/evaluation.hpp"
#include "nfkit/inference.hpp"
#include "nfkit/lexicon.hpp"
#include "nfkit/prompt.hpp"
#include "nfkit/sampling.hpp"
#include "pipeline_fixture.hpp"
#include "verdict_cases.hpp"

using namespace nfkit;
using namespace nfkit::testing;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

const std::string kData = NFKIT_TEST_DATA_DIR;
const std::string kTests = NFKIT_TEST_DIR;

// Collects failures for one criterion; `summary` is printed either way.
struct Result {
  std::vector<std::string> failures;
  std::string summary;

  void expect(bool ok, const std::string& what) {
    if (!ok && failures.size() < 5) failures.push_back(what);
    if (!ok) ++failed;
  }
  std::size_t failed = 0;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

Result cleaning() {
  Result r;
  std::ifstream in(kTests + "/fixtures/cleaning_cases.json");
  const auto cases = nlohmann::json::parse(in);
  r.expect(cases.size() == 30, "fixture has " + std::to_string(cases.size()) + " cases");
  const CleaningConfig config;
  std::size_t citations = 0, links = 0;
  const auto t0 = Clock::now();
  for (const auto& c : cases) {
    const auto name = c.at("name").get<std::string>();
    const Source source = *parse_source(c.at("source").get<std::string>());
    const auto out = clean_text(c.at("body").get<std::string>(), source, config);
    citations += out.counts.citations_rewritten;
    links += out.counts.links_removed;
    r.expect(out.text == c.at("expected").get<std::string>(), name + ": output differs");
    r.expect(!contains_citation(out.text), name + ": citation left");
    r.expect(!contains_url(out.text), name + ": url left");
    const auto again = clean_text(out.text, source, config);
    r.expect(again.text == out.text && !again.counts.any(), name + ": not idempotent");
  }
  const double secs = seconds_since(t0);
  r.expect(secs < 1.0, "took " + fmt(secs) + " s");
  r.summary = std::to_string(cases.size()) + " cases, " + std::to_string(citations) +
              " citations rewritten, " + std::to_string(links) + " links removed, " +
              fmt(secs * 1000, 1) + " ms";
  return r;
}

Result merge_arithmetic() {
  Result r;
  auto posts = [](Source s, std::size_t n, const char* when) {
    const auto ts = *parse_timestamp(when, "rfc3339");
    std::vector<CleanPost> out(n);
    for (std::size_t i = 0; i < n; ++i) {
      out[i].id = std::to_string(i);
      out[i].source = s;
      out[i].timestamp = ts;
      out[i].text = "x";
      out[i].char_len = 1;
    }
    return out;
  };
  MergePolicy policy;
  policy.expected_counts = ExpectedCounts{63569, 585698, 649267};
  const auto merged = window_and_merge(posts(Source::iron_march, 63569, "2017-01-01T00:00:00Z"),
                                       posts(Source::stormfront, 585698, "2018-01-01T00:00:00Z"),
                                       policy);
  r.expect(merged.size() == 649267, "merged total " + std::to_string(merged.size()));
  r.expect(merged.warnings.empty(), "merge warned");
  std::map<std::string, std::uint64_t> counts;
  for (const auto& [k, v] : merged.counts_by_source()) counts[k] = v;
  const auto plan = plan_sample(counts, 1000, 0);
  const std::map<std::string, std::uint64_t> expected{{"iron_march", 98}, {"stormfront", 902}};
  r.expect(plan.per_source_quota == expected, "quota differs");
  r.summary = "total " + std::to_string(merged.size()) + ", quotas " +
              std::to_string(plan.per_source_quota.at("iron_march")) + "/" +
              std::to_string(plan.per_source_quota.at("stormfront"));
  return r;
}

Result split_sizes_exact() {
  Result r;
  std::vector<std::string> ids;
  for (int i = 0; i < 1000; ++i) ids.push_back("post-" + std::to_string(i));
  const auto a = split(ids, {0.8, 0.1, 0.1}, 42);
  const auto b = split(ids, {0.8, 0.1, 0.1}, 42);
  r.expect(a.train_ids.size() == 800 && a.validation_ids.size() == 100 &&
               a.test_ids.size() == 100,
           "sizes differ");
  std::set<std::string> seen;
  for (const auto* part : {&a.train_ids, &a.validation_ids, &a.test_ids}) {
    for (const auto& id : *part) r.expect(seen.insert(id).second, "id in two partitions: " + id);
  }
  r.expect(seen == std::set<std::string>(ids.begin(), ids.end()), "union incomplete");
  r.expect(a.train_ids == b.train_ids && a.validation_ids == b.validation_ids &&
               a.test_ids == b.test_ids,
           "same seed gave a different split");
  r.summary = std::to_string(a.train_ids.size()) + "/" + std::to_string(a.validation_ids.size()) +
              "/" + std::to_string(a.test_ids.size());
  return r;
}

Result majority_vote() {
  Result r;
  for (int mask = 0; mask < 8; ++mask) {
    std::vector<WorkerLabel> labels;
    int positives = 0;
    for (int w = 0; w < 3; ++w) {
      const bool l = (mask >> w) & 1;
      positives += l;
      labels.push_back({"w" + std::to_string(w), "post", l, 1, std::nullopt});
    }
    const auto agg = aggregate(labels);
    r.expect(agg.examples.size() == 1 && agg.anomalies.empty() &&
                 agg.examples[0].gold_label == (positives >= 2),
             "combination " + std::to_string(mask));
  }
  r.summary = "8/8 combinations";
  return r;
}

// Counts the four cells and applies (p_o - p_e) / (1 - p_e).
double kappa_by_formula(const bool* a, const bool* b, std::size_t n) {
  double n11 = 0, n10 = 0, n01 = 0, n00 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i] && b[i]) ++n11;
    else if (a[i]) ++n10;
    else if (b[i]) ++n01;
    else ++n00;
  }
  const double total = static_cast<double>(n);
  const double po = (n11 + n00) / total;
  const double pe = ((n11 + n10) * (n11 + n01) + (n00 + n01) * (n00 + n10)) / (total * total);
  if (pe == 1.0) return po == 1.0 ? 1.0 : 0.0;
  return (po - pe) / (1.0 - pe);
}

Result kappa() {
  Result r;
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int iter = 0; iter < 100000; ++iter) {
    const std::size_t n = 1 + rng() % 6;
    bool a[6], b[6];
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng() & 1;
      b[i] = rng() & 1;
    }
    const double got = cohen_kappa({a, n}, {b, n}).value;
    const double delta = std::abs(got - kappa_by_formula(a, b, n));
    worst = std::max(worst, delta);
    r.expect(delta <= 1e-9, "pair " + std::to_string(iter) + " off by " + std::to_string(delta));
  }
  const bool x[] = {true, false, true, true, false, false};
  r.expect(cohen_kappa({x, 6}, {x, 6}).value == 1.0, "perfect agreement is not exactly 1");
  AgreementReport report;
  report.per_worker_kappa = {{"barred", 0.19}, {"kept", 0.20}};
  r.expect(gate_workers(report, BatchPolicy{}) == std::set<std::string>{"barred"},
           "gate at 0.2 misplaced");
  std::ostringstream s;
  s << "1e5 random pairs, max |delta| " << worst << ", gate 0.19 barred / 0.20 kept";
  r.summary = s.str();
  return r;
}

Result prompt_goldens() {
  Result r;
  const auto golden = kTests + "/golden/v1/";
  const auto t = PromptTemplates::load_version(kData, "v1");
  const auto bank = load_exemplars(kData + "/exemplars.json");
  auto dumped = [](const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; };
  const auto zero = build_zero_shot(t, "hello");
  const auto few = build_few_shot(t, "hello", bank.exemplars);
  r.expect(dumped(zero.messages()) == read_text(golden + "zero_shot_hello.json"), "zero-shot");
  r.expect(zero.flatten() == read_text(golden + "zero_shot_hello.flat.txt"), "zero-shot flat");
  r.expect(bank.exemplars.size() == 10 && few.turns.size() == 20, "few-shot turn count");
  r.expect(dumped(few.messages()) == read_text(golden + "few_shot_hello.json"), "few-shot");
  r.expect(dumped(build_zero_shot(t, "He said \"hi\" \\ bye").messages()) ==
               read_text(golden + "zero_shot_escaped.json"),
           "escaping");
  const auto open = build_completion(t, "hello", std::nullopt).render();
  const auto neg = build_completion(t, "hello", false).render();
  const auto pos = build_completion(t, "hello", true).render();
  r.expect(open == read_text(golden + "completion_hello.txt") && open.ends_with("Output:\n"),
           "completion");
  r.expect(neg == read_text(golden + "completion_hello_false.txt") &&
               neg.ends_with("Output: false"),
           "completion false slot");
  r.expect(pos == read_text(golden + "completion_hello_true.txt") &&
               pos.ends_with("Output: true"),
           "completion true slot");
  r.summary = "7 golden files, few-shot " + std::to_string(few.turns.size()) + " turns";
  return r;
}

Result verdict_parsing() {
  Result r;
  const auto refusals = RefusalList::load(kData + "/refusals.txt");
  std::size_t ok = 0, refusal_cases = 0;
  for (const auto& c : kParseTable) {
    const auto got = parse_verdict(c.raw, refusals);
    r.expect(got == c.expected, std::string("\"") + c.raw + "\" parsed as " +
                                    std::string(to_string(got)));
    if (got == c.expected) ++ok;
    if (c.expected == Parsed::refusal) {
      ++refusal_cases;
      r.expect(got != Parsed::negative, std::string("refusal counted negative: ") + c.raw);
    }
  }
  r.summary = std::to_string(ok) + "/" + std::to_string(std::size(kParseTable)) + " cases, " +
              std::to_string(refusal_cases) + " refusals";
  return r;
}

Result metric_values() {
  Result r;
  const auto s = metrics(ConfusionMatrix{9, 1, 2, 8, 0});
  auto near = [](const std::optional<double>& v, double want) {
    return v && std::abs(*v - want) <= 5e-5;
  };
  r.expect(near(s.accuracy, 0.8500), "accuracy");
  r.expect(near(s.precision, 0.9000), "precision");
  r.expect(near(s.recall, 0.8182), "recall");
  r.expect(near(s.f1, 0.8571), "f1");

  std::mt19937_64 rng(99);
  const Parsed classes[] = {Parsed::positive, Parsed::negative, Parsed::refusal,
                            Parsed::unparseable};
  for (int iter = 0; iter < 100; ++iter) {
    const std::size_t n = 1 + rng() % 150;
    std::map<std::string, bool> gold;
    std::vector<Verdict> verdicts;
    ConfusionMatrix want;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string id = "p" + std::to_string(i);
      const bool g = rng() & 1;
      const Parsed p = classes[rng() % 4];
      gold[id] = g;
      verdicts.push_back({id, "m", Modality::zero_shot, "", p, 0, 1, std::nullopt});
      if (p == Parsed::positive) (g ? want.tp : want.fp)++;
      else if (p == Parsed::negative) (g ? want.fn : want.tn)++;
      else want.excluded++;
    }
    r.expect(confusion(verdicts, gold) == want, "fixture " + std::to_string(iter));
  }
  r.summary = "acc " + fmt(*s.accuracy) + " p " + fmt(*s.precision) + " r " + fmt(*s.recall) +
              " f1 " + fmt(*s.f1) + ", 100 random tallies";
  return r;
}

Result end_to_end() {
  Result r;
  const auto t0 = Clock::now();
  TranscriptEndpoint server;
  TempDir dir;
  const auto config = dir.path() / "pipeline.ini";
  const auto work = dir.path() / "work";
  write_text(config, e2e_config(server.base_url()));

  auto run = [&](std::vector<std::string> args) {
    const auto res = cli(config, args);
    r.expect(res.code == kExitOk, args[0] + " exited " + std::to_string(res.code) + ": " + res.err);
    return res.code == kExitOk;
  };
  bool ok = true;
  for (const char* stage : {"ingest", "clean", "merge", "sample"}) ok = ok && run({stage});
  ok = ok && run({"batch-export", "--content-warning"});
  std::vector<std::string> import{"batch-import"};
  for (int b = 1; b <= 3; ++b) {
    import.push_back("--labels");
    import.push_back((e2e_dir() / ("labels_batch" + std::to_string(b) + ".csv")).string());
  }
  ok = ok && run(import);
  for (const char* stage : {"agreement", "gate", "split"}) ok = ok && run({stage});
  for (const char* modality : {"zero_shot", "few_shot"}) {
    ok = ok && run({"prompt-run", "--endpoint", "mock", "--modality", modality});
  }
  ok = ok && run({"evaluate"}) && run({"report"});
  if (!ok) {
    r.summary = "pipeline stopped early";
    return r;
  }

  std::ifstream test_in(work / "split" / "gold" / "test.jsonl");
  const auto test = read_gold_examples(test_in);
  const auto report = nlohmann::json::parse(read_text(work / "report" / "report.json"));
  std::map<std::string, nlohmann::json> by_modality;
  for (const auto& rep : report.at("reports")) {
    if (rep.at("model_name") == "mock") by_modality[rep.at("modality")] = rep;
  }
  std::ostringstream summary;
  for (const char* modality : {"zero_shot", "few_shot"}) {
    ConfusionMatrix want;
    for (const auto& g : test) {
      const auto cls = server.expected_class(g.text, modality);
      if (cls == "positive") (g.label ? want.tp : want.fp)++;
      else if (cls == "negative") (g.label ? want.fn : want.tn)++;
      else want.excluded++;
    }
    if (!by_modality.count(modality)) {
      r.expect(false, std::string("report lacks ") + modality);
      continue;
    }
    const auto got = ConfusionMatrix::from_json(by_modality[modality].at("confusion_last_run"));
    r.expect(got == want, std::string(modality) + " confusion differs from transcript");
    summary << modality << " tp " << got.tp << " fp " << got.fp << " fn " << got.fn << " tn "
            << got.tn << " excluded " << got.excluded << "; ";
  }
  r.expect(test.size() == 5, "test split has " + std::to_string(test.size()) + " posts");
  r.expect(server.request_count() == 2 * test.size(),
           "endpoint saw " + std::to_string(server.request_count()) + " requests");
  r.expect(read_text(work / "report" / "report.txt").find("zero_shot") != std::string::npos,
           "report table lacks zero_shot");
  const double secs = seconds_since(t0);
  r.expect(secs < 30.0, "took " + fmt(secs, 1) + " s");
  summary << fmt(secs, 2) << " s";
  r.summary = summary.str();
  return r;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Result()>>> criteria{
      {"cleaning rules", cleaning},
      {"merge arithmetic", merge_arithmetic},
      {"split 80/10/10", split_sizes_exact},
      {"majority vote", majority_vote},
      {"cohen kappa and gate", kappa},
      {"prompt goldens", prompt_goldens},
      {"verdict parsing", verdict_parsing},
      {"metrics", metric_values},
      {"end-to-end pipeline", end_to_end},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Result r;
    try {
      r = check();
    } catch (const std::exception& e) {
      r.expect(false, std::string("exception: ") + e.what());
    }
    const bool pass = r.failed == 0;
    if (!pass) ++failed;
    std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << r.summary;
    for (const auto& f : r.failures) std::cout << " [" << f << "]";
    std::cout << "\n";
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
