#include "stages.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "nfkit/annotation.hpp"
#include "nfkit/clean.hpp"
#include "nfkit/evaluation.hpp"
#include "nfkit/hash.hpp"
#include "nfkit/ingest.hpp"
#include "nfkit/lexicon.hpp"
#include "nfkit/prompt.hpp"
#include "nfkit/sampling.hpp"
#include "nfkit/text.hpp"

namespace nfkit::cli {

namespace {

constexpr Source kSources[] = {Source::iron_march, Source::stormfront};
constexpr const char* kSplits[] = {"train", "validation", "test"};

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  return in;
}

template <typename Fn>
void write_with(const fs::path& p, Fn&& fn) {
  std::ostringstream ss;
  fn(ss);
  write_file(p, ss.str());
}

std::string pretty(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

std::vector<std::string> read_lines(const fs::path& p) {
  auto in = open_in(p);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!text::trim(line).empty()) out.push_back(line);
  }
  return out;
}

MergedCorpus load_corpus(const Workdir& wd) {
  wd.require("merge");
  auto in = open_in(wd.stage_dir("merge") / "corpus.jsonl");
  MergedCorpus c;
  c.posts = read_clean_posts(in);
  for (const auto& p : c.posts) {
    ++(p.source == Source::iron_march ? c.iron_march_count : c.stormfront_count);
  }
  return c;
}

std::map<std::string, std::string> texts_by_key(const MergedCorpus& c) {
  std::map<std::string, std::string> out;
  for (const auto& p : c.posts) out.emplace(p.key(), p.text);
  return out;
}

fs::path run_root(const Workdir& wd) { return wd.root() / "runs"; }

fs::path run_dir(const Workdir& wd, const std::string& name, Modality m, int run) {
  return run_root(wd) / name / std::string(to_string(m)) / ("run_" + std::to_string(run));
}

int next_run_index(const Workdir& wd, const std::string& name, Modality m) {
  int k = 1;
  while (fs::exists(run_dir(wd, name, m, k) / "verdicts.jsonl")) ++k;
  return k;
}

std::vector<GoldExample> load_split(const Workdir& wd, const std::string& split) {
  wd.require("split");
  if (std::find(std::begin(kSplits), std::end(kSplits), split) == std::end(kSplits)) {
    throw ConfigError("unknown split '" + split + "' (train, validation or test)");
  }
  auto in = open_in(wd.stage_dir("split") / "gold" / (split + ".jsonl"));
  return read_gold_examples(in);
}

nlohmann::ordered_json file_entry(const Workdir& wd, const fs::path& p) {
  return {{"path", wd.relative(p)}, {"sha256", sha256_file(p)}};
}

void print_counts(std::ostream& out, const RunManifest& m) {
  out << "verdicts: " << m.total;
  for (const auto& [parsed, n] : m.counts) out << ", " << to_string(parsed) << " " << n;
  out << "\n";
}

}  // namespace

void stage_ingest(Context& ctx) {
  auto& pc = ctx.config;
  if (pc.sources.empty()) {
    throw ConfigError("no [source.*] dump configured (source.iron_march.dump, "
                      "source.stormfront.dump)");
  }
  const auto dir = ctx.workdir.prepare("ingest");
  StageManifest m{"ingest", pc.config_sha256};
  nlohmann::ordered_json stats;
  for (const auto& [source, input] : pc.sources) {
    auto result = ingest_file(input.dump, input.schema, source);
    const auto out = dir / (std::string(to_string(source)) + ".jsonl");
    write_with(out, [&](std::ostream& os) { write_raw_posts(os, result.posts); });
    stats[std::string(to_string(source))] = result.stats.to_json();
    m.inputs.push_back(input.dump);
    m.outputs.push_back(out);
    ctx.out << to_string(source) << ": " << result.stats.accepted << " of "
            << result.stats.total_rows << " rows accepted\n";
  }
  write_file(dir / "stats.json", pretty(stats));
  m.outputs.push_back(dir / "stats.json");
  m.params["sources"] = nlohmann::ordered_json::array();
  for (const auto& [source, _] : pc.sources) {
    m.params["sources"].push_back(to_string(source));
  }
  ctx.workdir.write_manifest(m);
}

void stage_clean(Context& ctx) {
  auto& wd = ctx.workdir;
  wd.require("ingest");
  const auto dir = wd.prepare("clean");
  StageManifest m{"clean", ctx.config.config_sha256};
  nlohmann::ordered_json stats;
  for (Source source : kSources) {
    const auto in_path = wd.stage_dir("ingest") / (std::string(to_string(source)) + ".jsonl");
    if (!fs::exists(in_path)) continue;
    auto in = open_in(in_path);
    const auto raw = read_raw_posts(in);
    CleanStats s;
    const auto cleaned = clean_posts(raw, ctx.config.cleaning, s);
    const auto out = dir / (std::string(to_string(source)) + ".jsonl");
    write_with(out, [&](std::ostream& os) { write_clean_posts(os, cleaned); });
    stats[std::string(to_string(source))] = s.to_json();
    m.inputs.push_back(in_path);
    m.outputs.push_back(out);
    ctx.out << to_string(source) << ": kept " << s.kept << " of " << s.input
            << " (citations " << s.removed.citations_rewritten << ", quotes "
            << s.removed.quotes_removed << ", links " << s.removed.links_removed << ")\n";
  }
  write_file(dir / "stats.json", pretty(stats));
  m.outputs.push_back(dir / "stats.json");
  m.params["min_len"] = ctx.config.cleaning.min_len;
  m.params["max_len"] = ctx.config.cleaning.max_len;
  wd.write_manifest(m);
}

void stage_merge(Context& ctx) {
  auto& wd = ctx.workdir;
  wd.require("clean");
  const auto dir = wd.prepare("merge");
  StageManifest m{"merge", ctx.config.config_sha256};
  std::vector<CleanPost> parts[2];
  for (std::size_t i = 0; i < 2; ++i) {
    const auto p = wd.stage_dir("clean") / (std::string(to_string(kSources[i])) + ".jsonl");
    if (!fs::exists(p)) continue;
    auto in = open_in(p);
    parts[i] = read_clean_posts(in);
    m.inputs.push_back(p);
  }
  const auto corpus =
      window_and_merge(std::move(parts[0]), std::move(parts[1]), ctx.config.merge);
  const auto out = dir / "corpus.jsonl";
  write_with(out, [&](std::ostream& os) { write_clean_posts(os, corpus.posts); });
  nlohmann::ordered_json summary;
  summary["iron_march"] = corpus.iron_march_count;
  summary["stormfront"] = corpus.stormfront_count;
  summary["total"] = corpus.size();
  summary["iron_march_window"] = ctx.config.merge.iron_march_window.to_string();
  summary["stormfront_window"] = ctx.config.merge.stormfront_window.to_string();
  summary["warnings"] = corpus.warnings;
  write_file(dir / "summary.json", pretty(summary));
  m.outputs = {out, dir / "summary.json"};
  wd.write_manifest(m);
  for (const auto& w : corpus.warnings) ctx.err << "warning: " << w << "\n";
  ctx.out << "merged " << corpus.size() << " posts (iron_march " << corpus.iron_march_count
          << ", stormfront " << corpus.stormfront_count << ")\n";
}

void stage_sample(Context& ctx) {
  auto& wd = ctx.workdir;
  const auto corpus = load_corpus(wd);
  const auto dir = wd.prepare("sample");
  std::map<std::string, std::uint64_t> counts;
  for (const auto& [source, n] : corpus.counts_by_source()) {
    if (n > 0) counts[source] = n;
  }
  const auto plan = plan_sample(counts, ctx.config.sample_n, ctx.config.sample_seed);
  const auto ids = draw_sample(corpus, plan);
  write_file(dir / "plan.json", pretty(plan.to_json()));
  write_with(dir / "ids.txt", [&](std::ostream& os) {
    for (const auto& id : ids) os << id << '\n';
  });
  StageManifest m{"sample", ctx.config.config_sha256};
  m.params["seed"] = plan.seed;
  m.params["n_total"] = plan.n_total;
  m.inputs = {wd.stage_dir("merge") / "corpus.jsonl"};
  m.outputs = {dir / "plan.json", dir / "ids.txt"};
  wd.write_manifest(m);
  ctx.out << "sampled " << ids.size() << " posts:";
  for (const auto& [source, q] : plan.per_source_quota) ctx.out << " " << source << " " << q;
  ctx.out << "\n";
}

void stage_batch_export(Context& ctx, std::optional<int> batch) {
  auto& wd = ctx.workdir;
  wd.require("sample");
  const auto corpus = load_corpus(wd);
  const auto texts = texts_by_key(corpus);
  const auto ids = read_lines(wd.stage_dir("sample") / "ids.txt");
  const auto& policy = ctx.config.batches;
  const auto batches = partition_batches(ids, policy.thresholds.size());
  if (batch && (*batch < 1 || static_cast<std::size_t>(*batch) > batches.size())) {
    throw ConfigError("--batch must be between 1 and " + std::to_string(batches.size()));
  }
  const auto dir = wd.prepare("batch-export");
  StageManifest m{"batch-export", ctx.config.config_sha256};
  m.inputs = {wd.stage_dir("sample") / "ids.txt", wd.stage_dir("merge") / "corpus.jsonl"};
  for (std::size_t i = 0; i < batches.size(); ++i) {
    const int index = static_cast<int>(i) + 1;
    if (batch && *batch != index) continue;
    const auto file = export_batch(batches[i], texts, index, policy);
    const auto stem = dir / ("batch_" + std::to_string(index));
    write_file(stem.string() + ".csv", file.csv);
    write_file(stem.string() + ".json", pretty(file.manifest));
    m.outputs.push_back(stem.string() + ".csv");
    m.outputs.push_back(stem.string() + ".json");
    ctx.out << "batch " << index << ": " << batches[i].size() << " posts, qualification "
            << policy.thresholds[i] << " -> " << wd.relative(stem.string() + ".csv") << "\n";
  }
  wd.write_manifest(m);
}

void stage_batch_import(Context& ctx, const std::vector<fs::path>& label_files) {
  auto& wd = ctx.workdir;
  wd.require("batch-export");
  if (label_files.empty()) throw ConfigError("batch-import needs at least one --labels file");
  const auto ids = read_lines(wd.stage_dir("sample") / "ids.txt");
  const std::set<std::string> sampled(ids.begin(), ids.end());
  std::vector<WorkerLabel> labels;
  StageManifest m{"batch-import", ctx.config.config_sha256};
  for (const auto& f : label_files) {
    auto in = open_in(f);
    auto part = read_worker_labels(in);
    for (const auto& l : part) {
      if (!sampled.count(l.post_id)) {
        throw DataError(f.string() + ": post '" + l.post_id + "' is not in the sample");
      }
    }
    labels.insert(labels.end(), part.begin(), part.end());
    m.inputs.push_back(f);
  }
  const auto dir = wd.prepare("batch-import");
  write_with(dir / "worker_labels.csv",
             [&](std::ostream& os) { write_worker_labels(os, labels); });
  m.outputs = {dir / "worker_labels.csv"};
  wd.write_manifest(m);
  std::set<std::string> workers, posts;
  for (const auto& l : labels) {
    workers.insert(l.worker_id);
    posts.insert(l.post_id);
  }
  ctx.out << "imported " << labels.size() << " labels from " << workers.size()
          << " workers on " << posts.size() << " posts\n";
}

namespace {

std::vector<WorkerLabel> load_worker_labels(const Workdir& wd) {
  wd.require("batch-import");
  auto in = open_in(wd.stage_dir("batch-import") / "worker_labels.csv");
  return read_worker_labels(in);
}

}  // namespace

void stage_agreement(Context& ctx) {
  auto& wd = ctx.workdir;
  const auto labels = load_worker_labels(wd);
  const auto report = agreement_report(labels);
  const auto dir = wd.prepare("agreement");
  write_file(dir / "report.json", pretty(report.to_json()));
  StageManifest m{"agreement", ctx.config.config_sha256};
  m.inputs = {wd.stage_dir("batch-import") / "worker_labels.csv"};
  m.outputs = {dir / "report.json"};
  wd.write_manifest(m);
  for (const auto& w : report.warnings) ctx.err << "warning: " << w << "\n";
  ctx.out << std::fixed << std::setprecision(4);
  if (report.mean_pairwise_kappa) {
    ctx.out << "mean pairwise kappa " << *report.mean_pairwise_kappa << "\n";
  }
  if (report.fleiss_kappa) {
    ctx.out << "fleiss kappa " << *report.fleiss_kappa << " over " << report.fleiss_items
            << " items\n";
  }
  for (const auto& [worker, k] : report.per_worker_kappa) {
    ctx.out << "  " << worker << " " << k << "\n";
  }
  ctx.out << std::defaultfloat;
}

void stage_gate(Context& ctx) {
  auto& wd = ctx.workdir;
  wd.require("agreement");
  const auto report = AgreementReport::from_json(
      nlohmann::json::parse(read_file(wd.stage_dir("agreement") / "report.json")));
  const auto& policy = ctx.config.batches;
  const auto excluded = gate_workers(report, policy);
  auto labels = load_worker_labels(wd);
  std::erase_if(labels, [&](const WorkerLabel& l) { return excluded.count(l.worker_id) > 0; });
  const auto result = aggregate(labels, policy.annotators_per_item);

  const auto dir = wd.prepare("gate");
  nlohmann::ordered_json ex;
  ex["kappa_gate"] = policy.kappa_gate;
  ex["excluded_workers"] = nlohmann::ordered_json::array();
  for (const auto& w : excluded) {
    ex["excluded_workers"].push_back({{"worker_id", w}, {"kappa", report.per_worker_kappa.at(w)}});
  }
  write_file(dir / "excluded_workers.json", pretty(ex));
  write_with(dir / "gold.jsonl",
             [&](std::ostream& os) { write_labeled_examples(os, result.examples); });
  write_with(dir / "anomalies.jsonl", [&](std::ostream& os) {
    for (const auto& a : result.anomalies) os << to_json(a).dump() << '\n';
  });
  StageManifest m{"gate", ctx.config.config_sha256};
  m.params["kappa_gate"] = policy.kappa_gate;
  m.params["annotators_per_item"] = policy.annotators_per_item;
  m.inputs = {wd.stage_dir("agreement") / "report.json",
              wd.stage_dir("batch-import") / "worker_labels.csv"};
  m.outputs = {dir / "excluded_workers.json", dir / "gold.jsonl", dir / "anomalies.jsonl"};
  wd.write_manifest(m);
  std::size_t positives = 0;
  for (const auto& e : result.examples) positives += e.gold_label ? 1 : 0;
  ctx.out << "excluded " << excluded.size() << " workers; gold " << result.examples.size()
          << " posts (" << positives << " positive); " << result.anomalies.size()
          << " posts need relabeling\n";
}

void stage_split(Context& ctx) {
  auto& wd = ctx.workdir;
  wd.require("gate");
  auto gin = open_in(wd.stage_dir("gate") / "gold.jsonl");
  const auto gold = read_labeled_examples(gin);
  const auto texts = texts_by_key(load_corpus(wd));
  std::vector<std::string> ids;
  std::map<std::string, bool> labels;
  for (const auto& e : gold) {
    ids.push_back(e.post_id);
    labels[e.post_id] = e.gold_label;
  }
  const auto& pc = ctx.config;
  const auto s = pc.split_stratified
                     ? split_stratified(ids, labels, pc.split_ratios, pc.split_seed)
                     : split(ids, pc.split_ratios, pc.split_seed);

  const auto dir = wd.prepare("split");
  nlohmann::ordered_json j;
  j["seed"] = s.seed;
  j["ratios"] = s.ratios;
  j["stratified"] = s.stratified;
  j["train"] = s.train_ids;
  j["validation"] = s.validation_ids;
  j["test"] = s.test_ids;
  write_file(dir / "split.json", pretty(j));
  StageManifest m{"split", pc.config_sha256};
  m.params["seed"] = s.seed;
  m.params["ratios"] = s.ratios;
  m.params["stratified"] = s.stratified;
  m.inputs = {wd.stage_dir("gate") / "gold.jsonl", wd.stage_dir("merge") / "corpus.jsonl"};
  m.outputs = {dir / "split.json"};
  const std::vector<std::string>* parts[] = {&s.train_ids, &s.validation_ids, &s.test_ids};
  for (std::size_t i = 0; i < 3; ++i) {
    std::vector<GoldExample> rows;
    for (const auto& id : *parts[i]) {
      auto t = texts.find(id);
      if (t == texts.end()) throw DataError("gold post '" + id + "' is not in the corpus");
      rows.push_back({id, t->second, labels.at(id)});
    }
    const auto out = dir / "gold" / (std::string(kSplits[i]) + ".jsonl");
    write_with(out, [&](std::ostream& os) { write_gold_examples(os, rows); });
    m.outputs.push_back(out);
  }
  wd.write_manifest(m);
  ctx.out << "split " << s.size() << " posts: train " << s.train_ids.size() << ", validation "
          << s.validation_ids.size() << ", test " << s.test_ids.size() << "\n";
}

void stage_prompt_run(Context& ctx, const RunOptions& opts) {
  auto& wd = ctx.workdir;
  auto& pc = ctx.config;
  auto ep = pc.endpoints.find(opts.endpoint);
  if (ep == pc.endpoints.end()) {
    throw ConfigError("no [endpoint." + opts.endpoint + "] section in the config");
  }
  const auto gold = load_split(wd, opts.split);
  const auto templates = PromptTemplates::load_version(pc.data_dir.string(), pc.template_version);
  auto bank = load_exemplars(pc.exemplars.string());
  if (pc.shuffle_exemplars) bank.exemplars = shuffled_exemplars(bank.exemplars, pc.exemplar_seed);
  const auto refusals = RefusalList::load(pc.refusals.string());

  std::vector<PostInput> posts;
  for (const auto& g : gold) posts.push_back({g.post_id, g.text});
  PromptBuilder build;
  switch (opts.modality) {
    case Modality::zero_shot:
      build = [&](const PostInput& p) -> Prompt { return build_zero_shot(templates, p.text); };
      break;
    case Modality::few_shot:
      build = [&](const PostInput& p) -> Prompt {
        return build_few_shot(templates, p.text, bank.exemplars);
      };
      break;
    case Modality::finetuned:
      // Fine-tuned LLMs are queried with the training prompt, output left open.
      build = [&](const PostInput& p) -> Prompt {
        return build_completion(templates, p.text, std::nullopt).render();
      };
      break;
  }

  const ModelEndpoint endpoint = ep->second;
  Classifier classifier(endpoint, [endpoint] { return make_http_transport(endpoint); },
                        refusals);
  const int run = opts.run.value_or(next_run_index(wd, opts.endpoint, opts.modality));
  if (run < 1) throw ConfigError("--run must be >= 1");
  const auto result =
      batch_classify(classifier, posts, build, opts.modality, templates.version);

  const auto dir = run_dir(wd, opts.endpoint, opts.modality, run);
  write_with(dir / "verdicts.jsonl",
             [&](std::ostream& os) { write_verdicts(os, result.verdicts); });
  auto manifest = result.manifest.to_json();
  manifest["split"] = opts.split;
  manifest["run"] = run;
  manifest["exemplar_order"] = pc.shuffle_exemplars ? "shuffled" : "appendix";
  if (pc.shuffle_exemplars) manifest["exemplar_seed"] = pc.exemplar_seed;
  manifest["inputs"] = {file_entry(wd, wd.stage_dir("split") / "gold" / (opts.split + ".jsonl")),
                        file_entry(wd, pc.data_dir / "templates" / (pc.template_version + ".json")),
                        file_entry(wd, pc.exemplars), file_entry(wd, pc.refusals)};
  manifest["outputs"] = {file_entry(wd, dir / "verdicts.jsonl")};
  write_file(dir / "manifest.json", pretty(manifest));
  ctx.out << opts.endpoint << " " << to_string(opts.modality) << " run " << run << ": ";
  print_counts(ctx.out, result.manifest);
}

void stage_finetune(Context& ctx, std::optional<int> run_opt) {
  auto& wd = ctx.workdir;
  auto& pc = ctx.config;
  if (!pc.trainer) throw ConfigError("no [trainer] section with base_model in the config");
  const auto& t = *pc.trainer;
  const auto test = load_split(wd, "test");
  const int run = run_opt.value_or(next_run_index(wd, t.name, Modality::finetuned));
  if (run < 1) throw ConfigError("--run must be >= 1");

  const auto gold_dir = fs::absolute(wd.stage_dir("split") / "gold");
  const auto model_dir =
      fs::absolute(wd.root() / "finetune" / t.name / ("run_" + std::to_string(run)));
  const auto out_dir = run_dir(wd, t.name, Modality::finetuned, run);
  fs::create_directories(model_dir);
  fs::create_directories(out_dir);
  const auto raw_verdicts = fs::absolute(model_dir / "predictions.jsonl");

  std::ostringstream lr;
  lr << std::setprecision(17) << t.learning_rate;
  std::vector<std::string> train = t.command;
  train.insert(train.end(), {"train", "--gold-dir", gold_dir.string(), "--output-dir",
                             model_dir.string(), "--base-model", t.base_model,
                             "--learning-rate", lr.str(), "--epochs",
                             std::to_string(t.epochs), "--batch-size",
                             std::to_string(t.batch_size), "--seed", std::to_string(t.seed)});
  std::vector<std::string> predict = t.command;
  predict.insert(predict.end(), {"predict", "--model-dir", model_dir.string(), "--gold-dir",
                                 gold_dir.string(), "--split", "test", "--output",
                                 raw_verdicts.string(), "--model-name", t.name});
  for (const auto* argv : {&train, &predict}) {
    const int rc = run_process(*argv);
    if (rc != 0) {
      throw Error("trainer command '" + (*argv)[t.command.size()] + "' exited with status " +
                  std::to_string(rc));
    }
  }

  auto in = open_in(raw_verdicts);
  const auto verdicts = read_verdicts(in);
  std::set<std::string> expected;
  for (const auto& g : test) expected.insert(g.post_id);
  std::set<std::string> seen;
  for (const auto& v : verdicts) {
    if (v.modality != Modality::finetuned) {
      throw DataError("trainer verdict for '" + v.post_id + "' is not modality finetuned");
    }
    if (!expected.count(v.post_id) || !seen.insert(v.post_id).second) {
      throw DataError("trainer verdict for unexpected or repeated post '" + v.post_id + "'");
    }
  }
  if (seen.size() != expected.size()) {
    throw DataError("trainer returned " + std::to_string(seen.size()) + " verdicts for " +
                    std::to_string(expected.size()) + " test posts");
  }
  write_with(out_dir / "verdicts.jsonl",
             [&](std::ostream& os) { write_verdicts(os, verdicts); });
  nlohmann::ordered_json manifest;
  manifest["trainer"] = {{"name", t.name},
                         {"command", t.command},
                         {"base_model", t.base_model},
                         {"learning_rate", t.learning_rate},
                         {"epochs", t.epochs},
                         {"batch_size", t.batch_size},
                         {"seed", t.seed}};
  manifest["modality"] = "finetuned";
  manifest["split"] = "test";
  manifest["run"] = run;
  manifest["created_at"] = now_rfc3339();
  manifest["inputs"] = {file_entry(wd, gold_dir / "train.jsonl"),
                        file_entry(wd, gold_dir / "validation.jsonl"),
                        file_entry(wd, gold_dir / "test.jsonl")};
  manifest["outputs"] = {file_entry(wd, out_dir / "verdicts.jsonl")};
  write_file(out_dir / "manifest.json", pretty(manifest));
  ctx.out << t.name << " finetuned run " << run << ": " << verdicts.size() << " verdicts\n";
}

namespace {

struct RunFiles {
  std::string name;
  Modality modality;
  int run;
  fs::path dir;
};

std::vector<RunFiles> find_runs(const Workdir& wd) {
  std::vector<RunFiles> runs;
  const auto root = run_root(wd);
  if (!fs::exists(root)) return runs;
  for (const auto& name : fs::directory_iterator(root)) {
    if (!name.is_directory()) continue;
    for (const auto& mod : fs::directory_iterator(name.path())) {
      if (!mod.is_directory()) continue;
      Modality m;
      try {
        m = parse_modality(mod.path().filename().string());
      } catch (const DataError&) {
        continue;
      }
      for (const auto& r : fs::directory_iterator(mod.path())) {
        const auto fname = r.path().filename().string();
        if (!r.is_directory() || fname.rfind("run_", 0) != 0) continue;
        if (!fs::exists(r.path() / "verdicts.jsonl")) continue;
        int k = 0;
        try {
          k = std::stoi(fname.substr(4));
        } catch (const std::exception&) {
          continue;
        }
        runs.push_back({name.path().filename().string(), m, k, r.path()});
      }
    }
  }
  std::sort(runs.begin(), runs.end(), [](const RunFiles& a, const RunFiles& b) {
    return std::tie(a.name, a.modality, a.run) < std::tie(b.name, b.modality, b.run);
  });
  return runs;
}

std::string run_split(const RunFiles& r) {
  const auto mpath = r.dir / "manifest.json";
  if (!fs::exists(mpath)) return "test";
  const auto j = nlohmann::json::parse(read_file(mpath));
  return j.value("split", std::string("test"));
}

std::map<std::string, bool> split_labels(const Workdir& wd, const std::string& split) {
  std::map<std::string, bool> out;
  for (const auto& g : load_split(wd, split)) out[g.post_id] = g.label;
  return out;
}

}  // namespace

void stage_evaluate(Context& ctx) {
  auto& wd = ctx.workdir;
  wd.require("split");
  const auto runs = find_runs(wd);
  if (runs.empty()) {
    throw MissingStageError("prompt-run", "no verdict files under " + run_root(wd).string());
  }
  const auto dir = wd.prepare("evaluate");
  StageManifest m{"evaluate", ctx.config.config_sha256};
  std::map<std::string, std::map<std::string, bool>> gold_cache;
  for (std::size_t i = 0; i < runs.size();) {
    std::size_t j = i;
    std::vector<ConfusionMatrix> confusions;
    for (; j < runs.size() && runs[j].name == runs[i].name &&
           runs[j].modality == runs[i].modality;
         ++j) {
      const auto split = run_split(runs[j]);
      if (!gold_cache.count(split)) gold_cache[split] = split_labels(wd, split);
      auto in = open_in(runs[j].dir / "verdicts.jsonl");
      const auto verdicts = read_verdicts(in);
      confusions.push_back(confusion(verdicts, gold_cache[split]));
      m.inputs.push_back(runs[j].dir / "verdicts.jsonl");
    }
    const auto report = make_report(runs[i].name, runs[i].modality, std::move(confusions));
    const std::string stem = runs[i].name + "__" + std::string(to_string(runs[i].modality));
    write_file(dir / (stem + ".json"), pretty(report.to_json()));
    write_file(dir / (stem + ".confusion.csv"), confusion_grid_csv(report.last_confusion()));
    m.outputs.push_back(dir / (stem + ".json"));
    m.outputs.push_back(dir / (stem + ".confusion.csv"));
    const auto& c = report.last_confusion();
    ctx.out << stem << ": " << report.run_count() << " run(s); last tp " << c.tp << " fp "
            << c.fp << " fn " << c.fn << " tn " << c.tn << " excluded " << c.excluded << "\n";
    i = j;
  }
  wd.write_manifest(m);
}

void stage_report(Context& ctx) {
  auto& wd = ctx.workdir;
  wd.require("evaluate");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(wd.stage_dir("evaluate"))) {
    const auto name = e.path().filename().string();
    if (name != "manifest.json" && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<EvalReport> reports;
  for (const auto& f : files) {
    reports.push_back(EvalReport::from_json(nlohmann::json::parse(read_file(f))));
  }
  const auto rendered = render_report(reports);
  const auto dir = wd.prepare("report");
  auto json = rendered.json;
  json["reports"] = nlohmann::ordered_json::array();
  for (const auto& r : reports) json["reports"].push_back(r.to_json());
  write_file(dir / "report.json", pretty(json));
  write_file(dir / "report.txt", rendered.text);
  StageManifest m{"report", ctx.config.config_sha256};
  m.inputs = files;
  m.outputs = {dir / "report.json", dir / "report.txt"};
  wd.write_manifest(m);
  ctx.out << rendered.text;
}

void stage_errors(Context& ctx, const std::string& name, Modality modality,
                  std::optional<int> run_opt) {
  auto& wd = ctx.workdir;
  int run = run_opt.value_or(next_run_index(wd, name, modality) - 1);
  const auto dir = run_dir(wd, name, modality, run);
  if (run < 1 || !fs::exists(dir / "verdicts.jsonl")) {
    throw MissingStageError("prompt-run", "no verdicts for " + name + " " +
                                              std::string(to_string(modality)));
  }
  RunFiles rf{name, modality, run, dir};
  const auto gold = load_split(wd, run_split(rf));
  std::map<std::string, const GoldExample*> by_id;
  for (const auto& g : gold) by_id[g.post_id] = &g;
  const auto lexicon = load_lexicon(ctx.config.lexicon.string());
  auto in = open_in(dir / "verdicts.jsonl");
  std::size_t shown = 0;
  for (const auto& v : read_verdicts(in)) {
    auto it = by_id.find(v.post_id);
    if (it == by_id.end()) throw DataError("verdict for unknown post '" + v.post_id + "'");
    const bool truth = it->second->label;
    const bool wrong = (v.parsed == Parsed::positive && !truth) ||
                       (v.parsed == Parsed::negative && truth);
    if (!wrong && v.parsed != Parsed::refusal && v.parsed != Parsed::unparseable) continue;
    ++shown;
    ctx.out << v.post_id << "\tgold=" << (truth ? "true" : "false")
            << "\tparsed=" << to_string(v.parsed) << "\tterms=";
    std::set<std::string> terms;
    for (const auto& t : tag_terms(it->second->text, lexicon)) terms.insert(t.term);
    bool first = true;
    for (const auto& t : terms) {
      ctx.out << (first ? "" : ",") << t;
      first = false;
    }
    ctx.out << "\n  " << it->second->text << "\n";
  }
  ctx.out << shown << " posts misclassified or not scored\n";
}

void evaluate_files(const fs::path& verdicts_path, const fs::path& gold_path,
                    std::ostream& out) {
  auto vin = open_in(verdicts_path);
  const auto verdicts = read_verdicts(vin);
  std::map<std::string, bool> gold;
  std::size_t n = 0;
  for (const auto& line : read_lines(gold_path)) {
    ++n;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("post_id")) {
      throw DataError(gold_path.string() + " line " + std::to_string(n) + ": not a gold record");
    }
    const char* key = j.contains("label") ? "label" : "gold_label";
    if (!j.contains(key) || !j[key].is_boolean()) {
      throw DataError(gold_path.string() + " line " + std::to_string(n) + ": no boolean label");
    }
    gold[j["post_id"].get<std::string>()] = j[key].get<bool>();
  }
  const auto c = confusion(verdicts, gold);
  nlohmann::ordered_json j;
  j["confusion"] = c.to_json();
  j["metrics"] = metrics(c).to_json();
  out << j.dump(2) << "\n";
}

}  // namespace nfkit::cli
