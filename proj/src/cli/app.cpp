#include <CLI11.hpp>

#include <algorithm>
#include <functional>

#include "nfkit/cli.hpp"
#include "stages.hpp"

namespace nfkit {

namespace {

constexpr const char* kContentWarning =
    "This command outputs forum posts that contain hate speech, slurs and violent "
    "extremist content. Re-run with --content-warning to acknowledge.";

Modality modality_option(const std::string& s) {
  try {
    return parse_modality(s);
  } catch (const DataError&) {
    throw ConfigError("--modality must be zero_shot, few_shot or finetuned");
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neo-fascist discourse corpus and classifier evaluation toolkit", "nfkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(cli::kToolVersion));

  std::string config_path;
  std::string workdir;
  std::string data_dir;
  app.add_option("-c,--config", config_path, "Pipeline config file");
  app.add_option("-w,--workdir", workdir, "Workdir (overrides paths.workdir)");
  app.add_option("--data-dir", data_dir, "Templates, lexicon and exemplars directory");

  using Action = std::function<void(cli::Context&)>;
  Action action;
  bool content_warning = false;
  bool needs_warning = false;

  auto simple = [&](const char* name, const char* help, void (*fn)(cli::Context&)) {
    app.add_subcommand(name, help)->callback([&action, fn] { action = fn; });
  };
  simple("ingest", "Parse raw forum dumps into raw post files", cli::stage_ingest);
  simple("clean", "Anonymize citations, strip quotes and links, filter by length",
         cli::stage_clean);
  simple("merge", "Apply date windows and merge both sources", cli::stage_merge);
  simple("sample", "Draw the proportional annotation sample", cli::stage_sample);
  simple("agreement", "Compute inter-annotator agreement", cli::stage_agreement);
  simple("gate", "Drop low-agreement workers and build gold labels", cli::stage_gate);
  simple("split", "Split gold posts into train, validation and test", cli::stage_split);
  simple("report", "Render the metric table", cli::stage_report);

  int batch = 0;
  auto* bexport = app.add_subcommand("batch-export", "Write crowdsourcing batch files");
  bexport->add_option("--batch", batch, "Only this batch (1-based)");
  bexport->add_flag("--content-warning", content_warning, "Acknowledge hateful content");
  bexport->callback([&] {
    needs_warning = true;
    std::optional<int> b;
    if (batch != 0) b = batch;
    action = [b](cli::Context& ctx) { cli::stage_batch_export(ctx, b); };
  });

  std::vector<std::string> label_files;
  auto* bimport = app.add_subcommand("batch-import", "Load worker label files");
  bimport->add_option("--labels", label_files, "Worker label CSV (repeatable)")->required();
  bimport->callback([&] {
    action = [&](cli::Context& ctx) {
      std::vector<std::filesystem::path> files(label_files.begin(), label_files.end());
      cli::stage_batch_import(ctx, files);
    };
  });

  cli::RunOptions run_opts;
  std::string modality = "zero_shot";
  int run = 0;
  auto* prun = app.add_subcommand("prompt-run", "Classify a split with an LLM endpoint");
  prun->add_option("--endpoint", run_opts.endpoint, "Endpoint name from the config")
      ->required();
  prun->add_option("--modality", modality, "zero_shot, few_shot or finetuned");
  prun->add_option("--split", run_opts.split, "train, validation or test");
  prun->add_option("--run", run, "Run index (default: next free)");
  prun->callback([&] {
    run_opts.modality = modality_option(modality);
    if (run != 0) run_opts.run = run;
    action = [&](cli::Context& ctx) { cli::stage_prompt_run(ctx, run_opts); };
  });

  auto* ft = app.add_subcommand("finetune", "Train and predict with the external trainer");
  ft->add_option("--run", run, "Run index (default: next free)");
  ft->callback([&] {
    std::optional<int> r;
    if (run != 0) r = run;
    action = [r](cli::Context& ctx) { cli::stage_finetune(ctx, r); };
  });

  std::string verdicts_file, gold_file;
  auto* eval = app.add_subcommand("evaluate", "Score verdict files against gold labels");
  eval->add_option("--verdicts", verdicts_file, "Score one verdict file instead of the workdir");
  eval->add_option("--gold", gold_file, "Gold file for --verdicts");
  eval->callback([&] { action = cli::stage_evaluate; });

  std::string errors_name;
  auto* errs = app.add_subcommand("errors", "Show misclassified posts with lexicon terms");
  errs->add_option("--name", errors_name, "Endpoint or trainer name")->required();
  errs->add_option("--modality", modality, "zero_shot, few_shot or finetuned");
  errs->add_option("--run", run, "Run index (default: latest)");
  errs->add_flag("--content-warning", content_warning, "Acknowledge hateful content");
  errs->callback([&] {
    needs_warning = true;
    const Modality m = modality_option(modality);
    std::optional<int> r;
    if (run != 0) r = run;
    action = [&, m, r](cli::Context& ctx) { cli::stage_errors(ctx, errors_name, m, r); };
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  if (needs_warning && !content_warning) {
    err << kContentWarning << "\n";
    return kExitUsage;
  }

  try {
    if (eval->parsed() && !verdicts_file.empty()) {
      if (gold_file.empty()) {
        err << "error: --verdicts needs --gold\n";
        return kExitUsage;
      }
      cli::evaluate_files(verdicts_file, gold_file, out);
      return kExitOk;
    }
    if (config_path.empty()) {
      err << "error: --config is required for this command\n";
      return kExitUsage;
    }
    std::optional<std::filesystem::path> wd_override, data_override;
    if (!workdir.empty()) wd_override = workdir;
    if (!data_dir.empty()) data_override = data_dir;
    auto config = cli::PipelineConfig::load(config_path, wd_override, data_override);
    const auto root = config.workdir;
    cli::WorkdirLock lock(root);
    cli::Context ctx{std::move(config), cli::Workdir(root), out, err};
    action(ctx);
    return kExitOk;
  } catch (const cli::MissingStageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitMissingStage;
  } catch (const cli::LockedError& e) {
    err << "error: " << e.what() << "\n";
    return kExitLocked;
  } catch (const AuthError& e) {
    err << "error: " << e.what() << "\n";
    return kExitAuth;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace nfkit
