#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "nfkit/inference.hpp"
#include "pipeline_config.hpp"
#include "workdir.hpp"

namespace nfkit::cli {

struct Context {
  PipelineConfig config;
  Workdir workdir;
  std::ostream& out;
  std::ostream& err;
};

void stage_ingest(Context& ctx);
void stage_clean(Context& ctx);
void stage_merge(Context& ctx);
void stage_sample(Context& ctx);
// All batches when `batch` is empty.
void stage_batch_export(Context& ctx, std::optional<int> batch);
void stage_batch_import(Context& ctx, const std::vector<fs::path>& label_files);
void stage_agreement(Context& ctx);
void stage_gate(Context& ctx);
void stage_split(Context& ctx);

struct RunOptions {
  std::string endpoint;
  Modality modality = Modality::zero_shot;
  std::string split = "test";
  std::optional<int> run;  // next free index when empty
};
void stage_prompt_run(Context& ctx, const RunOptions& opts);
void stage_finetune(Context& ctx, std::optional<int> run);
void stage_evaluate(Context& ctx);
void stage_report(Context& ctx);
// Misclassified posts of one run with lexicon terms found in them.
void stage_errors(Context& ctx, const std::string& name, Modality modality,
                  std::optional<int> run);

// Metrics for a verdict file against a gold file, without a workdir. The
// gold file may hold gold split lines or labeled examples.
void evaluate_files(const fs::path& verdicts, const fs::path& gold, std::ostream& out);

}  // namespace nfkit::cli
