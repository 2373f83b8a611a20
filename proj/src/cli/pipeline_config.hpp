#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nfkit/annotation.hpp"
#include "nfkit/clean.hpp"
#include "nfkit/inference.hpp"
#include "nfkit/ingest.hpp"
#include "nfkit/sampling.hpp"

namespace nfkit::cli {

namespace fs = std::filesystem;

struct SourceInput {
  fs::path dump;
  SourceSchema schema;
};

// External fine-tuning program; see README for the argument contract.
struct TrainerConfig {
  std::string name = "slm";
  std::vector<std::string> command{"python3", "-m", "nfkit_slm"};
  std::string base_model;
  double learning_rate = 0;
  int epochs = 0;
  int batch_size = 0;
  std::uint64_t seed = 0;
};

struct PipelineConfig {
  fs::path config_path;
  std::string config_sha256;
  fs::path workdir;
  fs::path data_dir;

  std::map<Source, SourceInput> sources;
  CleaningConfig cleaning;
  MergePolicy merge;

  std::uint64_t sample_n = 1000;
  std::uint64_t sample_seed = 0;
  BatchPolicy batches;

  SplitRatios split_ratios{0.8, 0.1, 0.1};
  std::uint64_t split_seed = 0;
  bool split_stratified = false;

  std::string template_version = "v1";
  bool shuffle_exemplars = false;
  std::uint64_t exemplar_seed = 0;
  fs::path refusals;
  fs::path exemplars;
  fs::path lexicon;

  std::map<std::string, ModelEndpoint> endpoints;
  std::optional<TrainerConfig> trainer;

  // Relative paths resolve against the config file's directory. Throws
  // ConfigError for missing seeds, unknown keys' bad values, or referenced
  // files that do not exist.
  static PipelineConfig load(const fs::path& path,
                             const std::optional<fs::path>& workdir_override,
                             const std::optional<fs::path>& data_dir_override);
};

}  // namespace nfkit::cli
