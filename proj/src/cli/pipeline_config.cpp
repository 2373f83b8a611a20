#include "pipeline_config.hpp"

#include <sstream>

#include "nfkit/error.hpp"
#include "nfkit/hash.hpp"
#include "nfkit/text.hpp"
#include "workdir.hpp"

#ifndef NFKIT_DEFAULT_DATA_DIR
#define NFKIT_DEFAULT_DATA_DIR "data"
#endif

namespace nfkit::cli {

namespace {

fs::path resolve(const fs::path& base, const std::string& value) {
  fs::path p(value);
  return p.is_absolute() ? p : base / p;
}

void require_exists(const fs::path& p, const std::string& key) {
  if (!fs::exists(p)) throw ConfigError(key + ": file not found: " + p.string());
}

std::uint64_t require_seed(const KeyValueConfig& cfg, const std::string& key) {
  auto v = cfg.get_int(key);
  if (!v) throw ConfigError(key + " is required (seeds are never chosen implicitly)");
  if (*v < 0) throw ConfigError(key + " must be non-negative");
  return static_cast<std::uint64_t>(*v);
}

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

}  // namespace

PipelineConfig PipelineConfig::load(const fs::path& path,
                                    const std::optional<fs::path>& workdir_override,
                                    const std::optional<fs::path>& data_dir_override) {
  if (!fs::is_regular_file(path)) throw ConfigError("config file not found: " + path.string());
  const auto cfg = KeyValueConfig::load(path);
  const fs::path base = fs::absolute(path).parent_path();

  PipelineConfig pc;
  pc.config_path = fs::absolute(path);
  pc.config_sha256 = sha256_file(path);

  if (workdir_override) {
    pc.workdir = fs::absolute(*workdir_override);
  } else {
    pc.workdir = resolve(base, cfg.get_or("paths.workdir", "work"));
  }
  if (data_dir_override) {
    pc.data_dir = fs::absolute(*data_dir_override);
  } else if (auto d = cfg.get("paths.data_dir")) {
    pc.data_dir = resolve(base, *d);
  } else {
    pc.data_dir = NFKIT_DEFAULT_DATA_DIR;
  }
  require_exists(pc.data_dir, "paths.data_dir");

  for (Source s : {Source::iron_march, Source::stormfront}) {
    const std::string p = "source." + std::string(to_string(s));
    auto dump = cfg.get(p + ".dump");
    if (!dump) continue;
    SourceInput in;
    in.dump = resolve(base, *dump);
    require_exists(in.dump, p + ".dump");
    if (auto schema = cfg.get(p + ".schema")) {
      const auto schema_path = resolve(base, *schema);
      require_exists(schema_path, p + ".schema");
      in.schema = SourceSchema::load(schema_path);
    } else {
      in.schema = SourceSchema::defaults_for(s);
    }
    pc.sources.emplace(s, std::move(in));
  }

  pc.cleaning = CleaningConfig::from_config(cfg, "cleaning");
  pc.merge = MergePolicy::from_config(cfg, "merge");

  if (auto n = cfg.get_int("sample.n_total")) {
    if (*n <= 0) throw ConfigError("sample.n_total must be positive");
    pc.sample_n = static_cast<std::uint64_t>(*n);
  }
  pc.sample_seed = require_seed(cfg, "sample.seed");
  pc.batches = BatchPolicy::from_config(cfg, "batches");

  if (auto ratios = cfg.get_list("split.ratios")) {
    if (ratios->size() != 3) throw ConfigError("split.ratios needs three values");
    for (std::size_t i = 0; i < 3; ++i) {
      try {
        pc.split_ratios[i] = std::stod((*ratios)[i]);
      } catch (const std::exception&) {
        throw ConfigError("split.ratios: bad number '" + (*ratios)[i] + "'");
      }
    }
  }
  pc.split_seed = require_seed(cfg, "split.seed");
  pc.split_stratified = cfg.get_bool("split.stratified").value_or(false);

  pc.template_version = cfg.get_or("prompt.template_version", "v1");
  const std::string order = cfg.get_or("prompt.exemplar_order", "appendix");
  if (order == "shuffled") {
    pc.shuffle_exemplars = true;
    pc.exemplar_seed = require_seed(cfg, "prompt.exemplar_seed");
  } else if (order != "appendix") {
    throw ConfigError("prompt.exemplar_order must be appendix or shuffled");
  }
  auto data_file = [&](const std::string& key, const char* fallback) {
    auto v = cfg.get(key);
    fs::path p = v ? resolve(base, *v) : pc.data_dir / fallback;
    require_exists(p, key);
    return p;
  };
  pc.refusals = data_file("prompt.refusals", "refusals.txt");
  pc.exemplars = data_file("prompt.exemplars", "exemplars.json");
  pc.lexicon = data_file("prompt.lexicon", "lexicon.json");
  require_exists(pc.data_dir / "templates" / (pc.template_version + ".json"),
                 "prompt.template_version");

  for (const auto& name : cfg.subsections("endpoint")) {
    pc.endpoints.emplace(name, ModelEndpoint::from_config(cfg, "endpoint." + name, name));
  }

  if (cfg.has("trainer.base_model")) {
    TrainerConfig t;
    t.name = cfg.get_or("trainer.name", "slm");
    if (auto cmd = cfg.get("trainer.command")) t.command = split_words(*cmd);
    if (t.command.empty()) throw ConfigError("trainer.command is empty");
    t.base_model = cfg.require("trainer.base_model");
    t.learning_rate = cfg.get_double("trainer.learning_rate").value_or(0);
    t.epochs = static_cast<int>(cfg.get_int("trainer.epochs").value_or(0));
    t.batch_size = static_cast<int>(cfg.get_int("trainer.batch_size").value_or(0));
    if (!(t.learning_rate > 0)) throw ConfigError("trainer.learning_rate must be > 0");
    if (t.epochs < 1) throw ConfigError("trainer.epochs must be >= 1");
    if (t.batch_size < 1) throw ConfigError("trainer.batch_size must be >= 1");
    t.seed = require_seed(cfg, "trainer.seed");
    pc.trainer = std::move(t);
  }
  return pc;
}

}  // namespace nfkit::cli
