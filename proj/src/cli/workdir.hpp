#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "nfkit/error.hpp"

namespace nfkit::cli {

namespace fs = std::filesystem;

inline constexpr std::string_view kToolVersion = "1.0.0";

// A stage that must run first has no artifacts yet.
class MissingStageError : public Error {
 public:
  MissingStageError(std::string stage, const std::string& detail)
      : Error("stage '" + stage + "' has not been run: " + detail),
        stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

class LockedError : public Error {
 public:
  using Error::Error;
};

// Exclusive lock on a workdir, released on destruction.
class WorkdirLock {
 public:
  explicit WorkdirLock(const fs::path& workdir);
  ~WorkdirLock();
  WorkdirLock(const WorkdirLock&) = delete;
  WorkdirLock& operator=(const WorkdirLock&) = delete;

 private:
  fs::path path_;
};

struct StageManifest {
  StageManifest(std::string stage_name, std::string config_hash)
      : stage(std::move(stage_name)), config_sha256(std::move(config_hash)) {}

  std::string stage;
  std::string config_sha256;
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;
};

class Workdir {
 public:
  explicit Workdir(fs::path root) : root_(std::move(root)) {}

  const fs::path& root() const { return root_; }
  fs::path stage_dir(std::string_view stage) const { return root_ / std::string(stage); }
  // Creates the stage directory.
  fs::path prepare(std::string_view stage) const;

  // Throws MissingStageError unless the stage manifest exists.
  void require(std::string_view stage) const;
  bool has(std::string_view stage) const;
  fs::path manifest_path(std::string_view stage) const {
    return stage_dir(stage) / "manifest.json";
  }

  // Records sha256 of every input and output, paths relative to the root.
  void write_manifest(const StageManifest& m) const;
  nlohmann::json read_manifest(std::string_view stage) const;

  std::string relative(const fs::path& p) const;

 private:
  fs::path root_;
};

// Writes through a temporary file and renames, so readers never see a
// partial artifact.
void write_file(const fs::path& path, std::string_view content);
std::string read_file(const fs::path& path);

std::string now_rfc3339();

// Runs argv[0] from PATH with the given arguments and waits. Returns the
// exit status; throws Error if the process cannot be started or is killed
// by a signal.
int run_process(const std::vector<std::string>& argv);

}  // namespace nfkit::cli
