#include "workdir.hpp"

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <sstream>

#include "nfkit/hash.hpp"
#include "nfkit/time.hpp"

extern char** environ;

namespace nfkit::cli {

WorkdirLock::WorkdirLock(const fs::path& workdir) : path_(workdir / ".lock") {
  fs::create_directories(workdir);
  for (int attempt = 0; attempt < 2; ++attempt) {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd >= 0) {
      const std::string pid = std::to_string(::getpid()) + "\n";
      [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
      ::close(fd);
      return;
    }
    if (errno != EEXIST) {
      throw IoError("cannot create lock " + path_.string() + ": " + std::strerror(errno));
    }
    // Remove a lock left behind by a process that no longer exists.
    std::ifstream in(path_);
    long pid = 0;
    if (in >> pid && pid > 0 && ::kill(static_cast<pid_t>(pid), 0) != 0 && errno == ESRCH) {
      fs::remove(path_);
      continue;
    }
    throw LockedError("workdir " + workdir.string() + " is locked by process " +
                      std::to_string(pid) + " (" + path_.string() + ")");
  }
  throw LockedError("workdir " + workdir.string() + " is locked");
}

WorkdirLock::~WorkdirLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

fs::path Workdir::prepare(std::string_view stage) const {
  const auto dir = stage_dir(stage);
  fs::create_directories(dir);
  return dir;
}

bool Workdir::has(std::string_view stage) const { return fs::exists(manifest_path(stage)); }

void Workdir::require(std::string_view stage) const {
  if (!has(stage)) {
    throw MissingStageError(std::string(stage),
                            "missing " + manifest_path(stage).string() + "; run `nfkit " +
                                std::string(stage) + "` first");
  }
}

std::string Workdir::relative(const fs::path& p) const {
  std::error_code ec;
  const auto rel = fs::relative(p, root_, ec);
  return ec || rel.empty() ? p.string() : rel.generic_string();
}

void Workdir::write_manifest(const StageManifest& m) const {
  nlohmann::ordered_json j;
  j["stage"] = m.stage;
  j["tool_version"] = kToolVersion;
  j["created_at"] = now_rfc3339();
  j["config_sha256"] = m.config_sha256;
  j["params"] = m.params;
  auto files = [&](const std::vector<fs::path>& paths) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& p : paths) {
      arr.push_back({{"path", relative(p)}, {"sha256", sha256_file(p)}});
    }
    return arr;
  };
  j["inputs"] = files(m.inputs);
  j["outputs"] = files(m.outputs);
  write_file(manifest_path(m.stage), j.dump(2) + "\n");
}

nlohmann::json Workdir::read_manifest(std::string_view stage) const {
  require(stage);
  return nlohmann::json::parse(read_file(manifest_path(stage)));
}

void write_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string now_rfc3339() {
  return format_rfc3339(
      std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()));
}

int run_process(const std::vector<std::string>& argv) {
  if (argv.empty()) throw Error("run_process: empty command");
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);
  pid_t pid = 0;
  const int rc = ::posix_spawnp(&pid, args[0], nullptr, nullptr, args.data(), environ);
  if (rc != 0) throw Error("cannot start " + argv[0] + ": " + std::strerror(rc));
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) throw Error("waitpid failed: " + std::string(std::strerror(errno)));
  }
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  throw Error(argv[0] + " terminated by signal " + std::to_string(WTERMSIG(status)));
}

}  // namespace nfkit::cli
