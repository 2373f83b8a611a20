#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mock_endpoint.hpp"
#include "nfkit/cli.hpp"
#include "temp_dir.hpp"

namespace nfkit::testing {

inline std::filesystem::path e2e_dir() {
  return std::filesystem::path(NFKIT_TEST_DIR) / "fixtures" / "e2e";
}

inline std::filesystem::path fake_trainer() {
  return std::filesystem::path(NFKIT_TEST_DIR) / "fixtures" / "fake_trainer.py";
}

// Pipeline config over the synthetic fixture: 20 Iron March and 30
// Stormfront posts, all sampled.
inline std::string e2e_config(const std::string& base_url) {
  const auto fx = e2e_dir().string();
  std::ostringstream c;
  c << "[paths]\nworkdir = work\n\n"
    << "[source.iron_march]\ndump = " << fx << "/iron_march.csv\n\n"
    << "[source.stormfront]\ndump = " << fx << "/stormfront.csv\n\n"
    << "[merge]\nexpected.iron_march = 20\nexpected.stormfront = 30\nexpected.total = 50\n\n"
    << "[sample]\nn_total = 50\nseed = 7\n\n"
    << "[split]\nratios = 0.8, 0.1, 0.1\nseed = 11\n\n"
    << "[prompt]\ntemplate_version = v1\n\n"
    << "[endpoint.mock]\nbase_url = " << base_url << "\nmodel = mock-model\n"
    << "max_concurrency = 2\nmax_retries = 1\nbackoff_ms = 1\nbackoff_max_ms = 2\n"
    << "timeout_s = 10\n\n"
    << "[trainer]\nname = slm\ncommand = python3 " << fake_trainer().string() << "\n"
    << "base_model = test/tiny-bert\nlearning_rate = 2.5e-5\nepochs = 3\n"
    << "batch_size = 10\nseed = 13\n";
  return c.str();
}

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

inline CliResult cli(const std::filesystem::path& config, std::vector<std::string> args) {
  std::vector<std::string> full{"-c", config.string()};
  full.insert(full.end(), args.begin(), args.end());
  std::ostringstream out, err;
  const int code = run_cli(full, out, err);
  return {code, out.str(), err.str()};
}

// Scripted replies keyed by the "ref-NNN" marker in each post. Few-shot
// requests are recognised by their exemplar turns.
class TranscriptEndpoint {
 public:
  TranscriptEndpoint()
      : transcript_(load()), server_([this](const MockRequest& r) { return answer(r); }) {}

  std::string base_url() const { return server_.base_url(); }
  const nlohmann::json& transcript() const { return transcript_; }
  std::size_t request_count() const { return server_.request_count(); }

  // Parsed class the transcript assigns to a post text.
  std::string expected_class(const std::string& text, const std::string& modality) const {
    return transcript_.at(marker(text)).at(modality).at("parsed").get<std::string>();
  }

  static std::string marker(const std::string& text) {
    const auto pos = text.find("ref-");
    if (pos == std::string::npos) return {};
    return text.substr(pos, 7);
  }

 private:
  static nlohmann::json load() {
    std::ifstream in(e2e_dir() / "transcript.json");
    return nlohmann::json::parse(in);
  }

  MockReply answer(const MockRequest& r) const {
    const auto prompt = last_prompt(r.body);
    const auto key = marker(prompt);
    if (!transcript_.contains(key)) return {404, "{}"};
    const bool few = r.body.contains("messages") && r.body["messages"].size() > 2;
    return chat_reply(transcript_[key][few ? "few_shot" : "zero_shot"]["response"]);
  }

  nlohmann::json transcript_;
  MockEndpoint server_;
};

}  // namespace nfkit::testing
