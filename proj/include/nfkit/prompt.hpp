#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "nfkit/lexicon.hpp"

namespace nfkit {

enum class Role { user, assistant };
std::string_view to_string(Role r);

struct Turn {
  Role role = Role::user;
  std::string content;

  bool operator==(const Turn&) const = default;
};

struct ChatRequest {
  std::string system;
  std::vector<Turn> turns;  // few-shot demonstrations, user first
  std::string final_user;

  // OpenAI-style message list: system, turns, final user message.
  nlohmann::ordered_json messages() const;
  // Single string for plain text endpoints.
  std::string flatten() const;
  bool operator==(const ChatRequest&) const = default;
};

struct CompletionPrompt {
  std::string preamble;
  std::string instruction;
  std::string input;
  std::optional<bool> output_slot;

  // preamble, then "Instruction:", "Input:" and "Output:" sections separated
  // by blank lines. A label renders as "Output: true"/"Output: false";
  // without one the text ends "Output:\n".
  std::string render() const;
};

// Slots are written {{name}}. Substitution is a single pass, so slot-like
// text inside a value is left alone.
std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string>& values);
std::vector<std::string> template_slots(std::string_view tmpl);

// Backslash and double quote are backslash-escaped before a post is placed
// between the template's quotes.
std::string escape_post(std::string_view post);

struct PromptTemplates {
  std::string version;
  std::string system;
  std::string zero_shot_user;
  std::string few_shot_example_user;
  std::string few_shot_final_user;
  std::string completion_preamble;
  std::string completion_instruction;
  std::string completion_input;

  // Throws ConfigError if a user template lacks exactly one {{post}} slot.
  void validate() const;
  static PromptTemplates from_json(const nlohmann::json& j);
  static PromptTemplates load(const std::string& path);
  // <data_dir>/templates/<version>.json
  static PromptTemplates load_version(const std::string& data_dir,
                                      std::string_view version);
};

// Throws DataError on an empty post.
ChatRequest build_zero_shot(const PromptTemplates& t, std::string_view post);

// One user/assistant pair per exemplar, assistant content "true" or
// "false". Throws DataError on an empty list or an exemplar without text.
ChatRequest build_few_shot(const PromptTemplates& t, std::string_view post,
                           std::span<const Exemplar> exemplars);

// Throws DataError on an empty post.
CompletionPrompt build_completion(const PromptTemplates& t, std::string_view post,
                                  std::optional<bool> label);

// Copy of the exemplars in a seeded order, for ablations.
std::vector<Exemplar> shuffled_exemplars(std::span<const Exemplar> exemplars,
                                         std::uint64_t seed);

}  // namespace nfkit
