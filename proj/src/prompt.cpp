#include "nfkit/prompt.hpp"

#include <fstream>

#include "nfkit/error.hpp"
#include "nfkit/rng.hpp"

namespace nfkit {

std::string_view to_string(Role r) { return r == Role::user ? "user" : "assistant"; }

nlohmann::ordered_json ChatRequest::messages() const {
  auto msgs = nlohmann::ordered_json::array();
  msgs.push_back({{"role", "system"}, {"content", system}});
  for (const auto& t : turns) {
    msgs.push_back({{"role", to_string(t.role)}, {"content", t.content}});
  }
  msgs.push_back({{"role", "user"}, {"content", final_user}});
  return msgs;
}

std::string ChatRequest::flatten() const {
  std::string out = system;
  for (const auto& t : turns) {
    out += "\n\n";
    out += t.content;
  }
  out += "\n\n";
  out += final_user;
  return out;
}

std::string CompletionPrompt::render() const {
  std::string out = preamble;
  out += "\n\nInstruction:\n";
  out += instruction;
  out += "\n\nInput:\n";
  out += input;
  out += "\n\nOutput:";
  if (output_slot) {
    out += *output_slot ? " true" : " false";
  } else {
    out += "\n";
  }
  return out;
}

std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) break;
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    const std::string name(tmpl.substr(open + 2, close - open - 2));
    auto it = values.find(name);
    if (it == values.end()) throw ConfigError("template slot '" + name + "' has no value");
    out.append(tmpl.substr(pos, open - pos));
    out += it->second;
    pos = close + 2;
  }
  out.append(tmpl.substr(pos));
  return out;
}

std::vector<std::string> template_slots(std::string_view tmpl) {
  std::vector<std::string> slots;
  std::size_t pos = 0;
  while (true) {
    const auto open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) break;
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    slots.emplace_back(tmpl.substr(open + 2, close - open - 2));
    pos = close + 2;
  }
  return slots;
}

std::string escape_post(std::string_view post) {
  std::string out;
  out.reserve(post.size());
  for (char c : post) {
    if (c == '\\' || c == '"') out += '\\';
    out += c;
  }
  return out;
}

void PromptTemplates::validate() const {
  const std::pair<const char*, const std::string*> with_post[] = {
      {"zero_shot_user", &zero_shot_user},
      {"few_shot_example_user", &few_shot_example_user},
      {"few_shot_final_user", &few_shot_final_user},
      {"completion.input", &completion_input},
  };
  for (const auto& [name, text] : with_post) {
    const auto slots = template_slots(*text);
    if (slots.size() != 1 || slots[0] != "post") {
      throw ConfigError(std::string("template ") + name +
                        " must contain exactly one {{post}} slot");
    }
  }
  const std::pair<const char*, const std::string*> fixed[] = {
      {"system", &system},
      {"completion.preamble", &completion_preamble},
      {"completion.instruction", &completion_instruction},
  };
  for (const auto& [name, text] : fixed) {
    if (text->empty()) throw ConfigError(std::string("template ") + name + " is empty");
    if (!template_slots(*text).empty()) {
      throw ConfigError(std::string("template ") + name + " must not contain slots");
    }
  }
}

PromptTemplates PromptTemplates::from_json(const nlohmann::json& j) {
  PromptTemplates t;
  try {
    t.version = j.at("version").get<std::string>();
    t.system = j.at("system").get<std::string>();
    t.zero_shot_user = j.at("zero_shot_user").get<std::string>();
    t.few_shot_example_user = j.at("few_shot_example_user").get<std::string>();
    t.few_shot_final_user = j.at("few_shot_final_user").get<std::string>();
    const auto& c = j.at("completion");
    t.completion_preamble = c.at("preamble").get<std::string>();
    t.completion_instruction = c.at("instruction").get<std::string>();
    t.completion_input = c.at("input").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("prompt templates: ") + e.what());
  }
  t.validate();
  return t;
}

PromptTemplates PromptTemplates::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

PromptTemplates PromptTemplates::load_version(const std::string& data_dir,
                                              std::string_view version) {
  return load(data_dir + "/templates/" + std::string(version) + ".json");
}

namespace {

std::string fill(const std::string& tmpl, std::string_view post) {
  return render_template(tmpl, {{"post", escape_post(post)}});
}

void require_post(std::string_view post) {
  if (post.empty()) throw DataError("prompt: empty post text");
}

}  // namespace

ChatRequest build_zero_shot(const PromptTemplates& t, std::string_view post) {
  require_post(post);
  return ChatRequest{t.system, {}, fill(t.zero_shot_user, post)};
}

ChatRequest build_few_shot(const PromptTemplates& t, std::string_view post,
                           std::span<const Exemplar> exemplars) {
  require_post(post);
  if (exemplars.empty()) throw DataError("few-shot prompt needs at least one exemplar");
  ChatRequest r;
  r.system = t.system;
  for (const auto& e : exemplars) {
    if (e.text.empty()) throw DataError("few-shot exemplar with empty text");
    r.turns.push_back({Role::user, fill(t.few_shot_example_user, e.text)});
    r.turns.push_back({Role::assistant, e.label ? "true" : "false"});
  }
  r.final_user = fill(t.few_shot_final_user, post);
  return r;
}

CompletionPrompt build_completion(const PromptTemplates& t, std::string_view post,
                                  std::optional<bool> label) {
  require_post(post);
  return CompletionPrompt{t.completion_preamble, t.completion_instruction,
                          fill(t.completion_input, post), label};
}

std::vector<Exemplar> shuffled_exemplars(std::span<const Exemplar> exemplars,
                                         std::uint64_t seed) {
  std::vector<Exemplar> out(exemplars.begin(), exemplars.end());
  SeededRng rng(seed);
  rng.shuffle(std::span<Exemplar>(out));
  return out;
}

}  // namespace nfkit
