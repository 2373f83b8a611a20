#include "nfkit/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <thread>

#include "nfkit/error.hpp"
#include "nfkit/text.hpp"
#include "nfkit/time.hpp"

namespace nfkit {

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::zero_shot: return "zero_shot";
    case Modality::few_shot: return "few_shot";
    case Modality::finetuned: return "finetuned";
  }
  return "";
}

Modality parse_modality(std::string_view s) {
  if (s == "zero_shot") return Modality::zero_shot;
  if (s == "few_shot") return Modality::few_shot;
  if (s == "finetuned") return Modality::finetuned;
  throw DataError("unknown modality '" + std::string(s) + "'");
}

std::string_view to_string(Parsed p) {
  switch (p) {
    case Parsed::positive: return "positive";
    case Parsed::negative: return "negative";
    case Parsed::refusal: return "refusal";
    case Parsed::unparseable: return "unparseable";
  }
  return "";
}

Parsed parse_parsed(std::string_view s) {
  if (s == "positive") return Parsed::positive;
  if (s == "negative") return Parsed::negative;
  if (s == "refusal") return Parsed::refusal;
  if (s == "unparseable") return Parsed::unparseable;
  throw DataError("unknown verdict state '" + std::string(s) + "'");
}

std::string_view to_string(EndpointMode m) {
  return m == EndpointMode::chat ? "chat" : "completion";
}

nlohmann::ordered_json to_json(const Verdict& v) {
  nlohmann::ordered_json j;
  j["post_id"] = v.post_id;
  j["model_name"] = v.model_name;
  j["modality"] = to_string(v.modality);
  j["raw_response"] = v.raw_response;
  j["parsed"] = to_string(v.parsed);
  j["latency_ms"] = v.latency_ms;
  j["attempt_count"] = v.attempt_count;
  j["error"] = v.error ? nlohmann::ordered_json(*v.error) : nlohmann::ordered_json();
  return j;
}

Verdict verdict_from_json(const nlohmann::json& j) {
  static const char* const keys[] = {"post_id",  "model_name", "modality",      "raw_response",
                                     "parsed",   "latency_ms", "attempt_count", "error"};
  if (!j.is_object()) throw DataError("verdict: expected an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(std::begin(keys), std::end(keys), key) == std::end(keys)) {
      throw DataError("verdict: unexpected field '" + key + "'");
    }
  }
  auto str = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_string()) {
      throw DataError(std::string("verdict: '") + key + "' must be a string");
    }
    return j[key].get<std::string>();
  };
  auto integer = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_number_integer() || j[key].get<std::int64_t>() < 0) {
      throw DataError(std::string("verdict: '") + key + "' must be a non-negative integer");
    }
    return j[key].get<std::int64_t>();
  };
  Verdict v;
  v.post_id = str("post_id");
  if (v.post_id.empty()) throw DataError("verdict: empty post_id");
  v.model_name = str("model_name");
  v.modality = parse_modality(str("modality"));
  v.raw_response = str("raw_response");
  v.parsed = parse_parsed(str("parsed"));
  v.latency_ms = integer("latency_ms");
  v.attempt_count = static_cast<int>(integer("attempt_count"));
  if (!j.contains("error")) throw DataError("verdict: missing 'error'");
  if (j["error"].is_string()) {
    v.error = j["error"].get<std::string>();
  } else if (!j["error"].is_null()) {
    throw DataError("verdict: 'error' must be a string or null");
  }
  return v;
}

void write_verdicts(std::ostream& out, std::span<const Verdict> verdicts) {
  for (const auto& v : verdicts) out << to_json(v).dump() << '\n';
}

std::vector<Verdict> read_verdicts(std::istream& in) {
  std::vector<Verdict> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(verdict_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("verdicts line " + std::to_string(n) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("verdicts line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

RefusalList::RefusalList()
    : RefusalList({"i can't", "i cannot", "i can not", "as an ai", "i won't",
                   "i will not", "i'm unable", "i am unable", "i'm not able",
                   "i am not able", "i'm sorry", "i am sorry", "i apologize",
                   "cannot assist", "can't assist", "cannot help", "can't help",
                   "not comfortable"}) {}

RefusalList::RefusalList(std::vector<std::string> phrases) {
  for (auto& p : phrases) {
    std::string norm = normalize_response(p);
    if (!norm.empty()) phrases_.push_back(std::move(norm));
  }
}

RefusalList RefusalList::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> phrases;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    phrases.emplace_back(t);
  }
  if (phrases.empty()) throw ConfigError(path + ": no refusal phrases");
  return RefusalList(std::move(phrases));
}

bool RefusalList::matches(std::string_view normalized) const {
  for (const auto& p : phrases_) {
    for (auto pos = normalized.find(p); pos != std::string_view::npos;
         pos = normalized.find(p, pos + 1)) {
      if (pos == 0 || !text::is_ascii_alnum(normalized[pos - 1])) return true;
    }
  }
  return false;
}

namespace {

bool trimmable(char c) {
  const auto u = static_cast<unsigned char>(c);
  return text::is_space(c) || (u < 0x80 && std::ispunct(u));
}

std::string strip_think(std::string_view raw) {
  std::string out;
  std::size_t pos = 0;
  while (pos < raw.size()) {
    std::size_t open = std::string_view::npos;
    for (std::size_t i = pos; i + 7 <= raw.size(); ++i) {
      if (text::istarts_with(raw.substr(i), "<think>")) {
        open = i;
        break;
      }
    }
    if (open == std::string_view::npos) break;
    out.append(raw.substr(pos, open - pos));
    std::size_t close = std::string_view::npos;
    for (std::size_t i = open + 7; i + 8 <= raw.size(); ++i) {
      if (text::istarts_with(raw.substr(i), "</think>")) {
        close = i;
        break;
      }
    }
    // An unfinished reasoning block leaves no answer.
    if (close == std::string_view::npos) return out;
    pos = close + 8;
  }
  out.append(raw.substr(std::min(pos, raw.size())));
  return out;
}

}  // namespace

std::string normalize_response(std::string_view raw) {
  std::string s = strip_think(raw);
  // Typographic apostrophe, so "I can’t" matches "i can't".
  std::string folded;
  folded.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.compare(i, 3, "\xE2\x80\x99") == 0) {
      folded += '\'';
      i += 2;
    } else {
      folded += text::ascii_lower(s[i]);
    }
  }
  std::size_t b = 0, e = folded.size();
  while (b < e && trimmable(folded[b])) ++b;
  while (e > b && trimmable(folded[e - 1])) --e;
  return folded.substr(b, e - b);
}

Parsed parse_verdict(std::string_view raw, const RefusalList& refusals) {
  const std::string norm = normalize_response(raw);
  std::size_t end = 0;
  while (end < norm.size() && norm[end] >= 'a' && norm[end] <= 'z') ++end;
  const std::string_view word(norm.data(), end);
  if (word == "true") return Parsed::positive;
  if (word == "false") return Parsed::negative;
  if (refusals.matches(norm)) return Parsed::refusal;
  return Parsed::unparseable;
}

void ModelEndpoint::validate() const {
  if (base_url.empty()) throw ConfigError("endpoint " + name + ": base_url is required");
  if (base_url.rfind("http://", 0) != 0 && base_url.rfind("https://", 0) != 0) {
    throw ConfigError("endpoint " + name + ": base_url must start with http:// or https://");
  }
  if (model_name.empty()) throw ConfigError("endpoint " + name + ": model is required");
  if (!(timeout_s > 0)) throw ConfigError("endpoint " + name + ": timeout must be > 0");
  if (max_retries < 0) throw ConfigError("endpoint " + name + ": max_retries must be >= 0");
  if (max_concurrency < 1) {
    throw ConfigError("endpoint " + name + ": max_concurrency must be >= 1");
  }
  if (backoff_initial.count() < 0 || backoff_max < backoff_initial) {
    throw ConfigError("endpoint " + name + ": bad backoff settings");
  }
}

nlohmann::ordered_json ModelEndpoint::to_json() const {
  nlohmann::ordered_json j;
  j["name"] = name;
  j["base_url"] = base_url;
  j["model"] = model_name;
  j["api_key_env"] = api_key_ref;
  j["mode"] = to_string(mode);
  j["timeout_s"] = timeout_s;
  j["max_retries"] = max_retries;
  j["max_concurrency"] = max_concurrency;
  j["backoff_ms"] = backoff_initial.count();
  j["backoff_max_ms"] = backoff_max.count();
  return j;
}

ModelEndpoint ModelEndpoint::from_config(const KeyValueConfig& cfg, std::string_view prefix,
                                         std::string name) {
  const std::string p = prefix.empty() ? "" : std::string(prefix) + ".";
  ModelEndpoint e;
  e.name = std::move(name);
  e.base_url = cfg.require(p + "base_url");
  while (!e.base_url.empty() && e.base_url.back() == '/') e.base_url.pop_back();
  e.model_name = cfg.require(p + "model");
  e.api_key_ref = cfg.get_or(p + "api_key_env", "");
  const std::string mode = cfg.get_or(p + "mode", "chat");
  if (mode == "chat") {
    e.mode = EndpointMode::chat;
  } else if (mode == "completion") {
    e.mode = EndpointMode::completion;
  } else {
    throw ConfigError(p + "mode must be chat or completion");
  }
  if (auto v = cfg.get_double(p + "timeout_s")) e.timeout_s = *v;
  if (auto v = cfg.get_int(p + "max_retries")) e.max_retries = static_cast<int>(*v);
  if (auto v = cfg.get_int(p + "max_concurrency")) e.max_concurrency = static_cast<int>(*v);
  if (auto v = cfg.get_int(p + "backoff_ms")) e.backoff_initial = std::chrono::milliseconds(*v);
  if (auto v = cfg.get_int(p + "backoff_max_ms")) e.backoff_max = std::chrono::milliseconds(*v);
  e.validate();
  return e;
}

std::string request_path(const ModelEndpoint& endpoint) {
  return endpoint.mode == EndpointMode::chat ? "/chat/completions" : "/api/generate";
}

nlohmann::ordered_json request_body(const ModelEndpoint& endpoint, const Prompt& prompt) {
  nlohmann::ordered_json j;
  j["model"] = endpoint.model_name;
  if (endpoint.mode == EndpointMode::chat) {
    if (const auto* chat = std::get_if<ChatRequest>(&prompt)) {
      j["messages"] = chat->messages();
    } else {
      j["messages"] = nlohmann::ordered_json::array(
          {{{"role", "user"}, {"content", std::get<std::string>(prompt)}}});
    }
    j["temperature"] = 0;
    j["stream"] = false;
    return j;
  }
  if (const auto* chat = std::get_if<ChatRequest>(&prompt)) {
    std::string text;
    for (const auto& t : chat->turns) {
      text += t.content;
      text += "\n\n";
    }
    text += chat->final_user;
    j["system"] = chat->system;
    j["prompt"] = text;
  } else {
    j["prompt"] = std::get<std::string>(prompt);
    j["raw"] = true;
  }
  j["stream"] = false;
  j["options"] = {{"temperature", 0}};
  return j;
}

std::optional<std::string> response_text(const ModelEndpoint& endpoint,
                                         std::string_view body) {
  const auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  if (endpoint.mode == EndpointMode::chat) {
    if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
      return std::nullopt;
    }
    const auto& first = j["choices"][0];
    if (!first.is_object() || !first.contains("message")) return std::nullopt;
    const auto& msg = first["message"];
    if (!msg.is_object() || !msg.contains("content") || !msg["content"].is_string()) {
      return std::nullopt;
    }
    return msg["content"].get<std::string>();
  }
  if (!j.contains("response") || !j["response"].is_string()) return std::nullopt;
  return j["response"].get<std::string>();
}

Classifier::Classifier(ModelEndpoint endpoint, TransportFactory factory,
                       RefusalList refusals)
    : endpoint_(std::move(endpoint)),
      factory_(std::move(factory)),
      refusals_(std::move(refusals)),
      sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
  endpoint_.validate();
  headers_["Content-Type"] = "application/json";
  if (!endpoint_.api_key_ref.empty()) {
    const char* key = std::getenv(endpoint_.api_key_ref.c_str());
    if (!key || !*key) {
      throw AuthError("environment variable " + endpoint_.api_key_ref + " is not set");
    }
    headers_["Authorization"] = std::string("Bearer ") + key;
  }
}

Verdict Classifier::classify(Transport& transport, std::string_view post_id,
                             const Prompt& prompt, Modality modality) const {
  Verdict v;
  v.post_id = post_id;
  v.model_name = endpoint_.model_name;
  v.modality = modality;
  const std::string path = request_path(endpoint_);
  const std::string body = request_body(endpoint_, prompt).dump();
  const auto started = std::chrono::steady_clock::now();
  auto finish = [&](Verdict& out) {
    out.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - started)
                         .count();
    return out;
  };

  std::chrono::milliseconds delay = endpoint_.backoff_initial;
  std::string last_error;
  while (true) {
    ++v.attempt_count;
    bool retryable = false;
    try {
      const HttpResponse res = transport.post(path, body, headers_);
      if (res.status == 401 || res.status == 403) {
        throw AuthError("endpoint " + endpoint_.base_url + " rejected credentials (HTTP " +
                        std::to_string(res.status) + ")");
      }
      if (res.status >= 200 && res.status < 300) {
        if (auto text = response_text(endpoint_, res.body)) {
          v.raw_response = *text;
          v.parsed = parse_verdict(*text, refusals_);
        } else {
          v.raw_response = res.body;
          v.parsed = Parsed::unparseable;
          v.error = "malformed response body";
        }
        return finish(v);
      }
      last_error = "HTTP " + std::to_string(res.status);
      retryable = res.status == 429 || res.status >= 500;
      if (!retryable) {
        v.raw_response = res.body;
        v.error = last_error;
        return finish(v);
      }
    } catch (const TransportError& e) {
      last_error = e.what();
    }
    if (v.attempt_count > endpoint_.max_retries) break;
    sleeper_(delay);
    delay = std::min(delay * 2, endpoint_.backoff_max);
  }
  v.parsed = Parsed::unparseable;
  v.error = "gave up after " + std::to_string(v.attempt_count) + " attempts: " + last_error;
  return finish(v);
}

nlohmann::ordered_json RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["endpoint"] = endpoint.to_json();
  j["template_version"] = template_version;
  j["modality"] = to_string(modality);
  j["temperature"] = temperature;
  j["started_at"] = started_at;
  j["finished_at"] = finished_at;
  j["total"] = total;
  for (Parsed p : {Parsed::positive, Parsed::negative, Parsed::refusal, Parsed::unparseable}) {
    auto it = counts.find(p);
    j["counts"][std::string(to_string(p))] = it == counts.end() ? 0 : it->second;
  }
  j["errors"] = errors;
  return j;
}

namespace {

std::string now_rfc3339() {
  return format_rfc3339(
      std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()));
}

}  // namespace

BatchResult batch_classify(const Classifier& classifier, std::span<const PostInput> posts,
                           const PromptBuilder& build, Modality modality,
                           std::string template_version) {
  BatchResult result;
  RunManifest& m = result.manifest;
  m.endpoint = classifier.endpoint();
  m.template_version = std::move(template_version);
  m.modality = modality;
  m.started_at = now_rfc3339();
  result.verdicts.resize(posts.size());

  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto worker = [&] {
    try {
      auto transport = classifier.new_transport();
      while (!stop) {
        const std::size_t i = next.fetch_add(1);
        if (i >= posts.size()) break;
        Prompt prompt;
        try {
          prompt = build(posts[i]);
        } catch (const DataError& e) {
          Verdict& v = result.verdicts[i];
          v.post_id = posts[i].post_id;
          v.model_name = classifier.endpoint().model_name;
          v.modality = modality;
          v.error = std::string("prompt: ") + e.what();
          continue;
        }
        result.verdicts[i] = classifier.classify(*transport, posts[i].post_id, prompt, modality);
      }
    } catch (...) {
      stop = true;
      std::lock_guard lock(failure_mu);
      if (!failure) failure = std::current_exception();
    }
  };

  const std::size_t workers = std::min<std::size_t>(
      static_cast<std::size_t>(classifier.endpoint().max_concurrency), posts.size());
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  m.finished_at = now_rfc3339();
  m.total = result.verdicts.size();
  for (const auto& v : result.verdicts) {
    ++m.counts[v.parsed];
    if (v.error) ++m.errors;
  }
  return result;
}

}  // namespace nfkit
