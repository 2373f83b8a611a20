#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "nfkit/config.hpp"
#include "nfkit/error.hpp"
#include "nfkit/prompt.hpp"

namespace nfkit {

enum class Modality { zero_shot, few_shot, finetuned };
std::string_view to_string(Modality m);
Modality parse_modality(std::string_view s);

enum class Parsed { positive, negative, refusal, unparseable };
std::string_view to_string(Parsed p);
Parsed parse_parsed(std::string_view s);

struct Verdict {
  std::string post_id;
  std::string model_name;
  Modality modality = Modality::zero_shot;
  std::string raw_response;
  Parsed parsed = Parsed::unparseable;
  std::int64_t latency_ms = 0;
  int attempt_count = 0;
  std::optional<std::string> error;

  bool operator==(const Verdict&) const = default;
};

nlohmann::ordered_json to_json(const Verdict& v);
// Throws DataError on missing fields, wrong types, unknown enum values or
// extra keys.
Verdict verdict_from_json(const nlohmann::json& j);
void write_verdicts(std::ostream& out, std::span<const Verdict> verdicts);
std::vector<Verdict> read_verdicts(std::istream& in);

// Lowercase phrases; a response containing one is a refusal.
class RefusalList {
 public:
  RefusalList();  // built-in seed phrases
  explicit RefusalList(std::vector<std::string> phrases);
  // One phrase per line; blank lines and '#' comments ignored.
  static RefusalList load(const std::string& path);

  bool matches(std::string_view normalized) const;
  const std::vector<std::string>& phrases() const { return phrases_; }

 private:
  std::vector<std::string> phrases_;
};

// Lowercases, drops <think>...</think> blocks, trims whitespace and
// punctuation; then a leading "true"/"false" word decides, else refusal
// phrases, else unparseable.
Parsed parse_verdict(std::string_view raw, const RefusalList& refusals = RefusalList());
std::string normalize_response(std::string_view raw);

enum class EndpointMode { chat, completion };
std::string_view to_string(EndpointMode m);

// chat: OpenAI-compatible POST {base_url}/chat/completions.
// completion: local runtime POST {base_url}/api/generate.
struct ModelEndpoint {
  std::string name;
  std::string base_url;
  std::string model_name;
  std::string api_key_ref;  // environment variable holding the key; may be empty
  EndpointMode mode = EndpointMode::chat;
  double timeout_s = 60;
  int max_retries = 3;
  int max_concurrency = 1;
  std::chrono::milliseconds backoff_initial{500};
  std::chrono::milliseconds backoff_max{30000};

  void validate() const;
  nlohmann::ordered_json to_json() const;
  // Keys: base_url, model, api_key_env, mode, timeout_s, max_retries,
  //       max_concurrency, backoff_ms, backoff_max_ms
  static ModelEndpoint from_config(const KeyValueConfig& cfg, std::string_view prefix,
                                   std::string name = "");
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

// Network failure before any HTTP status was received.
class TransportError : public Error {
 public:
  using Error::Error;
};

class Transport {
 public:
  virtual ~Transport() = default;
  // `path` is appended to the endpoint base URL.
  virtual HttpResponse post(const std::string& path, const std::string& body,
                            const std::map<std::string, std::string>& headers) = 0;
};

using TransportFactory = std::function<std::unique_ptr<Transport>()>;

std::unique_ptr<Transport> make_http_transport(const ModelEndpoint& endpoint);

// What gets sent: a chat request, or a finished completion prompt.
using Prompt = std::variant<ChatRequest, std::string>;

std::string request_path(const ModelEndpoint& endpoint);
// Request body; temperature is pinned to 0.
nlohmann::ordered_json request_body(const ModelEndpoint& endpoint, const Prompt& prompt);
// Generated text from a successful response body; nullopt if malformed.
std::optional<std::string> response_text(const ModelEndpoint& endpoint,
                                         std::string_view body);

using Sleeper = std::function<void(std::chrono::milliseconds)>;

class Classifier {
 public:
  // Reads the API key from the environment once; throws AuthError if
  // api_key_ref names an unset variable.
  Classifier(ModelEndpoint endpoint, TransportFactory factory,
             RefusalList refusals = RefusalList());

  // One request with retries on 429, 5xx and transport errors. 401/403
  // throws AuthError. Exhausted retries or other statuses give an
  // unparseable verdict with `error` set.
  Verdict classify(Transport& transport, std::string_view post_id, const Prompt& prompt,
                   Modality modality) const;

  const ModelEndpoint& endpoint() const { return endpoint_; }
  std::unique_ptr<Transport> new_transport() const { return factory_(); }
  // Replaces the real sleep between retries (tests).
  void set_sleeper(Sleeper s) { sleeper_ = std::move(s); }

 private:
  ModelEndpoint endpoint_;
  TransportFactory factory_;
  RefusalList refusals_;
  std::map<std::string, std::string> headers_;
  Sleeper sleeper_;
};

struct PostInput {
  std::string post_id;
  std::string text;
};

struct RunManifest {
  ModelEndpoint endpoint;
  std::string template_version;
  Modality modality = Modality::zero_shot;
  double temperature = 0.0;
  std::string started_at;
  std::string finished_at;
  std::size_t total = 0;
  std::map<Parsed, std::size_t> counts;
  std::size_t errors = 0;

  nlohmann::ordered_json to_json() const;
};

struct BatchResult {
  std::vector<Verdict> verdicts;  // input order
  RunManifest manifest;
};

using PromptBuilder = std::function<Prompt(const PostInput&)>;

// At most endpoint.max_concurrency requests in flight, one transport per
// worker. Output has one verdict per input post, in input order. AuthError
// stops the pool and is rethrown.
BatchResult batch_classify(const Classifier& classifier, std::span<const PostInput> posts,
                           const PromptBuilder& build, Modality modality,
                           std::string template_version);

}  // namespace nfkit
