#pragma once

#include "eve/core/types.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace eve::vlm {

using json = nlohmann::json;

class VlmError : public Error {
 public:
  using Error::Error;
};
class TransportError : public VlmError {
 public:
  using VlmError::VlmError;
};
class TimeoutError : public TransportError {
 public:
  using TransportError::TransportError;
};
class HttpStatusError : public VlmError {
 public:
  HttpStatusError(int status, const std::string& body)
      : VlmError("chat endpoint returned HTTP " + std::to_string(status) + ": " + body.substr(0, 200)),
        status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};
class EnvelopeError : public VlmError {
 public:
  using VlmError::VlmError;
};
class ReplayMissError : public VlmError {
 public:
  using VlmError::VlmError;
};

struct ContentPart {
  enum class Kind { text, image_url } kind = Kind::text;
  std::string text;  // or the data/http URL for images

  static ContentPart make_text(std::string t) { return {Kind::text, std::move(t)}; }
  static ContentPart make_image(std::string url) { return {Kind::image_url, std::move(url)}; }
};

struct ChatMessage {
  std::string role;
  std::vector<ContentPart> content;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 1024;

  json to_json() const {
    json msgs = json::array();
    for (const auto& m : messages) {
      json parts = json::array();
      for (const auto& p : m.content) {
        if (p.kind == ContentPart::Kind::text) {
          parts.push_back({{"type", "text"}, {"text", p.text}});
        } else {
          parts.push_back({{"type", "image_url"}, {"image_url", {{"url", p.text}}}});
        }
      }
      msgs.push_back({{"role", m.role}, {"content", parts}});
    }
    return {{"model", model}, {"messages", msgs}, {"temperature", temperature}, {"max_tokens", max_tokens}};
  }

  static ChatRequest from_json(const json& j) {
    ChatRequest r;
    r.model = j.at("model").get<std::string>();
    r.temperature = j.value("temperature", 0.0);
    r.max_tokens = j.value("max_tokens", 1024);
    for (const auto& m : j.at("messages")) {
      ChatMessage msg{m.at("role").get<std::string>(), {}};
      const auto& c = m.at("content");
      if (c.is_string()) {
        msg.content.push_back(ContentPart::make_text(c.get<std::string>()));
      } else {
        for (const auto& p : c) {
          if (p.at("type") == "text") msg.content.push_back(ContentPart::make_text(p.at("text").get<std::string>()));
          else msg.content.push_back(ContentPart::make_image(p.at("image_url").at("url").get<std::string>()));
        }
      }
      r.messages.push_back(std::move(msg));
    }
    return r;
  }
};

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string request_hash(const ChatRequest& r) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << fnv1a64(r.to_json().dump());
  return os.str();
}

struct ChatReply {
  std::string text;
  double latency_s = 0.0;
  std::optional<int> prompt_tokens;
  std::optional<int> completion_tokens;
};

struct ChatExchange {
  ChatRequest request;
  ChatReply reply;

  json to_json() const {
    json j{{"request_hash", request_hash(request)},
           {"request", request.to_json()},
           {"reply", reply.text},
           {"latency_s", reply.latency_s}};
    if (reply.prompt_tokens) j["prompt_tokens"] = *reply.prompt_tokens;
    if (reply.completion_tokens) j["completion_tokens"] = *reply.completion_tokens;
    return j;
  }
};

// Reads choices[0].message.content from a chat-completions response body.
inline ChatReply parse_chat_envelope(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw EnvelopeError(std::string("response body is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
    throw EnvelopeError("response has no choices");
  }
  const auto& msg = j["choices"][0].value("message", json::object());
  if (!msg.contains("content")) throw EnvelopeError("choice has no message content");
  ChatReply out;
  const auto& c = msg["content"];
  if (c.is_string()) {
    out.text = c.get<std::string>();
  } else if (c.is_array()) {
    for (const auto& p : c)
      if (p.value("type", "") == "text") out.text += p.value("text", "");
  } else {
    throw EnvelopeError("message content is neither a string nor a part list");
  }
  if (j.contains("usage") && j["usage"].is_object()) {
    const auto& u = j["usage"];
    if (u.contains("prompt_tokens") && u["prompt_tokens"].is_number_integer()) out.prompt_tokens = u["prompt_tokens"];
    if (u.contains("completion_tokens") && u["completion_tokens"].is_number_integer())
      out.completion_tokens = u["completion_tokens"];
  }
  return out;
}

class Backend {
 public:
  virtual ~Backend() = default;
  virtual ChatReply complete(const ChatRequest& request) = 0;
};

// Replies from a fixed list (cycled) or a handler; thread-safe.
class ScriptedBackend final : public Backend {
 public:
  using Handler = std::function<std::string(const ChatRequest&, int call_index)>;

  explicit ScriptedBackend(std::vector<std::string> replies) : replies_(std::move(replies)) {
    if (replies_.empty()) throw Error("ScriptedBackend: no replies");
  }
  explicit ScriptedBackend(Handler handler) : handler_(std::move(handler)) {}

  ChatReply complete(const ChatRequest& request) override {
    const int i = calls_.fetch_add(1);
    if (handler_) return {handler_(request, i)};
    return {replies_[static_cast<std::size_t>(i) % replies_.size()]};
  }

  int calls() const { return calls_.load(); }

 private:
  std::vector<std::string> replies_;
  Handler handler_;
  std::atomic<int> calls_{0};
};

// Always fails with a transport error; used for failure injection.
class FailingBackend final : public Backend {
 public:
  ChatReply complete(const ChatRequest&) override {
    ++calls_;
    throw TransportError("backend unavailable");
  }
  int calls() const { return calls_.load(); }

 private:
  std::atomic<int> calls_{0};
};

class ReplayBackend final : public Backend {
 public:
  explicit ReplayBackend(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("ReplayBackend: cannot open " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        auto j = json::parse(line);
        ChatReply r{j.at("reply").get<std::string>(), j.value("latency_s", 0.0)};
        entries_[j.at("request_hash").get<std::string>()].push_back(std::move(r));
      } catch (const json::exception& e) {
        throw Error("ReplayBackend: " + path + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  }

  // Repeated identical requests replay successive recordings, then the last.
  ChatReply complete(const ChatRequest& request) override {
    const auto h = request_hash(request);
    std::lock_guard lock(mu_);
    auto it = entries_.find(h);
    if (it == entries_.end()) throw ReplayMissError("no recorded exchange for request " + h);
    auto& next = cursor_[h];
    const auto& list = it->second;
    const ChatReply& r = list[std::min(next, list.size() - 1)];
    ++next;
    return r;
  }

 private:
  std::map<std::string, std::vector<ChatReply>> entries_;
  std::map<std::string, std::size_t> cursor_;
  std::mutex mu_;
};

// Appends every successful exchange of the wrapped backend to a JSONL log.
class RecordingBackend final : public Backend {
 public:
  RecordingBackend(std::shared_ptr<Backend> inner, const std::string& path)
      : inner_(std::move(inner)), out_(path, std::ios::app) {
    if (!out_) throw Error("RecordingBackend: cannot open " + path);
  }

  ChatReply complete(const ChatRequest& request) override {
    ChatReply r = inner_->complete(request);
    std::lock_guard lock(mu_);
    out_ << ChatExchange{request, r}.to_json().dump() << '\n';
    out_.flush();
    return r;
  }

 private:
  std::shared_ptr<Backend> inner_;
  std::ofstream out_;
  std::mutex mu_;
};

struct ClientConfig {
  std::string endpoint = "http://127.0.0.1:8000/v1/chat/completions";
  std::string model = "Qwen/Qwen2.5-VL-72B-Instruct";
  std::string api_key;
  double timeout_s = 60.0;
  int max_concurrent = 4;
  double temperature = 0.0;
  int max_tokens = 1024;
  int max_retries = 2;
  double backoff_initial_s = 0.5;

  void validate() const {
    if (!(timeout_s > 0.0)) throw Error("vlm config: timeout must be positive");
    if (max_concurrent < 1) throw Error("vlm config: max_concurrent must be >= 1");
    if (max_retries < 0) throw Error("vlm config: max_retries must be >= 0");
  }

  // EVE_VLM_ENDPOINT, EVE_VLM_MODEL and EVE_VLM_API_KEY override the fields.
  void apply_environment() {
    if (const char* e = std::getenv("EVE_VLM_ENDPOINT")) endpoint = e;
    if (const char* m = std::getenv("EVE_VLM_MODEL")) model = m;
    if (const char* k = std::getenv("EVE_VLM_API_KEY")) api_key = k;
  }
};

// Shareable front end: bounds in-flight requests and retries transport
// failures with exponential backoff while holding its slot.
class VlmClient {
 public:
  VlmClient(std::shared_ptr<Backend> backend, ClientConfig config)
      : backend_(std::move(backend)), config_(std::move(config)), slots_(config_.max_concurrent) {
    config_.validate();
  }

  const ClientConfig& config() const { return config_; }

  ChatRequest make_request(std::vector<ChatMessage> messages) const {
    return {config_.model, std::move(messages), config_.temperature, config_.max_tokens};
  }

  ChatReply complete(const ChatRequest& request) {
    slots_.acquire();
    const int now = ++in_flight_;
    int seen = peak_.load();
    while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
    }
    struct Release {
      VlmClient* c;
      ~Release() {
        --c->in_flight_;
        c->slots_.release();
      }
    } release{this};

    double wait = config_.backoff_initial_s;
    for (int attempt = 0;; ++attempt) {
      try {
        const auto start = std::chrono::steady_clock::now();
        ChatReply r = backend_->complete(request);
        if (r.latency_s == 0.0)
          r.latency_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return r;
      } catch (const TransportError&) {
        if (attempt >= config_.max_retries) throw;
        std::this_thread::sleep_for(std::chrono::duration<double>(wait));
        wait *= 2.0;
      }
    }
  }

  int peak_in_flight() const { return peak_.load(); }

 private:
  std::shared_ptr<Backend> backend_;
  ClientConfig config_;
  std::counting_semaphore<> slots_;
  std::atomic<int> in_flight_{0};
  std::atomic<int> peak_{0};
};

// Returns the last top-level JSON object embedded in free text. Braces
// inside string literals are ignored; markdown fences and prose around the
// object are tolerated.
inline json extract_json_object(std::string_view reply) {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  std::size_t start = 0;
  for (std::size_t i = 0; i < reply.size(); ++i) {
    const char c = reply[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"' && depth > 0) {
      in_string = true;
    } else if (c == '{') {
      if (depth++ == 0) start = i;
    } else if (c == '}' && depth > 0) {
      if (--depth == 0) spans.emplace_back(start, i + 1);
    }
  }
  for (auto it = spans.rbegin(); it != spans.rend(); ++it) {
    try {
      auto j = json::parse(reply.substr(it->first, it->second - it->first));
      if (j.is_object()) return j;
    } catch (const json::exception&) {
    }
  }
  throw EnvelopeError("no JSON object found in reply");
}

}  // namespace eve::vlm
