#pragma once

#include "eve/vlm/client.hpp"

#include <httplib.h>

#include <regex>

namespace eve::vlm {

// POSTs chat-completions requests to an OpenAI-compatible endpoint.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(ClientConfig config) : config_(std::move(config)) {
    config_.validate();
    static const std::regex url(R"(^(https?)://([^/:]+)(?::(\d+))?(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(config_.endpoint, m, url)) throw Error("vlm endpoint is not an http(s) URL: " + config_.endpoint);
    scheme_host_port_ = m[1].str() + "://" + m[2].str() + (m[3].matched ? ":" + m[3].str() : "");
    path_ = m[4].matched ? m[4].str() : "/v1/chat/completions";
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (m[1] == "https") throw Error("https endpoints need a build with OpenSSL support");
#endif
  }

  ChatReply complete(const ChatRequest& request) override {
    httplib::Client client(scheme_host_port_);
    const auto secs = static_cast<time_t>(config_.timeout_s);
    const auto usecs = static_cast<time_t>((config_.timeout_s - secs) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    const auto start = std::chrono::steady_clock::now();
    auto res = client.Post(path_, headers, request.to_json().dump(), "application/json");
    if (!res) {
      const auto err = res.error();
      const std::string what = "POST " + config_.endpoint + " failed: " + httplib::to_string(err);
      if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) throw TimeoutError(what);
      throw TransportError(what);
    }
    if (res->status < 200 || res->status >= 300) throw HttpStatusError(res->status, res->body);
    ChatReply r = parse_chat_envelope(res->body);
    r.latency_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
  }

 private:
  ClientConfig config_;
  std::string scheme_host_port_;
  std::string path_;
};

}  // namespace eve::vlm
