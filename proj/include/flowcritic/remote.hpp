#pragma once

// HTTP backends. Policy wire contract:
//   POST <endpoint>  {"prompt", "images": [base64 PNG], "params": {temperature, max_tokens, seed?}}
//   -> {"text": "..."}
// Tool wire contract:
//   POST <endpoint>  {"tool", "args", "image": base64 PNG}
//   -> {"ok": bool, "result": {...}, "error"?: "..."}

#include "error.hpp"
#include "grounding.hpp"
#include "policy.hpp"
#include "util.hpp"

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <memory>
#include <optional>
#include <string>
#include <thread>

namespace flowcritic {

inline constexpr const char* kModelEndpointEnv = "MODEL_ENDPOINT";
inline constexpr const char* kModelApiKeyEnv = "MODEL_API_KEY";
inline constexpr const char* kToolEndpointEnv = "TOOL_ENDPOINT";

inline std::optional<std::string> env_value(const char* name) {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
}

struct Endpoint {
    std::string base;  // scheme://host[:port]
    std::string path;  // starts with '/'
};

inline Endpoint split_endpoint(const std::string& url) {
    auto scheme = url.find("://");
    if (scheme == std::string::npos) throw Error(ErrorCode::Usage, "endpoint '" + url + "' lacks a scheme");
    auto prefix = url.substr(0, scheme);
    if (prefix != "http" && prefix != "https") {
        throw Error(ErrorCode::Usage, "endpoint scheme must be http or https, got '" + prefix + "'");
    }
    auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
}

struct HttpOptions {
    int timeout_seconds = 120;
    int retries = 2;
    int backoff_ms = 200;
};

/// POSTs a JSON body and returns the parsed JSON reply. Connection failures
/// and 5xx replies are retried; anything else raises Transport immediately.
inline nlohmann::json post_json(const Endpoint& ep, const nlohmann::json& body, const std::optional<std::string>& bearer,
                                const HttpOptions& opt) {
    httplib::Client client(ep.base);
    client.set_connection_timeout(opt.timeout_seconds, 0);
    client.set_read_timeout(opt.timeout_seconds, 0);
    client.set_write_timeout(opt.timeout_seconds, 0);
    httplib::Headers headers;
    if (bearer) headers.emplace("Authorization", "Bearer " + *bearer);
    const auto payload = body.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= opt.retries; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(opt.backoff_ms * attempt));
        auto res = client.Post(ep.path, headers, payload, "application/json");
        if (!res) {
            last_error = "request to " + ep.base + ep.path + " failed: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status) + " from " + ep.base + ep.path;
            continue;
        }
        if (res->status != 200) {
            throw Error(ErrorCode::Transport, "HTTP " + std::to_string(res->status) + " from " + ep.base + ep.path);
        }
        try {
            return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorCode::Transport, std::string("reply is not JSON: ") + e.what());
        }
    }
    throw Error(ErrorCode::Transport, last_error);
}

class HttpPolicyBackend final : public PolicyBackend {
public:
    HttpPolicyBackend(std::string endpoint, std::optional<std::string> api_key, HttpOptions options = {})
        : url_(std::move(endpoint)), ep_(split_endpoint(url_)), api_key_(std::move(api_key)), opt_(options) {}

    /// From MODEL_ENDPOINT / MODEL_API_KEY.
    static std::unique_ptr<HttpPolicyBackend> from_environment(HttpOptions options = {}) {
        auto url = env_value(kModelEndpointEnv);
        if (!url) throw Error(ErrorCode::Usage, std::string(kModelEndpointEnv) + " is not set");
        return std::make_unique<HttpPolicyBackend>(*url, env_value(kModelApiKeyEnv), options);
    }

    std::string identity() const override { return "remote:" + url_; }
    PolicyCapabilities capabilities() const override { return {true, true}; }

    std::string complete(const PolicyRequest& request) const override {
        auto images = nlohmann::json::array();
        for (const auto& img : request.images) images.push_back(base64_encode(img.png_bytes()));
        nlohmann::json params = {{"temperature", request.params.temperature},
                                 {"max_tokens", request.params.max_tokens}};
        if (request.params.seed) params["seed"] = *request.params.seed;
        auto reply = post_json(ep_, {{"prompt", request.prompt}, {"images", images}, {"params", params}}, api_key_,
                               opt_);
        if (!reply.is_object() || !reply.contains("text") || !reply["text"].is_string()) {
            throw Error(ErrorCode::Transport, "model reply lacks a string 'text' field");
        }
        return reply["text"].get<std::string>();
    }

private:
    std::string url_;
    Endpoint ep_;
    std::optional<std::string> api_key_;
    HttpOptions opt_;
};

/// Perception over HTTP (the sidecar). Transport failures come back as
/// failed ToolResponses so a missing sidecar never aborts a rollout.
class HttpToolBackend final : public ToolBackend {
public:
    explicit HttpToolBackend(std::string endpoint, HttpOptions options = {})
        : url_(std::move(endpoint)), ep_(split_endpoint(url_)), opt_(options) {}

    static std::unique_ptr<HttpToolBackend> from_environment(HttpOptions options = {}) {
        auto url = env_value(kToolEndpointEnv);
        if (!url) throw Error(ErrorCode::Usage, std::string(kToolEndpointEnv) + " is not set");
        return std::make_unique<HttpToolBackend>(*url, options);
    }

    std::string identity() const override { return "remote-tools:" + url_; }

    ToolResponse call(const ToolCall& call, const ScreenInput& screen) const override {
        if (!is_supported_tool(call.tool)) return ToolResponse::failure("unsupported");
        try {
            nlohmann::json body = {{"tool", call.tool}, {"args", call.args}, {"image", base64_encode(screen.png_bytes())}};
            return ToolResponse::from_wire(post_json(ep_, body, std::nullopt, opt_));
        } catch (const Error& e) {
            return ToolResponse::failure(std::string("backend-unavailable: ") + e.what());
        }
    }

private:
    std::string url_;
    Endpoint ep_;
    HttpOptions opt_;
};

} // namespace flowcritic
