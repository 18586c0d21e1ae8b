// Thin clients for hosted providers. Not exercised by the test suite.

#include <httplib.h>

#include <cstdlib>

#include <json.hpp>

#include "gensheet/genfns/functions.hpp"
#include "gensheet/genfns/service.hpp"
#include "gensheet/proxy/upstream.hpp"

namespace gensheet::proxy {

using nlohmann::json;

namespace {

httplib::Client client_for(const std::string& base_url, std::chrono::seconds timeout) {
    httplib::Client c(base_url);
    c.set_read_timeout(timeout);
    c.set_write_timeout(timeout);
    c.set_connection_timeout(std::chrono::seconds(10));
    return c;
}

}  // namespace

OpenAiChatUpstream::OpenAiChatUpstream(std::string api_key, std::string base_url, std::chrono::seconds timeout)
    : api_key_(std::move(api_key)), base_url_(std::move(base_url)), timeout_(timeout) {}

std::string OpenAiChatUpstream::complete(const gen::LlmRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    json body{{"model", "gpt-3.5-turbo"}, {"messages", messages}};
    auto client = client_for(base_url_, timeout_);
    httplib::Headers headers{{"Authorization", "Bearer " + api_key_}};
    auto res = client.Post("/v1/chat/completions", headers, body.dump(), "application/json");
    if (!res) throw gen::GenerationError("LLM provider unreachable: " + httplib::to_string(res.error()));
    if (res->status != 200) throw gen::GenerationError("LLM provider status " + std::to_string(res->status));
    try {
        return json::parse(res->body).at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw gen::GenerationError(std::string("unexpected LLM response: ") + e.what());
    }
}

StabilityImageUpstream::StabilityImageUpstream(std::string api_key, std::string base_url, std::chrono::seconds timeout)
    : api_key_(std::move(api_key)), base_url_(std::move(base_url)), timeout_(timeout) {}

std::vector<uint8_t> StabilityImageUpstream::generate(const gen::GenerationKey& key) {
    json body{{"text_prompts", json::array({json{{"text", key.prompt}}})},
              {"cfg_scale", key.cfg},
              {"seed", key.seed},
              {"width", gen::kImageSize},
              {"height", gen::kImageSize},
              {"samples", 1}};
    auto client = client_for(base_url_, timeout_);
    httplib::Headers headers{{"Authorization", "Bearer " + api_key_}, {"Accept", "image/png"}};
    auto res = client.Post("/v1/generation/stable-diffusion-v1-6/text-to-image", headers, body.dump(),
                           "application/json");
    if (!res) throw gen::GenerationError("image provider unreachable: " + httplib::to_string(res.error()));
    if (res->status != 200) throw gen::GenerationError("image provider status " + std::to_string(res->status));
    return std::vector<uint8_t>(res->body.begin(), res->body.end());
}

Upstreams make_upstreams(bool mock, std::chrono::seconds timeout) {
    if (mock) return {std::make_shared<MockImageUpstream>(), std::make_shared<MockLlmUpstream>()};
    auto env = [](const char* name, const char* fallback) -> std::string {
        const char* v = std::getenv(name);
        if (v && *v) return v;
        if (!fallback) throw std::runtime_error(std::string(name) + " is not set (use --mock for offline providers)");
        return fallback;
    };
    return {std::make_shared<StabilityImageUpstream>(env("STABILITY_API_KEY", nullptr),
                                                     env("STABILITY_BASE_URL", "https://api.stability.ai"), timeout),
            std::make_shared<OpenAiChatUpstream>(env("OPENAI_API_KEY", nullptr),
                                                 env("OPENAI_BASE_URL", "https://api.openai.com"), timeout)};
}

}  // namespace gensheet::proxy
