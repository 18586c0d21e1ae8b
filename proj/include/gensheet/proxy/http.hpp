#pragma once

#include <chrono>
#include <string>

#include <json.hpp>

#include "gensheet/genfns/service.hpp"
#include "gensheet/proxy/proxy.hpp"

namespace httplib {
class Server;
}

namespace gensheet::proxy {

/// `POST /tti`, `POST /llm`, `GET /image/{id}`, `GET /stats`.
void register_proxy_routes(httplib::Server& server, ProxyService& proxy);

/// Wire forms of request bodies. Parsing throws ProxyError(400).
nlohmann::json to_json(const gen::GenerationKey& key);
gen::GenerationKey generation_key_from_json(const nlohmann::json& body);
nlohmann::json to_json(const gen::LlmRequest& request);
gen::LlmRequest llm_request_from_json(const nlohmann::json& body);
nlohmann::json to_json(const ImageRef& ref);
nlohmann::json to_json(const CacheStats& stats);

/// GenerationBackend talking to a proxy over HTTP, e.g. "http://127.0.0.1:8040".
class HttpBackend : public gen::GenerationBackend {
public:
    HttpBackend(std::string base_url, std::chrono::seconds timeout);
    ImageRef generate_image(const gen::GenerationKey& key) override;
    std::string complete(const gen::LlmRequest& request) override;

private:
    nlohmann::json post(const std::string& path, const nlohmann::json& body);

    std::string base_url_;
    std::chrono::seconds timeout_;
};

}  // namespace gensheet::proxy
