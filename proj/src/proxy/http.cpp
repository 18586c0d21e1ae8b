#include "gensheet/proxy/http.hpp"

#include <httplib.h>

#include <cmath>
#include <limits>

namespace gensheet::proxy {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
    send_json(res, status, json{{"error", message}});
}

json parse_body(const httplib::Request& req) {
    try {
        return json::parse(req.body);
    } catch (const json::exception&) {
        throw ProxyError(400, "body is not valid JSON");
    }
}

}  // namespace

json to_json(const gen::GenerationKey& key) { return json{{"prompt", key.prompt}, {"seed", key.seed}, {"cfg", key.cfg}}; }

gen::GenerationKey generation_key_from_json(const json& body) {
    if (!body.is_object()) throw ProxyError(400, "expected a JSON object");
    gen::GenerationKey key;
    key.seed = gen::kDefaultSeed;
    key.cfg = gen::kDefaultCfg;
    auto p = body.find("prompt");
    if (p == body.end() || !p->is_string()) throw ProxyError(400, "prompt must be a string");
    key.prompt = p->get<std::string>();
    if (auto s = body.find("seed"); s != body.end() && !s->is_null()) {
        if (s->is_number_unsigned()) key.seed = s->get<uint64_t>();
        else if (s->is_number_float() && s->get<double>() >= 0 && std::floor(s->get<double>()) == s->get<double>() &&
                 s->get<double>() < 1e19)
            key.seed = static_cast<uint64_t>(s->get<double>());
        else throw ProxyError(400, "seed must be a non-negative integer");
    }
    if (auto c = body.find("cfg"); c != body.end() && !c->is_null()) {
        if (!c->is_number()) throw ProxyError(400, "cfg must be a number");
        key.cfg = c->get<double>();
    }
    if (auto problem = gen::validate_key(key)) throw ProxyError(400, *problem);
    return key;
}

json to_json(const gen::LlmRequest& request) {
    json msgs = json::array();
    for (const auto& m : request.messages) msgs.push_back(json{{"role", m.role}, {"content", m.content}});
    json out{{"messages", msgs}, {"expects_list", request.expects_list}};
    out["expected_length"] = request.expected_length ? json(*request.expected_length) : json(nullptr);
    return out;
}

gen::LlmRequest llm_request_from_json(const json& body) {
    if (!body.is_object()) throw ProxyError(400, "expected a JSON object");
    auto msgs = body.find("messages");
    if (msgs == body.end() || !msgs->is_array() || msgs->empty()) throw ProxyError(400, "messages must be a non-empty array");
    gen::LlmRequest r;
    for (const auto& m : *msgs) {
        if (!m.is_object() || !m.contains("role") || !m.contains("content") || !m["role"].is_string() ||
            !m["content"].is_string()) {
            throw ProxyError(400, "each message needs a string role and content");
        }
        gen::LlmMessage msg{m["role"].get<std::string>(), m["content"].get<std::string>()};
        if (!gen::is_valid_role(msg.role)) throw ProxyError(400, "invalid role: " + msg.role);
        r.messages.push_back(std::move(msg));
    }
    if (auto e = body.find("expects_list"); e != body.end()) {
        if (!e->is_boolean()) throw ProxyError(400, "expects_list must be a boolean");
        r.expects_list = e->get<bool>();
    }
    if (auto l = body.find("expected_length"); l != body.end() && !l->is_null()) {
        if (!l->is_number_integer() || l->get<int64_t>() < 1 || l->get<int64_t>() > gen::kMaxListLength) {
            throw ProxyError(400, "expected_length must be an integer in 1..1000");
        }
        r.expected_length = static_cast<int>(l->get<int64_t>());
    }
    return r;
}

json to_json(const ImageRef& ref) {
    return json{{"id", ref.id}, {"url", ref.url}, {"width", ref.width}, {"height", ref.height}};
}

json to_json(const CacheStats& s) {
    return json{{"entries", s.entries}, {"bytes", s.bytes}, {"hits", s.hits}, {"misses", s.misses}, {"coalesced", s.coalesced}};
}

void register_proxy_routes(httplib::Server& server, ProxyService& proxy) {
    server.Post("/tti", [&proxy](const httplib::Request& req, httplib::Response& res) {
        try {
            auto key = generation_key_from_json(parse_body(req));
            send_json(res, 200, to_json(proxy.serve_tti(key)));
        } catch (const ProxyError& e) {
            send_error(res, e.status(), e.what());
        }
    });
    server.Post("/llm", [&proxy](const httplib::Request& req, httplib::Response& res) {
        try {
            auto request = llm_request_from_json(parse_body(req));
            send_json(res, 200, json{{"text", proxy.serve_llm(request)}});
        } catch (const ProxyError& e) {
            send_error(res, e.status(), e.what());
        }
    });
    server.Get(R"(/image/([0-9a-f]{64}))", [&proxy](const httplib::Request& req, httplib::Response& res) {
        auto bytes = proxy.image_bytes(req.matches[1]);
        if (!bytes) return send_error(res, 404, "no such image");
        res.status = 200;
        res.set_content(std::string(bytes->begin(), bytes->end()), "image/png");
    });
    server.Get("/stats", [&proxy](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, to_json(proxy.cache_stats()));
    });
}

HttpBackend::HttpBackend(std::string base_url, std::chrono::seconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {}

json HttpBackend::post(const std::string& path, const json& body) {
    httplib::Client client(base_url_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    auto res = client.Post(path, body.dump(), "application/json");
    if (!res) throw gen::GenerationError("proxy unreachable: " + httplib::to_string(res.error()));
    json out;
    try {
        out = json::parse(res->body);
    } catch (const json::exception&) {
        throw gen::GenerationError("proxy answered " + std::to_string(res->status) + " with a non-JSON body");
    }
    if (res->status != 200) {
        throw gen::GenerationError(out.value("error", std::string("proxy status ") + std::to_string(res->status)));
    }
    return out;
}

ImageRef HttpBackend::generate_image(const gen::GenerationKey& key) {
    auto j = post("/tti", to_json(key));
    return ImageRef{j.at("id"), j.at("url"), j.value("width", gen::kImageSize), j.value("height", gen::kImageSize)};
}

std::string HttpBackend::complete(const gen::LlmRequest& request) {
    return post("/llm", to_json(request)).at("text").get<std::string>();
}

}  // namespace gensheet::proxy
