#include "gensheet/proxy/proxy.hpp"

#include <cstdlib>
#include <set>

#include <boost/asio/post.hpp>
#include <boost/asio/thread_pool.hpp>
#include <spdlog/spdlog.h>

namespace gensheet::proxy {

CacheKey key_hash(const gen::GenerationKey& key) { return CacheKey{gen::key_digest(key)}; }

namespace {

long env_long(const char* name, long fallback, long lo, long hi) {
    const char* raw = std::getenv(name);
    if (!raw || !*raw) return fallback;
    char* end = nullptr;
    const long v = std::strtol(raw, &end, 10);
    if (*end != '\0' || v < lo || v > hi) throw std::invalid_argument(std::string("bad value for ") + name);
    return v;
}

std::string llm_cache_key(const gen::LlmRequest& r) {
    std::string k = r.expects_list ? "L" : "S";
    if (r.expected_length) k += std::to_string(*r.expected_length);
    for (const auto& m : r.messages) {
        k += '\x1e';
        k += m.role;
        k += '\x1f';
        k += m.content;
    }
    return k;
}

}  // namespace

ProxyConfig ProxyConfig::from_env() {
    ProxyConfig c;
    c.parallelism = static_cast<int>(env_long("PROXY_PARALLELISM", c.parallelism, 1, 1024));
    c.timeout = std::chrono::seconds(env_long("PROXY_TIMEOUT_SECS", 30, 1, 86400));
    if (const char* dir = std::getenv("GENSHEET_CACHE_DIR"); dir && *dir) c.cache_dir = dir;
    if (const char* flag = std::getenv("GENSHEET_CACHE_LLM"); flag && std::string(flag) == "1") c.cache_llm = true;
    return c;
}

ProxyService::ProxyService(ProxyConfig config, std::shared_ptr<ImageUpstream> images, std::shared_ptr<LlmUpstream> llm)
    : config_(std::move(config)),
      images_(std::move(images)),
      llm_(std::move(llm)),
      store_(config_.cache_dir),
      tti_pool_(std::make_unique<boost::asio::thread_pool>(static_cast<std::size_t>(config_.parallelism))),
      llm_pool_(std::make_unique<boost::asio::thread_pool>(static_cast<std::size_t>(config_.parallelism))) {}

ProxyService::~ProxyService() {
    tti_pool_->join();
    llm_pool_->join();
}

ImageRef ProxyService::locator(const std::string& id) const {
    return ImageRef{id, config_.image_url_prefix + id, gen::kImageSize, gen::kImageSize};
}

std::variant<ImageRef, ProxyService::Flight> ProxyService::acquire(const gen::GenerationKey& key) {
    if (auto problem = gen::validate_key(key)) throw ProxyError(400, *problem);
    const auto id = key_hash(key).hex();
    std::lock_guard lock(mu_);
    if (store_.contains(id)) {
        ++hits_;
        return locator(id);
    }
    if (auto it = in_flight_.find(id); it != in_flight_.end()) {
        ++coalesced_;
        return it->second;
    }
    ++misses_;
    auto promise = std::make_shared<std::promise<Outcome>>();
    Flight flight = promise->get_future().share();
    in_flight_.emplace(id, flight);
    boost::asio::post(*tti_pool_, [this, key, id, promise] {
        Outcome out;
        try {
            auto png = images_->generate(key);
            store_.write(id, png, "image/png");
            out = locator(id);
        } catch (const std::exception& e) {
            spdlog::warn("tti upstream failed for {}: {}", id, e.what());
            out = std::string(e.what());
        }
        {
            std::lock_guard l(mu_);
            in_flight_.erase(id);
        }
        promise->set_value(std::move(out));
    });
    return flight;
}

ImageRef ProxyService::await(const Flight& flight, std::chrono::steady_clock::time_point deadline) {
    if (flight.wait_until(deadline) != std::future_status::ready) {
        throw ProxyError(504, "upstream timed out after " + std::to_string(config_.timeout.count()) + " ms");
    }
    const auto& out = flight.get();
    if (const auto* err = std::get_if<std::string>(&out)) throw ProxyError(502, *err);
    return std::get<ImageRef>(out);
}

ImageRef ProxyService::serve_tti(const gen::GenerationKey& key) {
    const auto deadline = std::chrono::steady_clock::now() + config_.timeout;
    auto got = acquire(key);
    if (auto* ref = std::get_if<ImageRef>(&got)) return *ref;
    return await(std::get<Flight>(got), deadline);
}

std::vector<KeyOutcome> ProxyService::dispatch_parallel(const std::vector<gen::GenerationKey>& batch) {
    if (batch.empty()) throw InvalidBatch("empty batch");
    const auto deadline = std::chrono::steady_clock::now() + config_.timeout;
    std::vector<std::variant<ImageRef, Flight, ProxyError>> started;
    started.reserve(batch.size());
    for (const auto& key : batch) {
        try {
            auto got = acquire(key);
            if (auto* ref = std::get_if<ImageRef>(&got)) started.emplace_back(*ref);
            else started.emplace_back(std::get<Flight>(got));
        } catch (const ProxyError& e) {
            started.emplace_back(e);
        }
    }
    std::vector<KeyOutcome> out;
    out.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        KeyOutcome o{batch[i], std::nullopt, 200, {}};
        try {
            if (auto* ref = std::get_if<ImageRef>(&started[i])) o.image = *ref;
            else if (auto* f = std::get_if<Flight>(&started[i])) o.image = await(*f, deadline);
            else throw std::get<ProxyError>(started[i]);
        } catch (const ProxyError& e) {
            o.status = e.status();
            o.error = e.what();
        }
        out.push_back(std::move(o));
    }
    return out;
}

std::string ProxyService::serve_llm(const gen::LlmRequest& request) {
    if (request.messages.empty()) throw ProxyError(400, "no messages");
    for (const auto& m : request.messages) {
        if (!gen::is_valid_role(m.role)) throw ProxyError(400, "invalid role: " + m.role);
    }
    const auto deadline = std::chrono::steady_clock::now() + config_.timeout;
    std::string cache_key;
    if (config_.cache_llm) {
        cache_key = llm_cache_key(request);
        std::lock_guard lock(mu_);
        if (auto it = llm_cache_.find(cache_key); it != llm_cache_.end()) return it->second;
    }
    auto promise = std::make_shared<std::promise<std::variant<std::string, std::string>>>();
    auto fut = promise->get_future();
    boost::asio::post(*llm_pool_, [this, request, promise] {
        try {
            promise->set_value(std::variant<std::string, std::string>(std::in_place_index<0>, llm_->complete(request)));
        } catch (const std::exception& e) {
            promise->set_value(std::variant<std::string, std::string>(std::in_place_index<1>, e.what()));
        }
    });
    if (fut.wait_until(deadline) != std::future_status::ready) {
        throw ProxyError(504, "upstream timed out after " + std::to_string(config_.timeout.count()) + " ms");
    }
    auto out = fut.get();
    if (out.index() == 1) throw ProxyError(502, std::get<1>(out));
    auto text = std::get<0>(std::move(out));
    if (config_.cache_llm) {
        std::lock_guard lock(mu_);
        llm_cache_.emplace(cache_key, text);
    }
    return text;
}

std::optional<std::vector<uint8_t>> ProxyService::image_bytes(const std::string& id) { return store_.read(id); }

CacheStats ProxyService::cache_stats() const {
    std::lock_guard lock(mu_);
    return CacheStats{store_.entries(), store_.bytes(), hits_, misses_, coalesced_};
}

ImageRef LocalBackend::generate_image(const gen::GenerationKey& key) {
    try {
        return proxy_.serve_tti(key);
    } catch (const ProxyError& e) {
        throw gen::GenerationError(e.what());
    }
}

std::string LocalBackend::complete(const gen::LlmRequest& request) {
    try {
        return proxy_.serve_llm(request);
    } catch (const ProxyError& e) {
        throw gen::GenerationError(e.what());
    }
}

}  // namespace gensheet::proxy
