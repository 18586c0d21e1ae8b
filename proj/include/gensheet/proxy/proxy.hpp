#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "gensheet/genfns/generation.hpp"
#include "gensheet/genfns/service.hpp"
#include "gensheet/proxy/blob_store.hpp"
#include "gensheet/proxy/upstream.hpp"
#include "gensheet/value.hpp"

namespace boost::asio {
class thread_pool;
}

namespace gensheet::proxy {

/// Failure carrying the HTTP status it maps to (400, 404, 502, 504).
class ProxyError : public std::runtime_error {
public:
    ProxyError(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
    int status() const { return status_; }

private:
    int status_;
};

class InvalidBatch : public ProxyError {
public:
    explicit InvalidBatch(const std::string& what) : ProxyError(400, what) {}
};

/// Digest of the canonical (prompt, seed, cfg) encoding.
struct CacheKey {
    Sha256Digest digest{};
    std::string hex() const { return to_hex(digest); }
    bool operator==(const CacheKey&) const = default;
};

CacheKey key_hash(const gen::GenerationKey& key);

struct ProxyConfig {
    int parallelism = 8;
    std::chrono::milliseconds timeout{30'000};
    std::filesystem::path cache_dir = "gensheet-cache";
    bool cache_llm = false;
    std::string image_url_prefix = "/image/";

    /// PROXY_PARALLELISM, PROXY_TIMEOUT_SECS, GENSHEET_CACHE_DIR,
    /// GENSHEET_CACHE_LLM over the defaults. Throws on malformed values.
    static ProxyConfig from_env();
};

struct CacheStats {
    uint64_t entries = 0;
    uint64_t bytes = 0;
    uint64_t hits = 0;
    uint64_t misses = 0;
    uint64_t coalesced = 0;
};

/// Result for one key of a batch: an image or the error status.
struct KeyOutcome {
    gen::GenerationKey key;
    std::optional<ImageRef> image;
    int status = 200;
    std::string error;
};

/// Caching, coalescing front for the image and text providers.
class ProxyService {
public:
    ProxyService(ProxyConfig config, std::shared_ptr<ImageUpstream> images, std::shared_ptr<LlmUpstream> llm);
    ~ProxyService();
    ProxyService(const ProxyService&) = delete;
    ProxyService& operator=(const ProxyService&) = delete;

    const ProxyConfig& config() const { return config_; }

    /// Throws ProxyError: 400 invalid key, 502 upstream failure, 504 timeout.
    ImageRef serve_tti(const gen::GenerationKey& key);
    std::string serve_llm(const gen::LlmRequest& request);
    std::vector<KeyOutcome> dispatch_parallel(const std::vector<gen::GenerationKey>& batch);

    std::optional<std::vector<uint8_t>> image_bytes(const std::string& id);
    CacheStats cache_stats() const;
    ImageRef locator(const std::string& id) const;

private:
    using Outcome = std::variant<ImageRef, std::string>;  // image or upstream error message
    using Flight = std::shared_future<Outcome>;

    std::variant<ImageRef, Flight> acquire(const gen::GenerationKey& key);
    ImageRef await(const Flight& flight, std::chrono::steady_clock::time_point deadline);

    ProxyConfig config_;
    std::shared_ptr<ImageUpstream> images_;
    std::shared_ptr<LlmUpstream> llm_;
    BlobStore store_;
    std::unique_ptr<boost::asio::thread_pool> tti_pool_;
    std::unique_ptr<boost::asio::thread_pool> llm_pool_;

    mutable std::mutex mu_;
    std::map<std::string, Flight> in_flight_;
    std::map<std::string, std::string> llm_cache_;
    uint64_t hits_ = 0;
    uint64_t misses_ = 0;
    uint64_t coalesced_ = 0;
};

/// GenerationBackend calling a ProxyService in the same process.
class LocalBackend : public gen::GenerationBackend {
public:
    explicit LocalBackend(ProxyService& proxy) : proxy_(proxy) {}
    ImageRef generate_image(const gen::GenerationKey& key) override;
    std::string complete(const gen::LlmRequest& request) override;

private:
    ProxyService& proxy_;
};

}  // namespace gensheet::proxy
