#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "gensheet/genfns/generation.hpp"

namespace gensheet::proxy {

/// Provider calls behind the proxy. Failures throw gen::GenerationError.
class ImageUpstream {
public:
    virtual ~ImageUpstream() = default;
    /// PNG bytes for the key.
    virtual std::vector<uint8_t> generate(const gen::GenerationKey& key) = 0;
};

class LlmUpstream {
public:
    virtual ~LlmUpstream() = default;
    virtual std::string complete(const gen::LlmRequest& request) = 0;
};

class MockImageUpstream : public ImageUpstream {
public:
    std::vector<uint8_t> generate(const gen::GenerationKey& key) override;
};

class MockLlmUpstream : public LlmUpstream {
public:
    std::string complete(const gen::LlmRequest& request) override;
};

/// Mock providers with call counting, injected latency and failures.
/// interrupt() wakes every sleeping call, which then fails.
class InstrumentedUpstream : public ImageUpstream, public LlmUpstream {
public:
    std::vector<uint8_t> generate(const gen::GenerationKey& key) override;
    std::string complete(const gen::LlmRequest& request) override;

    void set_latency(std::chrono::milliseconds latency) { latency_ms_ = latency.count(); }
    /// Calls whose prompt (or last message) satisfies the predicate fail.
    void set_failure(std::function<bool(const std::string&)> pred);
    void interrupt();

    int image_calls() const { return image_calls_; }
    int llm_calls() const { return llm_calls_; }
    int calls_for(const gen::GenerationKey& key) const;
    int max_concurrency() const { return max_active_; }
    void reset_counters();

private:
    void enter(const std::string& label);
    void leave();

    std::atomic<int64_t> latency_ms_{0};
    std::atomic<int> image_calls_{0};
    std::atomic<int> llm_calls_{0};
    std::atomic<int> active_{0};
    std::atomic<int> max_active_{0};
    mutable std::mutex mu_;
    std::condition_variable cv_;
    bool interrupted_ = false;
    std::map<std::string, int> per_key_;
    std::function<bool(const std::string&)> fail_;
};

/// OpenAI-style chat completions (model gpt-3.5-turbo).
class OpenAiChatUpstream : public LlmUpstream {
public:
    OpenAiChatUpstream(std::string api_key, std::string base_url, std::chrono::seconds timeout);
    std::string complete(const gen::LlmRequest& request) override;

private:
    std::string api_key_;
    std::string base_url_;
    std::chrono::seconds timeout_;
};

/// Stability-style text-to-image (512x512, PNG response).
class StabilityImageUpstream : public ImageUpstream {
public:
    StabilityImageUpstream(std::string api_key, std::string base_url, std::chrono::seconds timeout);
    std::vector<uint8_t> generate(const gen::GenerationKey& key) override;

private:
    std::string api_key_;
    std::string base_url_;
    std::chrono::seconds timeout_;
};

struct Upstreams {
    std::shared_ptr<ImageUpstream> images;
    std::shared_ptr<LlmUpstream> llm;
};

/// Offline mocks, or the hosted providers configured by OPENAI_API_KEY,
/// STABILITY_API_KEY, OPENAI_BASE_URL and STABILITY_BASE_URL. Throws
/// std::runtime_error when a live key is missing.
Upstreams make_upstreams(bool mock, std::chrono::seconds timeout);

}  // namespace gensheet::proxy
