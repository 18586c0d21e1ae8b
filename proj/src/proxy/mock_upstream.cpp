#include <algorithm>

#include "gensheet/genfns/mock.hpp"
#include "gensheet/genfns/service.hpp"
#include "gensheet/proxy/upstream.hpp"

namespace gensheet::proxy {

std::vector<uint8_t> MockImageUpstream::generate(const gen::GenerationKey& key) {
    if (auto problem = gen::validate_key(key)) throw gen::GenerationError(*problem);
    return gen::mock_tti(key);
}

std::string MockLlmUpstream::complete(const gen::LlmRequest& request) { return gen::mock_llm(request); }

void InstrumentedUpstream::set_failure(std::function<bool(const std::string&)> pred) {
    std::lock_guard lock(mu_);
    fail_ = std::move(pred);
}

void InstrumentedUpstream::interrupt() {
    {
        std::lock_guard lock(mu_);
        interrupted_ = true;
    }
    cv_.notify_all();
}

int InstrumentedUpstream::calls_for(const gen::GenerationKey& key) const {
    std::lock_guard lock(mu_);
    auto it = per_key_.find(gen::canonical_encoding(key));
    return it == per_key_.end() ? 0 : it->second;
}

void InstrumentedUpstream::reset_counters() {
    std::lock_guard lock(mu_);
    per_key_.clear();
    image_calls_ = 0;
    llm_calls_ = 0;
    max_active_ = 0;
}

void InstrumentedUpstream::enter(const std::string& label) {
    const int now = ++active_;
    int seen = max_active_.load();
    while (now > seen && !max_active_.compare_exchange_weak(seen, now)) {
    }
    std::unique_lock lock(mu_);
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(latency_ms_.load());
    cv_.wait_until(lock, deadline, [&] { return interrupted_; });
    const bool interrupted = interrupted_;
    const bool fail = fail_ && fail_(label);
    lock.unlock();
    if (interrupted) {
        leave();
        throw gen::GenerationError("upstream interrupted");
    }
    if (fail) {
        leave();
        throw gen::GenerationError("upstream failure");
    }
}

void InstrumentedUpstream::leave() { --active_; }

std::vector<uint8_t> InstrumentedUpstream::generate(const gen::GenerationKey& key) {
    ++image_calls_;
    {
        std::lock_guard lock(mu_);
        ++per_key_[gen::canonical_encoding(key)];
    }
    enter(key.prompt);
    leave();
    if (auto problem = gen::validate_key(key)) throw gen::GenerationError(*problem);
    return gen::mock_tti(key);
}

std::string InstrumentedUpstream::complete(const gen::LlmRequest& request) {
    ++llm_calls_;
    enter(request.messages.empty() ? std::string() : request.messages.back().content);
    leave();
    return gen::mock_llm(request);
}

}  // namespace gensheet::proxy
