#include "gensheet/runtime/runtime.hpp"

#include <boost/asio/post.hpp>
#include <boost/asio/thread_pool.hpp>

namespace gensheet::runtime {

class Runtime::Workers {
public:
    explicit Workers(int n) : pool_(static_cast<std::size_t>(n < 1 ? 1 : n)) {}
    template <typename F>
    void post(F&& f) {
        boost::asio::post(pool_, std::forward<F>(f));
    }
    void shutdown() {
        pool_.stop();
        pool_.join();
    }

private:
    boost::asio::thread_pool pool_;
};

namespace {

class ForwardingDispatcher : public engine::Dispatcher {
public:
    explicit ForwardingDispatcher(std::function<void(uint64_t, const gen::GenRequest&)> fn) : fn_(std::move(fn)) {}
    void dispatch(uint64_t id, const gen::GenRequest& request) override { fn_(id, request); }

private:
    std::function<void(uint64_t, const gen::GenRequest&)> fn_;
};

}  // namespace

Runtime::Runtime(engine::Engine engine, gen::GenerationBackend& backend, int workers)
    : engine_(std::move(engine)), service_(backend), workers_(std::make_unique<Workers>(workers)) {
    dispatcher_ = std::make_unique<ForwardingDispatcher>(
        [this](uint64_t id, const gen::GenRequest& r) { on_dispatch(id, r); });
    attach();
    writer_ = std::thread([this] { writer_loop(); });
}

void Runtime::attach() {
    engine_.set_stale_logger([this](uint64_t, const std::string&) {
        std::lock_guard lock(mu_);
        ++stale_;
    });
    engine_.set_dispatcher(dispatcher_.get());  // flushes requests made while loading
}

engine::ChangeSet Runtime::reset(engine::Engine next, std::function<void()> also_run) {
    return run([this, next = std::move(next), also_run = std::move(also_run)](engine::Engine& e) mutable {
        std::map<engine::CellAddress, Value> old_values;
        for (auto& [a, v] : e.non_blank_values()) old_values.emplace(a, std::move(v));
        ++epoch_;
        e = std::move(next);
        attach();
        if (also_run) also_run();
        std::map<engine::CellAddress, Value> diff;
        for (auto& [a, v] : old_values) diff[a] = Value::blank();
        for (auto& [a, v] : e.non_blank_values()) diff[a] = std::move(v);
        engine::ChangeSet cs;
        for (auto& [a, v] : diff) {
            auto old = old_values.find(a);
            if (old != old_values.end() && old->second == v) continue;
            cs.updates.push_back({a, std::move(v)});
        }
        return cs;
    });
}

Runtime::~Runtime() {
    {
        std::lock_guard lock(mu_);
        stopping_ = true;
    }
    cv_.notify_all();
    idle_cv_.notify_all();
    writer_.join();
    workers_->shutdown();
}

void Runtime::on_dispatch(uint64_t id, const gen::GenRequest& request) {
    {
        std::lock_guard lock(mu_);
        ++outstanding_;
    }
    workers_->post([this, id, request, epoch = epoch_] {
        gen::GenResult result = service_.run(request);
        std::lock_guard lock(mu_);
        --outstanding_;
        if (stopping_) return;
        queue_.push_back([id, epoch, result = std::move(result), this](engine::Engine& e) {
            if (epoch != epoch_) {
                std::lock_guard stale_lock(mu_);
                ++stale_;
                return;
            }
            publish(e.resolve_pending(id, result));
        });
        cv_.notify_one();
    });
}

void Runtime::enqueue(std::function<void(engine::Engine&)> cmd) {
    {
        std::lock_guard lock(mu_);
        if (stopping_) throw std::runtime_error("runtime is shutting down");
        queue_.push_back(std::move(cmd));
    }
    cv_.notify_one();
}

void Runtime::writer_loop() {
    std::unique_lock lock(mu_);
    for (;;) {
        cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
        if (stopping_) return;
        auto cmd = std::move(queue_.front());
        queue_.pop_front();
        busy_ = true;
        lock.unlock();
        cmd(engine_);
        lock.lock();
        busy_ = false;
        idle_cv_.notify_all();
    }
}

bool Runtime::wait_quiescent(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    return idle_cv_.wait_for(lock, timeout, [&] {
        return stopping_ || (queue_.empty() && !busy_ && outstanding_ == 0);
    }) && !stopping_;
}

void Runtime::publish(const engine::ChangeSet& cs) {
    if (cs.updates.empty()) return;
    std::lock_guard lock(sub_mu_);
    ++seq_;
    for (auto& [_, fn] : subscribers_) fn(seq_, cs);
}

int Runtime::subscribe(Subscriber fn) {
    std::lock_guard lock(sub_mu_);
    subscribers_.emplace(next_token_, std::move(fn));
    return next_token_++;
}

void Runtime::unsubscribe(int token) {
    std::lock_guard lock(sub_mu_);
    subscribers_.erase(token);
}

uint64_t Runtime::last_seq() const {
    std::lock_guard lock(sub_mu_);
    return seq_;
}

uint64_t Runtime::stale_results() const {
    std::lock_guard lock(mu_);
    return stale_;
}

}  // namespace gensheet::runtime
