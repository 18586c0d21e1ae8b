#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <thread>
#include <type_traits>
#include <utility>

#include "gensheet/engine/engine.hpp"
#include "gensheet/genfns/service.hpp"

namespace gensheet::runtime {

/// Every non-empty ChangeSet gets a sequence number, in application order.
using Subscriber = std::function<void(uint64_t seq, const engine::ChangeSet&)>;

/// Owns an Engine behind a single-writer command queue. Generation requests
/// run on a worker pool against the backend and come back as resolve
/// commands. Subscribers are called on the writer thread.
class Runtime {
public:
    Runtime(engine::Engine engine, gen::GenerationBackend& backend, int workers = 8);
    ~Runtime();

    Runtime(const Runtime&) = delete;
    Runtime& operator=(const Runtime&) = delete;

    /// Queues fn(Engine&). A returned ChangeSet (or pair<_, ChangeSet>) is
    /// published to subscribers before the future becomes ready.
    template <typename F>
    auto submit(F&& fn) -> std::future<std::invoke_result_t<F, engine::Engine&>> {
        using R = std::invoke_result_t<F, engine::Engine&>;
        auto task = std::make_shared<std::packaged_task<R(engine::Engine&)>>(
            [this, fn = std::forward<F>(fn)](engine::Engine& e) mutable -> R {
                if constexpr (std::is_void_v<R>) {
                    fn(e);
                } else {
                    R r = fn(e);
                    if constexpr (std::is_same_v<R, engine::ChangeSet>) publish(r);
                    else if constexpr (requires { r.second; }) {
                        if constexpr (std::is_same_v<std::decay_t<decltype(r.second)>, engine::ChangeSet>) publish(r.second);
                    }
                    return r;
                }
            });
        auto fut = task->get_future();
        enqueue([task](engine::Engine& e) { (*task)(e); });
        return fut;
    }

    /// submit() and wait.
    template <typename F>
    auto run(F&& fn) {
        return submit(std::forward<F>(fn)).get();
    }

    /// Swaps in a new document. Results still in flight for the old one are
    /// dropped. Publishes the difference between the two as one ChangeSet.
    /// also_run executes in the same command, after the swap.
    engine::ChangeSet reset(engine::Engine engine, std::function<void()> also_run = {});

    /// True once the queue is empty, no command is running and no generation
    /// is outstanding. False on timeout.
    bool wait_quiescent(std::chrono::milliseconds timeout);

    int subscribe(Subscriber fn);
    void unsubscribe(int token);

    /// Sequence number of the last published ChangeSet.
    uint64_t last_seq() const;
    /// Results that arrived for requests nobody waits on any more.
    uint64_t stale_results() const;

private:
    class Workers;

    void enqueue(std::function<void(engine::Engine&)> cmd);
    void publish(const engine::ChangeSet& cs);
    void writer_loop();
    void on_dispatch(uint64_t id, const gen::GenRequest& request);
    void attach();

    engine::Engine engine_;
    gen::GenerationService service_;

    mutable std::mutex mu_;
    std::condition_variable cv_;        // queue has work or stopping
    std::condition_variable idle_cv_;   // quiescence may have changed
    std::deque<std::function<void(engine::Engine&)>> queue_;
    bool busy_ = false;
    bool stopping_ = false;
    int outstanding_ = 0;
    uint64_t stale_ = 0;
    uint64_t epoch_ = 0;  // writer thread only

    mutable std::mutex sub_mu_;
    std::map<int, Subscriber> subscribers_;
    int next_token_ = 1;
    uint64_t seq_ = 0;

    std::unique_ptr<Workers> workers_;
    std::unique_ptr<engine::Dispatcher> dispatcher_;
    std::thread writer_;
};

}  // namespace gensheet::runtime
