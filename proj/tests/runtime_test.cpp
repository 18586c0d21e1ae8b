#include <doctest.h>

#include <atomic>
#include <thread>

#include "gensheet/formula/formula.hpp"
#include "gensheet/runtime/runtime.hpp"

using namespace gensheet;
using namespace std::chrono_literals;
using engine::CellAddress;
using engine::Engine;
using runtime::Runtime;

namespace {

CellAddress at(const char* a1) { return engine::parse_address(a1, "Sheet1"); }

/// Mock answers, held back until open() is called.
class GatedBackend : public gen::GenerationBackend {
public:
    ImageRef generate_image(const gen::GenerationKey& key) override {
        wait();
        ++calls;
        return mock.generate_image(key);
    }
    std::string complete(const gen::LlmRequest& request) override {
        wait();
        ++calls;
        return mock.complete(request);
    }
    void open() {
        {
            std::lock_guard lock(mu);
            is_open = true;
        }
        cv.notify_all();
    }
    std::atomic<int> calls{0};

private:
    void wait() {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return is_open; });
    }
    gen::MockBackend mock;
    std::mutex mu;
    std::condition_variable cv;
    bool is_open = false;
};

/// Applies published ChangeSets to a plain map, as an event-stream client would.
struct Mirror {
    std::mutex mu;
    std::map<CellAddress, Value> cells;
    std::vector<uint64_t> seqs;

    void apply(uint64_t seq, const engine::ChangeSet& cs) {
        std::lock_guard lock(mu);
        seqs.push_back(seq);
        for (const auto& u : cs.updates) {
            if (u.value.is_blank()) cells.erase(u.addr);
            else cells[u.addr] = u.value;
        }
    }
};

}  // namespace

TEST_CASE("edits resolve through the worker pool") {
    gen::MockBackend backend;
    Runtime rt(Engine{}, backend, 4);
    Mirror mirror;
    rt.subscribe([&](uint64_t seq, const engine::ChangeSet& cs) { mirror.apply(seq, cs); });

    rt.run([](Engine& e) { return e.set_cell(at("A1"), "a castle"); });
    rt.run([](Engine& e) { return e.set_cell(at("B1"), "=TTI(A1, 5)"); });
    rt.run([](Engine& e) { return e.set_cell(at("C1"), "=GPT_LIST(\"moods\", 3)"); });
    REQUIRE(rt.wait_quiescent(10s));

    auto b1 = rt.run([](Engine& e) { return e.get_value(at("B1")); });
    REQUIRE(b1.is_image());
    CHECK(b1.as_image().id == gen::key_id({"a castle", 5, 7.0}));
    CHECK(rt.run([](Engine& e) { return e.get_value(at("C3")); }) == Value::text("moods-3"));
    CHECK(rt.run([](Engine& e) { return e.in_flight().size(); }) == 0);

    // Event-stream consistency after quiescence.
    auto all = rt.run([](Engine& e) { return e.non_blank_values(); });
    std::lock_guard lock(mirror.mu);
    CHECK(mirror.cells == std::map<CellAddress, Value>(all.begin(), all.end()));
    for (std::size_t i = 0; i < mirror.seqs.size(); ++i) CHECK(mirror.seqs[i] == i + 1);
    CHECK(rt.last_seq() == mirror.seqs.size());
}

TEST_CASE("quiescence waits for outstanding generation") {
    GatedBackend backend;
    Runtime rt(Engine{}, backend, 2);
    rt.run([](Engine& e) { return e.set_cell(at("A1"), "=TTI(\"slow\")"); });
    CHECK_FALSE(rt.wait_quiescent(150ms));
    CHECK(rt.run([](Engine& e) { return e.get_value(at("A1")); }).is_pending());
    backend.open();
    CHECK(rt.wait_quiescent(5s));
    CHECK(rt.run([](Engine& e) { return e.get_value(at("A1")); }).is_image());
}

TEST_CASE("superseded results are counted as stale") {
    GatedBackend backend;
    Runtime rt(Engine{}, backend, 2);
    rt.run([](Engine& e) { return e.set_cell(at("A1"), "=TTI(\"first\")"); });
    rt.run([](Engine& e) { return e.set_cell(at("A1"), "plain"); });
    backend.open();
    REQUIRE(rt.wait_quiescent(5s));
    CHECK(rt.stale_results() == 1);
    CHECK(rt.run([](Engine& e) { return e.get_value(at("A1")); }) == Value::text("plain"));
}

TEST_CASE("loading a workbook dispatches its formulas") {
    engine::Workbook wb;
    wb.sheets["Sheet1"].cells[{0, 0}] = engine::CellContent::parse("=TTI(\"loaded\", 9)");
    gen::MockBackend backend;
    Runtime rt(Engine(std::move(wb)), backend);
    REQUIRE(rt.wait_quiescent(5s));
    CHECK(rt.run([](Engine& e) { return e.get_value(at("A1")); }).as_image().id == gen::key_id({"loaded", 9, 7.0}));
}

TEST_CASE("concurrent writers are serialized") {
    gen::MockBackend backend;
    Runtime rt(Engine{}, backend, 4);
    Mirror mirror;
    rt.subscribe([&](uint64_t seq, const engine::ChangeSet& cs) { mirror.apply(seq, cs); });
    std::vector<std::thread> writers;
    for (int t = 0; t < 6; ++t) {
        writers.emplace_back([&, t] {
            for (int i = 0; i < 40; ++i) {
                const CellAddress a{"Sheet1", t, i};
                if (i % 3 == 0) rt.submit([a, i](Engine& e) { return e.set_cell(a, "=TTI(\"x\", " + std::to_string(i) + ")"); });
                else rt.submit([a, i](Engine& e) { return e.set_cell(a, std::to_string(i)); });
            }
        });
    }
    for (auto& w : writers) w.join();
    REQUIRE(rt.wait_quiescent(20s));
    auto all = rt.run([](Engine& e) { return e.non_blank_values(); });
    CHECK(all.size() == 240);
    for (const auto& [a, v] : all) CHECK_FALSE(v.is_pending());
    std::lock_guard lock(mirror.mu);
    CHECK(mirror.cells == std::map<CellAddress, Value>(all.begin(), all.end()));
}

TEST_CASE("command errors reach the caller") {
    gen::MockBackend backend;
    Runtime rt(Engine{}, backend);
    CHECK_THROWS_AS(rt.run([](Engine& e) { return e.set_cell(at("A1"), "=TTI("); }), formula::ParseError);
    CHECK_THROWS_AS(rt.run([](Engine& e) { return e.set_cell({"Nope", 0, 0}, "1"); }), engine::EngineError);
    CHECK(rt.run([](Engine& e) { return e.sheet_names(); }) == std::vector<std::string>{"Sheet1"});
    int token = rt.subscribe([](uint64_t, const engine::ChangeSet&) { FAIL("unsubscribed"); });
    rt.unsubscribe(token);
    rt.run([](Engine& e) { return e.set_cell(at("A1"), "1"); });
}

TEST_CASE("reset drops results for the old document") {
    GatedBackend backend;
    Runtime rt(Engine{}, backend, 2);
    Mirror mirror;
    rt.subscribe([&](uint64_t seq, const engine::ChangeSet& cs) { mirror.apply(seq, cs); });
    rt.run([](Engine& e) { return e.set_cell(at("A1"), "=TTI(\"old\")"); });
    rt.run([](Engine& e) { return e.set_cell(at("B1"), "kept?"); });

    engine::Workbook wb;
    wb.sheets["Sheet1"].cells[{0, 0}] = engine::CellContent::parse("=TTI(\"new\")");
    wb.sheets["Sheet1"].cells[{1, 0}] = engine::CellContent::parse("fresh");
    auto cs = rt.reset(Engine(std::move(wb)));
    CHECK(cs.find(at("B1"))->is_blank());
    CHECK(*cs.find(at("A2")) == Value::text("fresh"));
    backend.open();
    REQUIRE(rt.wait_quiescent(5s));
    CHECK(rt.stale_results() == 1);
    CHECK(rt.run([](Engine& e) { return e.get_value(at("A1")); }).as_image().id == gen::key_id({"new", 0, 7.0}));
    auto all = rt.run([](Engine& e) { return e.non_blank_values(); });
    std::lock_guard lock(mirror.mu);
    CHECK(mirror.cells == std::map<CellAddress, Value>(all.begin(), all.end()));
}
