#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <fstream>
#include <random>
#include <thread>

#include "gensheet/genfns/mock.hpp"
#include "gensheet/proxy/http.hpp"
#include "gensheet/proxy/proxy.hpp"
#include "test_support.hpp"

using namespace gensheet;
using namespace gensheet::proxy;
using namespace std::chrono_literals;
using gensheet::testing::temp_dir;

namespace {

struct Fixture {
    std::filesystem::path dir = temp_dir("proxy");
    std::shared_ptr<InstrumentedUpstream> upstream = std::make_shared<InstrumentedUpstream>();
    std::unique_ptr<ProxyService> proxy;

    explicit Fixture(std::chrono::milliseconds timeout = 5s, int parallelism = 8) { start(timeout, parallelism); }
    ~Fixture() {
        upstream->interrupt();
        proxy.reset();
        std::filesystem::remove_all(dir);
    }
    void start(std::chrono::milliseconds timeout = 5s, int parallelism = 8) {
        ProxyConfig cfg;
        cfg.cache_dir = dir;
        cfg.timeout = timeout;
        cfg.parallelism = parallelism;
        proxy = std::make_unique<ProxyService>(cfg, upstream, upstream);
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

TEST_CASE("key_hash") {
    const gen::GenerationKey a{"a", 0, 7.0};
    CHECK(gen::canonical_encoding(a) == std::string("a\x1f" "0\x1f" "7.0"));
    CHECK(key_hash(a).hex() == "ea0e3ca7eeb069edba3ef9e06e9b22181abba03fc15d987bcdce3d5beaed176f");
    CHECK(key_hash(a) == key_hash(gen::GenerationKey{"a", 0, 7.0}));
    CHECK_FALSE(key_hash(a) == key_hash(gen::GenerationKey{"a", 0, 7.1}));
    CHECK_FALSE(key_hash(a) == key_hash(gen::GenerationKey{"a ", 0, 7.0}));
}

TEST_CASE("ten concurrent identical requests share one upstream call") {
    Fixture f;
    f.upstream->set_latency(150ms);
    const gen::GenerationKey key{"a lighthouse", 3, 7.0};
    std::vector<std::thread> threads;
    std::vector<ImageRef> got(10);
    for (int i = 0; i < 10; ++i) threads.emplace_back([&, i] { got[i] = f.proxy->serve_tti(key); });
    for (auto& t : threads) t.join();
    CHECK(f.upstream->image_calls() == 1);
    for (const auto& r : got) CHECK(r == got[0]);
    const auto s = f.proxy->cache_stats();
    CHECK(s.misses == 1);
    CHECK(s.coalesced == 9);
    CHECK(s.hits == 0);
    CHECK(s.entries == 1);
}

TEST_CASE("warm cache answers without upstream calls") {
    Fixture f;
    const gen::GenerationKey key{"fox", 1, 7.0};
    auto first = f.proxy->serve_tti(key);
    auto miss_bytes = f.proxy->image_bytes(first.id);
    for (int i = 0; i < 3; ++i) CHECK(f.proxy->serve_tti(key) == first);
    CHECK(f.upstream->image_calls() == 1);
    auto s = f.proxy->cache_stats();
    CHECK(s.hits == 3);
    CHECK(s.misses == 1);
    CHECK(s.bytes == miss_bytes->size());
    CHECK(f.proxy->image_bytes(first.id) == miss_bytes);
    CHECK(*miss_bytes == gen::mock_tti(key));
    CHECK(first.url == "/image/" + first.id);

    // A restarted service reuses the store.
    f.proxy.reset();
    f.start();
    s = f.proxy->cache_stats();
    CHECK(s.entries == 1);
    CHECK(s.hits == 0);
    CHECK(s.misses == 0);
    CHECK(f.proxy->serve_tti(key) == first);
    CHECK(f.upstream->image_calls() == 1);
}

TEST_CASE("upstream failure reaches every waiter and is not cached") {
    Fixture f;
    f.upstream->set_latency(100ms);
    f.upstream->set_failure([](const std::string& p) { return p == "doomed"; });
    const gen::GenerationKey key{"doomed", 0, 7.0};
    std::vector<std::thread> threads;
    std::atomic<int> bad_gateway{0};
    std::vector<std::string> messages(5);
    for (int i = 0; i < 5; ++i) {
        threads.emplace_back([&, i] {
            try {
                f.proxy->serve_tti(key);
            } catch (const ProxyError& e) {
                if (e.status() == 502) ++bad_gateway;
                messages[i] = e.what();
            }
        });
    }
    for (auto& t : threads) t.join();
    CHECK(bad_gateway == 5);
    for (const auto& m : messages) CHECK(m == messages[0]);
    CHECK(f.upstream->image_calls() == 1);
    CHECK(f.proxy->cache_stats().entries == 0);
    f.upstream->set_failure(nullptr);
    CHECK_NOTHROW(f.proxy->serve_tti(key));
    CHECK(f.upstream->image_calls() == 2);
}

TEST_CASE("invalid keys are rejected before any upstream call") {
    Fixture f;
    for (const auto& key : {gen::GenerationKey{"  ", 0, 7.0}, gen::GenerationKey{"x", 0, 36.0},
                            gen::GenerationKey{"x", 0, 7.05}, gen::GenerationKey{"x", 1ull << 32, 7.0}}) {
        try {
            f.proxy->serve_tti(key);
            FAIL("expected 400");
        } catch (const ProxyError& e) {
            CHECK(e.status() == 400);
        }
    }
    CHECK(f.upstream->image_calls() == 0);
}

TEST_CASE("timeouts") {
    Fixture f(300ms);
    f.upstream->set_latency(5s);
    SUBCASE("image") {
        std::vector<std::thread> threads;
        std::atomic<int> timed_out{0};
        const auto t0 = std::chrono::steady_clock::now();
        for (int i = 0; i < 4; ++i) {
            threads.emplace_back([&] {
                try {
                    f.proxy->serve_tti({"slow", 0, 7.0});
                } catch (const ProxyError& e) {
                    if (e.status() == 504) ++timed_out;
                }
            });
        }
        for (auto& t : threads) t.join();
        const double took = seconds_since(t0);
        CHECK(timed_out == 4);
        CHECK(took >= 0.29);
        CHECK(took < 1.0);
    }
    SUBCASE("text") {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            f.proxy->serve_llm(gen::scalar_request("slow"));
            FAIL("expected 504");
        } catch (const ProxyError& e) {
            CHECK(e.status() == 504);
        }
        CHECK(seconds_since(t0) < 1.0);
    }
}

TEST_CASE("serve_llm") {
    Fixture f;
    auto req = gen::list_request("eras in art history", 3);
    const auto text = f.proxy->serve_llm(req);
    CHECK(text == R"(["eras-in-art-history-1", "eras-in-art-history-2", "eras-in-art-history-3"])");
    CHECK(f.proxy->serve_llm(req) == text);
    CHECK(f.upstream->llm_calls() == 2);  // not cached by default

    gen::LlmRequest bad;
    CHECK_THROWS_AS(f.proxy->serve_llm(bad), ProxyError);
    bad.messages.push_back({"wizard", "hi"});
    try {
        f.proxy->serve_llm(bad);
    } catch (const ProxyError& e) {
        CHECK(e.status() == 400);
    }
}

TEST_CASE("opt-in text cache") {
    auto dir = temp_dir("llmcache");
    auto upstream = std::make_shared<InstrumentedUpstream>();
    ProxyConfig cfg;
    cfg.cache_dir = dir;
    cfg.cache_llm = true;
    ProxyService proxy(cfg, upstream, upstream);
    auto req = gen::scalar_request("Embellish this sentence: a cat");
    CHECK(proxy.serve_llm(req) == proxy.serve_llm(req));
    CHECK(upstream->llm_calls() == 1);
    std::filesystem::remove_all(dir);
}

TEST_CASE("dispatch_parallel") {
    SUBCASE("bounded parallelism in waves") {
        Fixture f(10s, 8);
        f.upstream->set_latency(300ms);
        std::vector<gen::GenerationKey> batch;
        for (int i = 0; i < 15; ++i) batch.push_back({"wave", static_cast<uint64_t>(i), 7.0});
        const auto t0 = std::chrono::steady_clock::now();
        auto out = f.proxy->dispatch_parallel(batch);
        const double took = seconds_since(t0);
        CHECK(out.size() == 15);
        for (const auto& o : out) CHECK(o.image.has_value());
        CHECK(f.upstream->max_concurrency() == 8);
        // ceil(15/8) = 2 waves of 300 ms, plus rendering and scheduling slack.
        CHECK(took >= 0.59);
        CHECK(took < 0.6 + 0.8);
    }
    SUBCASE("duplicates coalesce") {
        Fixture f;
        const gen::GenerationKey k1{"one", 1, 7.0}, k2{"two", 2, 7.0};
        auto out = f.proxy->dispatch_parallel({k1, k1, k2});
        CHECK(f.upstream->image_calls() == 2);
        CHECK(out[0].image == out[1].image);
        CHECK(out[2].image->id == key_hash(k2).hex());
    }
    SUBCASE("failures stay with their key") {
        Fixture f;
        f.upstream->set_failure([](const std::string& p) { return p == "bad"; });
        auto out = f.proxy->dispatch_parallel({{"good", 0, 7.0}, {"bad", 0, 7.0}, {" ", 0, 7.0}});
        CHECK(out[0].image.has_value());
        CHECK(out[1].status == 502);
        CHECK(out[2].status == 400);
    }
    SUBCASE("empty batch") {
        Fixture f;
        CHECK_THROWS_AS(f.proxy->dispatch_parallel({}), InvalidBatch);
    }
}

TEST_CASE("blob store integrity") {
    auto dir = temp_dir("blobs");
    std::string id(64, 'a');
    {
        BlobStore store(dir);
        store.write(id, {1, 2, 3, 4}, "image/png");
        CHECK(store.read(id) == std::vector<uint8_t>{1, 2, 3, 4});
        std::ofstream(store.blob_path(id), std::ios::binary | std::ios::trunc) << "XYZW";
        CHECK_FALSE(store.read(id));
        CHECK_FALSE(store.contains(id));
        CHECK_FALSE(std::filesystem::exists(store.blob_path(id)));
        CHECK_FALSE(std::filesystem::exists(store.meta_path(id)));
        store.write(std::string(64, 'd'), {5, 6}, "image/png");
        std::filesystem::resize_file(store.blob_path(std::string(64, 'd')), 1);
    }
    {
        // Leftover temp file from an interrupted write and a torn blob.
        std::ofstream(dir / (std::string(64, 'b') + ".png.tmp123")) << "partial";
        BlobStore store(dir);
        CHECK(store.entries() == 0);
        CHECK_FALSE(std::filesystem::exists(store.meta_path(std::string(64, 'd'))));
        CHECK_FALSE(std::filesystem::exists(dir / (std::string(64, 'b') + ".png.tmp123")));
        store.write(std::string(64, 'c'), {9}, "image/png");
    }
    BlobStore reopened(dir);
    CHECK(reopened.entries() == 1);
    CHECK(reopened.meta(std::string(64, 'c'))->length == 1);
    std::filesystem::remove_all(dir);
}

TEST_CASE("property: single flight under random schedules") {
    std::mt19937_64 rng(1234);
    Fixture f;
    f.upstream->set_latency(30ms);
    for (int schedule = 0; schedule < 50; ++schedule) {
        const gen::GenerationKey key{"schedule", static_cast<uint64_t>(schedule), 7.0};
        std::vector<int> delays_us(100);
        for (auto& d : delays_us) d = std::uniform_int_distribution<int>(0, 40000)(rng);
        std::vector<ImageRef> got(100);
        std::vector<std::thread> threads;
        for (int i = 0; i < 100; ++i) {
            threads.emplace_back([&, i] {
                std::this_thread::sleep_for(std::chrono::microseconds(delays_us[i]));
                got[i] = f.proxy->serve_tti(key);
            });
        }
        for (auto& t : threads) t.join();
        CHECK(f.upstream->calls_for(key) == 1);
        for (const auto& r : got) CHECK(r == got[0]);
    }
}

TEST_CASE("HTTP routes and HttpBackend") {
    Fixture f;
    httplib::Server server;
    register_proxy_routes(server, *f.proxy);
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    const std::string base = "http://127.0.0.1:" + std::to_string(port);

    HttpBackend backend(base, 10s);
    const gen::GenerationKey key{"portrait of a woman", 3424, 7.0};
    auto ref = backend.generate_image(key);
    CHECK(ref.id == key_hash(key).hex());
    CHECK(ref.width == 512);

    httplib::Client client(base);
    auto img = client.Get(ref.url);
    REQUIRE(img);
    CHECK(img->status == 200);
    CHECK(img->get_header_value("Content-Type") == "image/png");
    CHECK(std::vector<uint8_t>(img->body.begin(), img->body.end()) == gen::mock_tti(key));

    CHECK(client.Get("/image/" + std::string(64, '0'))->status == 404);
    CHECK(client.Post("/tti", "{not json", "application/json")->status == 400);
    CHECK(client.Post("/tti", R"({"prompt": "x", "cfg": 7.05})", "application/json")->status == 400);
    CHECK(client.Post("/tti", R"({"prompt": "x", "seed": -1})", "application/json")->status == 400);
    CHECK(client.Post("/llm", R"({"messages": []})", "application/json")->status == 400);
    auto defaults = client.Post("/tti", R"({"prompt": "x"})", "application/json");
    CHECK(nlohmann::json::parse(defaults->body)["id"] == key_hash({"x", 0, 7.0}).hex());

    gen::GenerationService service(backend);
    auto list = service.run(gen::LlmCall{"SYNONYMS", "red", 3, gen::list_request("Synonyms of \"red\"", 3)});
    REQUIRE(std::holds_alternative<gen::ItemList>(list));
    CHECK(std::get<gen::ItemList>(list)[2] == "synonyms-of-red-3");

    auto stats = nlohmann::json::parse(client.Get("/stats")->body);
    CHECK(stats["entries"] == 2);
    CHECK(stats["misses"] == 2);

    f.upstream->set_failure([](const std::string& p) { return p == "boom"; });
    CHECK(client.Post("/tti", R"({"prompt": "boom"})", "application/json")->status == 502);
    CHECK_THROWS_AS(backend.generate_image({"boom", 0, 7.0}), gen::GenerationError);

    server.stop();
    th.join();
}

TEST_CASE("LocalBackend maps proxy errors to generation errors") {
    Fixture f;
    LocalBackend backend(*f.proxy);
    gen::GenerationService service(backend);
    auto r = service.run(gen::TtiCall{{"cat", 1, 7.0}});
    CHECK(std::holds_alternative<ImageRef>(r));
    auto bad = service.run(gen::TtiCall{{"cat", 1, 99.0}});
    REQUIRE(std::holds_alternative<ErrorValue>(bad));
    CHECK(std::get<ErrorValue>(bad).kind == ErrorKind::GenErr);
}

TEST_CASE("configuration from the environment") {
    setenv("PROXY_PARALLELISM", "3", 1);
    setenv("PROXY_TIMEOUT_SECS", "12", 1);
    auto c = ProxyConfig::from_env();
    CHECK(c.parallelism == 3);
    CHECK(c.timeout == 12s);
    setenv("PROXY_PARALLELISM", "zero", 1);
    CHECK_THROWS(ProxyConfig::from_env());
    unsetenv("PROXY_PARALLELISM");
    unsetenv("PROXY_TIMEOUT_SECS");
    c = ProxyConfig::from_env();
    CHECK(c.parallelism == 8);
    CHECK(c.timeout == 30s);
}
