#include <doctest.h>

#include <random>

#include "gensheet/digest.hpp"
#include "gensheet/formula/formula.hpp"
#include "gensheet/genfns/array_literal.hpp"
#include "gensheet/genfns/functions.hpp"
#include "gensheet/genfns/mock.hpp"
#include "gensheet/genfns/service.hpp"

using namespace gensheet;
using namespace gensheet::gen;

namespace {

std::string sha_hex(const std::vector<uint8_t>& bytes) { return to_hex(sha256(bytes)); }

// Scripted backend for the retry path.
struct ScriptedBackend : GenerationBackend {
    std::vector<std::string> replies;
    int calls = 0;
    ImageRef generate_image(const GenerationKey& key) override { return ImageRef{key_id(key), "/image/x", 512, 512}; }
    std::string complete(const LlmRequest&) override {
        const auto& r = replies.at(std::min<std::size_t>(calls, replies.size() - 1));
        ++calls;
        if (r == "THROW") throw GenerationError("timeout");
        return r;
    }
};

double variance(const std::vector<uint8_t>& rgb) {
    double mean = 0;
    for (auto v : rgb) mean += v;
    mean /= rgb.size();
    double acc = 0;
    for (auto v : rgb) acc += (v - mean) * (v - mean);
    return acc / rgb.size();
}

}  // namespace

TEST_CASE("canonical key encoding and digest") {
    GenerationKey k{"a", 0, 7.0};
    CHECK(canonical_encoding(k) == std::string("a\x1F" "0\x1F" "7.0"));
    // Frozen with Python hashlib over the same bytes.
    CHECK(key_id(k) == "ea0e3ca7eeb069edba3ef9e06e9b22181abba03fc15d987bcdce3d5beaed176f");
    CHECK(key_id(k) != key_id(GenerationKey{"a", 0, 7.1}));
    CHECK(validate_key(GenerationKey{"a", 0, 7.05}).has_value());
    CHECK(validate_key(GenerationKey{"  ", 0, 7.0}).has_value());
    CHECK(validate_key(GenerationKey{"a", 4294967296ull, 7.0}).has_value());
    CHECK(validate_key(GenerationKey{"a", 4294967295ull, 35.0}) == std::nullopt);
    CHECK(validate_key(GenerationKey{"a", 0, 35.1}).has_value());
    CHECK(format_cfg(12.5) == "12.5");
    CHECK(format_cfg(0) == "0.0");
}

TEST_CASE("registry") {
    for (const auto& spec : function_specs()) {
        if (!is_list_function(spec)) continue;
        const auto* twin = transposed_twin(spec);
        REQUIRE(twin);
        CHECK(twin->prompt_template == spec.prompt_template);
        CHECK(twin->shape != spec.shape);
        CHECK(transposed_twin(*twin) == &spec);
    }
    CHECK(find_function("synonyms_t")->shape == OutputShape::ListRow);
    CHECK(find_function("UNKNOWN_FN") == nullptr);
}

TEST_CASE("wire format golden strings") {
    auto req = assemble_llm_request(*find_function("SYNONYMS"), "red", 3);
    REQUIRE(req.messages.size() == 4);
    CHECK(req.messages[0].role == "system");
    CHECK(req.messages[0].content == "Respond with a Javascript array literal with the given length in parentheses");
    CHECK(req.messages[1].role == "user");
    CHECK(req.messages[1].content == "types of animals (length: 5)");
    CHECK(req.messages[2].role == "assistant");
    CHECK(req.messages[2].content == "[\"dog\", \"cat\", \"frog\", \"horse\", \"deer\"]");
    CHECK(req.messages[3].role == "user");
    CHECK(req.messages[3].content == "Synonyms of \"red\" (length: 3)");
    CHECK(req.expects_list);
    CHECK(req.expected_length == 3);

    auto emb = assemble_llm_request(*find_function("EMBELLISH"), "portrait of a woman", 0);
    REQUIRE(emb.messages.size() == 1);
    CHECK(emb.messages[0].role == "user");
    CHECK(emb.messages[0].content == "Embellish this sentence: portrait of a woman");
    CHECK_FALSE(emb.expects_list);
}

TEST_CASE("array literal parsing") {
    CHECK(parse_array_literal(R"(["dog", "cat"])") == std::vector<std::string>{"dog", "cat"});
    CHECK(parse_array_literal("['a', \"b\"]  \n") == std::vector<std::string>{"a", "b"});
    CHECK(parse_array_literal("[]") == std::vector<std::string>{});
    CHECK(parse_array_literal(R"(["say \"hi\""])") == std::vector<std::string>{"say \"hi\""});
    CHECK_FALSE(parse_array_literal("Sure! [\"a\"]"));
    CHECK_FALSE(parse_array_literal("[\"a\",]"));
    CHECK_FALSE(parse_array_literal("[1, 2]"));
    CHECK_FALSE(parse_array_literal("[\"a\""));
    const std::vector<std::string> items = {"a \"q\"", "b\\c"};
    CHECK(parse_array_literal(format_array_literal(items)) == items);
}

TEST_CASE("mock llm") {
    CHECK(slugify("Synonyms of \"red\"") == "synonyms-of-red");
    CHECK(mock_llm(list_request("eras in art history", 2)) == R"(["eras-in-art-history-1", "eras-in-art-history-2"])");
    CHECK(mock_llm(assemble_llm_request(*find_function("SYNONYMS"), "red", 3)) ==
          R"(["synonyms-of-red-1", "synonyms-of-red-2", "synonyms-of-red-3"])");
    CHECK(mock_llm(assemble_llm_request(*find_function("EMBELLISH"), "cat", 0)) == "EMBELLISH(cat)");
    CHECK(mock_llm(scalar_request("hello there")) == "GPT(hello there)");
    auto req = assemble_llm_request(*find_function("DIVERGENTS"), "surrealism", 5);
    CHECK(mock_llm(req) == mock_llm(req));
}

TEST_CASE("build_request") {
    const GenDefaults defaults;
    SUBCASE("tti with defaults") {
        auto r = build_request(*find_function("TTI"), {Value::text("portrait of a woman"), Value::number(3424)}, defaults);
        auto* req = std::get_if<GenRequest>(&r);
        REQUIRE(req);
        const auto& key = std::get<TtiCall>(*req).key;
        CHECK(key == GenerationKey{"portrait of a woman", 3424, 7.0});
    }
    SUBCASE("empty prompt") {
        auto r = build_request(*find_function("TTI"), {Value::text("")}, defaults);
        REQUIRE(std::holds_alternative<Value>(r));
        CHECK(std::get<Value>(r).as_error().kind == ErrorKind::Value);
    }
    SUBCASE("whitespace-only embellish input") {
        auto r = build_request(*find_function("EMBELLISH"), {Value::text("   ")}, defaults);
        CHECK(std::get<Value>(r).as_error().kind == ErrorKind::Value);
    }
    SUBCASE("fractional seed") {
        auto r = build_request(*find_function("TTI"), {Value::text("x"), Value::number(1.5)}, defaults);
        CHECK(std::get<Value>(r).is_error());
    }
    SUBCASE("list default length") {
        auto r = build_request(*find_function("DIVERGENTS"), {Value::text("surrealism")}, defaults);
        const auto& call = std::get<LlmCall>(std::get<GenRequest>(r));
        CHECK(call.length == 5);
        CHECK(call.request.messages.back().content == "Divergent words to \"surrealism\" (length: 5)");
    }
    SUBCASE("list completion joins a range") {
        auto r = build_request(*find_function("LIST_COMPLETION"),
                               {std::vector<Value>{Value::text("cubism"), Value::blank(), Value::text("fauvism")}},
                               defaults);
        const auto& call = std::get<LlmCall>(std::get<GenRequest>(r));
        CHECK(call.request.messages.back().content ==
              "Similar items to this list without repeating \"cubism, fauvism\" (length: 5)");
    }
    SUBCASE("transposed twin shares the memo key") {
        auto a = build_request(*find_function("SYNONYMS"), {Value::text("red"), Value::number(3)}, defaults);
        auto b = build_request(*find_function("SYNONYMS_T"), {Value::text("red"), Value::number(3)}, defaults);
        CHECK(request_key(std::get<GenRequest>(a)) == request_key(std::get<GenRequest>(b)));
    }
    SUBCASE("ranges rejected for generative inputs") {
        auto r = build_request(*find_function("TTI"), {std::vector<Value>{Value::text("a")}}, defaults);
        CHECK(std::get<Value>(r).is_error());
    }
}

TEST_CASE("list extent from syntax") {
    auto ast = formula::parse_formula("=GPT_LIST_T(A1, 7)");
    auto ext = list_call_extent(*ast->as<formula::CallNode>());
    REQUIRE(std::holds_alternative<SpillExtent>(ext));
    CHECK(std::get<SpillExtent>(ext).length == 7);
    CHECK(std::get<SpillExtent>(ext).direction == OutputShape::ListRow);
    auto dyn = list_call_extent(*formula::parse_formula("=GPT_LIST(A1, B1)")->as<formula::CallNode>());
    CHECK(std::holds_alternative<ErrorValue>(dyn));
    auto zero = list_call_extent(*formula::parse_formula("=GPT_LIST(A1, 0)")->as<formula::CallNode>());
    CHECK(std::holds_alternative<ErrorValue>(zero));
}

TEST_CASE("generation service list retry") {
    ScriptedBackend backend;
    GenerationService service(backend);
    const auto req = list_request("x", 2);

    backend.replies = {R"(["a", "b"])"};
    CHECK(std::get<ItemList>(service.run_list(req, 2)) == ItemList{"a", "b"});
    CHECK(backend.calls == 1);

    backend.calls = 0;
    backend.replies = {"not an array", R"(["a", "b"])"};
    CHECK(std::get<ItemList>(service.run_list(req, 2)) == ItemList{"a", "b"});
    CHECK(backend.calls == 2);

    backend.calls = 0;
    backend.replies = {R"(["a"])", R"(["a", "b", "c"])"};
    auto err = service.run_list(req, 2);
    REQUIRE(std::holds_alternative<ErrorValue>(err));
    CHECK(std::get<ErrorValue>(err).kind == ErrorKind::GenErr);
    CHECK(backend.calls == 2);

    backend.calls = 0;
    backend.replies = {"THROW"};
    auto timeout = service.run(GenRequest{LlmCall{"GPT", "p", 0, scalar_request("p")}});
    CHECK(std::get<ErrorValue>(timeout).message == "timeout");
}

TEST_CASE("mock image goldens from the independent python oracle") {
    // tests/oracles/mock_image_oracle.py
    CHECK(sha_hex(mock_tti({"a", 0, 7.0})) == "801e3096a22d5fa52e516b6ae831dcb8ec2a36046cd39cbd5ca46027cb91dbae");
    CHECK(sha_hex(mock_tti({"portrait of a woman", 3424, 7.0})) ==
          "295bf39bcc2716119c615f6cc8b4165aed02659f24bb811fda34f27ff4e3bd19");
    CHECK(sha_hex(mock_tti({"portrait of a woman", 4244, 12.5})) ==
          "42ca0bfea21469e563fdd7e0800f8d51247134be855fed3171a280d1db48a4d0");
}

TEST_CASE("parallel and serial pixel kernels agree") {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 10; ++i) {
        GenerationKey key{"k" + std::to_string(rng() % 1000), rng() % 100000, (rng() % 351) / 10.0};
        const auto params = mock_image_params(key);
        std::vector<uint8_t> a(512 * 512 * 3), b(512 * 512 * 3);
        render_mock_pixels(params, a);
        render_mock_pixels_serial(params, b);
        CHECK(a == b);
    }
}

TEST_CASE("seed changes at least 1% of pixels") {
    std::mt19937_64 rng(1234);
    for (int i = 0; i < 100; ++i) {
        GenerationKey a{"prompt " + std::to_string(rng() % 50), rng() % 4294967296ull, (rng() % 351) / 10.0};
        GenerationKey b = a;
        while (b.seed == a.seed) b.seed = rng() % 4294967296ull;
        std::vector<uint8_t> pa(512 * 512 * 3), pb(512 * 512 * 3);
        render_mock_pixels(mock_image_params(a), pa);
        render_mock_pixels(mock_image_params(b), pb);
        std::size_t differ = 0;
        for (std::size_t p = 0; p < pa.size(); p += 3) {
            if (pa[p] != pb[p] || pa[p + 1] != pb[p + 1] || pa[p + 2] != pb[p + 2]) ++differ;
        }
        CHECK(differ * 100 >= 512 * 512);
    }
}

TEST_CASE("pixel variance grows with cfg") {
    double prev = -1;
    for (double cfg : {1.0, 5.0, 9.0, 13.0}) {
        std::vector<uint8_t> rgb(512 * 512 * 3);
        render_mock_pixels(mock_image_params({"cfg slider", 42, cfg}), rgb);
        const double v = variance(rgb);
        CHECK(v > prev);
        prev = v;
    }
}

TEST_CASE("png container") {
    const auto png = mock_tti({"a", 0, 7.0});
    REQUIRE(png.size() > 8);
    CHECK(png[0] == 0x89);
    CHECK(png[1] == 'P');
    CHECK(std::string(png.begin() + 12, png.begin() + 16) == "IHDR");
    CHECK(mock_tti({"a", 0, 7.0}) == png);
}
