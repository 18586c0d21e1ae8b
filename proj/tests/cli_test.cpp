#include <doctest.h>

#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "gensheet/cli/cli.hpp"
#include "gensheet/genfns/generation.hpp"
#include "gensheet/session/session.hpp"
#include "test_support.hpp"

using namespace gensheet;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result gensheet_cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string read_all(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

std::vector<json> manifest(const fs::path& dir) {
    std::vector<json> records;
    std::istringstream in(read_all(dir / "manifest.jsonl"));
    for (std::string line; std::getline(in, line);) records.push_back(json::parse(line));
    return records;
}

/// The kit script of tools/teaser.sh, in-process.
void build_teaser(const std::string& book) {
    REQUIRE(gensheet_cli({"init", book}).code == 0);
    REQUIRE(gensheet_cli({"set", book, "A1", "base prompt"}).code == 0);
    REQUIRE(gensheet_cli({"set", book, "A2", "portrait of a woman"}).code == 0);
    REQUIRE(gensheet_cli({"set", book, "A3", "=EMBELLISH(A2)"}).code == 0);
    auto r = gensheet_cli({"kit", "template", book, "--anchor", "A5", "--template", "{base},{style},{era}", "--slot",
                           "base=range:A3", "--slot", "style=DIVERGENTS:surrealism:5", "--slot",
                           "era=GPT_LIST:eras in art history:5", "--axis", "style=column", "--axis", "era=column",
                           "--seeds", "3424,4244,4238"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    r = gensheet_cli({"kit", "cfg-slider", book, "--anchor", "H5", "--prompt-cell", "C7", "--seed", "4238", "--cfg",
                      "1,3,5,7,9,11,13"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
}

}  // namespace

TEST_CASE("teaser workbook under mocks") {
    const auto dir = testing::temp_dir("cli");
    const auto book = (dir / "teaser.gws").string();
    build_teaser(book);

    auto doc = session::load_file(book);
    const auto& cells = doc.workbook.sheets.at("Sheet1").cells;
    auto src = [&](const char* a1) { return cells.at(engine::parse_address(a1, "Sheet1").pos()).source(); };
    CHECK(src("A6") == "=GPT_LIST(\"eras in art history\", 5)");
    CHECK(src("B6") == "=DIVERGENTS(\"surrealism\", 5)");
    CHECK(src("D5") == "3424");
    CHECK(src("F5") == "4238");
    CHECK(src("D6") == "=TTI($C6, D$5)");
    CHECK(src("I5") == "=TTI($C$7, 4238, $H5)");

    auto r = gensheet_cli({"eval", book, "--mock", "--out", (dir / "one").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    auto records = manifest(dir / "one");
    int images = 0;
    for (const auto& rec : records) {
        if (rec["type"] != "image") continue;
        ++images;
        const auto bytes = read_all(dir / "one" / rec["path"].get<std::string>());
        CHECK(bytes.size() > 100);
        CHECK(bytes.substr(1, 3) == "PNG");
    }
    CHECK(images == 15 + 7);
    CHECK(records.front()["cell"] == "Sheet1!A1");

    // Headless determinism: a second build and run reproduce every byte.
    const auto book2 = (dir / "again.gws").string();
    build_teaser(book2);
    CHECK(read_all(book2) == read_all(book));
    REQUIRE(gensheet_cli({"eval", book2, "--mock", "--out", (dir / "two").string()}).code == 0);
    CHECK(read_all(dir / "two" / "manifest.jsonl") == read_all(dir / "one" / "manifest.jsonl"));
    for (const auto& e : fs::directory_iterator(dir / "one" / "images")) {
        CHECK(read_all(e.path()) == read_all(dir / "two" / "images" / e.path().filename()));
    }
    fs::remove_all(dir);
}

TEST_CASE("eval exit codes") {
    const auto dir = testing::temp_dir("cli");
    const auto book = (dir / "w.gws").string();
    REQUIRE(gensheet_cli({"init", book}).code == 0);
    CHECK(gensheet_cli({"init", book}).code == cli::kLoadFailure);
    REQUIRE(gensheet_cli({"set", book, "B2", "=C2 + 1"}).code == 0);
    REQUIRE(gensheet_cli({"set", book, "C2", "=B2"}).code == 0);
    REQUIRE(gensheet_cli({"set", book, "A1", "fine"}).code == 0);

    auto r = gensheet_cli({"eval", book, "--mock", "--out", (dir / "o").string()});
    CHECK(r.code == cli::kErrorCells);
    CHECK(r.err.find("Sheet1!B2 #CYCLE!") != std::string::npos);
    CHECK(r.err.find("Sheet1!C2 #CYCLE!") != std::string::npos);
    CHECK(manifest(dir / "o").size() == 3);
    CHECK(gensheet_cli({"eval", book, "--mock", "--allow-errors", "--out", (dir / "o").string()}).code == 0);

    CHECK(gensheet_cli({"eval", (dir / "missing.gws").string(), "--mock"}).code == cli::kLoadFailure);
    {
        std::ofstream(dir / "bad.gws") << "gensheet-workbook 1\nsheet \"S\"\ncell A1 formula \"=TTI(\"\n";
    }
    r = gensheet_cli({"eval", (dir / "bad.gws").string(), "--mock"});
    CHECK(r.code == cli::kLoadFailure);
    CHECK(r.err.find("S!A1") != std::string::npos);
    CHECK(gensheet_cli({"set", book, "A1", "=TTI("}).code == 1);
    CHECK(gensheet_cli({"eval"}).code != 0);
    CHECK(gensheet_cli({"--help"}).code == 0);
    fs::remove_all(dir);
}

TEST_CASE("pending at timeout and live configuration") {
    const auto dir = testing::temp_dir("cli");
    const auto book = (dir / "w.gws").string();
    REQUIRE(gensheet_cli({"init", book}).code == 0);
    REQUIRE(gensheet_cli({"set", book, "A1", "=TTI(\"slow\")"}).code == 0);

    ::unsetenv("STABILITY_API_KEY");
    auto r = gensheet_cli({"eval", book, "--out", (dir / "o").string(), "--cache-dir", (dir / "c").string()});
    CHECK(r.code == cli::kLoadFailure);
    CHECK(r.err.find("STABILITY_API_KEY") != std::string::npos);

    httplib::Server slow;
    slow.Post(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
        std::this_thread::sleep_for(std::chrono::milliseconds(1500));
        res.status = 503;
    });
    const int port = slow.bind_to_any_port("127.0.0.1");
    std::thread th([&] { slow.listen_after_bind(); });
    slow.wait_until_ready();
    ::setenv("STABILITY_API_KEY", "test", 1);
    ::setenv("OPENAI_API_KEY", "test", 1);
    ::setenv("STABILITY_BASE_URL", ("http://127.0.0.1:" + std::to_string(port)).c_str(), 1);
    r = gensheet_cli({"eval", book, "--out", (dir / "o").string(), "--cache-dir", (dir / "c").string(), "--timeout",
                      "0.3"});
    CHECK(r.code == cli::kPendingAtTimeout);
    CHECK(r.err.find("pending: Sheet1!A1") != std::string::npos);

    // With enough time the provider failure surfaces as an error cell.
    r = gensheet_cli({"eval", book, "--out", (dir / "o").string(), "--cache-dir", (dir / "c").string()});
    CHECK(r.code == cli::kErrorCells);
    CHECK(r.err.find("Sheet1!A1 #GEN_ERR") != std::string::npos);
    ::unsetenv("STABILITY_API_KEY");
    ::unsetenv("OPENAI_API_KEY");
    ::unsetenv("STABILITY_BASE_URL");
    slow.stop();
    th.join();
    fs::remove_all(dir);
}

TEST_CASE("kit commands") {
    const auto dir = testing::temp_dir("cli");
    const auto book = (dir / "w.gws").string();
    REQUIRE(gensheet_cli({"init", book}).code == 0);
    REQUIRE(gensheet_cli({"set", book, "A2", "a fox"}).code == 0);
    REQUIRE(gensheet_cli({"set", book, "A3", "a heron"}).code == 0);

    auto r = gensheet_cli({"kit", "seed-grid", book, "--prompts", "A2:A3", "--seeds", "3424,4244,4238", "--anchor", "C1"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    auto cells = session::load_file(book).workbook.sheets.at("Sheet1").cells;
    CHECK(cells.at(engine::parse_address("C1", "Sheet1").pos()).source() == "3424");
    CHECK(cells.at(engine::parse_address("E3", "Sheet1").pos()).source() == "=TTI($A$3, E$1)");

    const auto before = read_all(book);
    r = gensheet_cli({"kit", "template", book, "--anchor", "A10", "--template", "{s}", "--slot", "s=manual:a|b",
                      "--axis", "s=diagonal"});
    CHECK(r.code == cli::kKitFailure);
    CHECK(r.err.find("InvalidAxis") != std::string::npos);
    CHECK(r.err.find("--axis") != std::string::npos);  // usage follows
    r = gensheet_cli({"kit", "template", book, "--anchor", "A10", "--template", "{s}", "--slot", "s"});
    CHECK(r.code == cli::kKitFailure);
    r = gensheet_cli({"kit", "seed-grid", book, "--prompts", "A2:A3", "--seeds", "1", "--anchor", "C1"});
    CHECK(r.code == cli::kKitFailure);
    CHECK(r.err.find("Placement") != std::string::npos);
    r = gensheet_cli({"kit", "cfg-slider", book, "--anchor", "K1", "--prompt", "x", "--cfg", "9,3"});
    CHECK(r.code == cli::kKitFailure);
    CHECK(read_all(book) == before);

    r = gensheet_cli({"kit", "power-cell", book, "--cell", "Z1", "--role", "seed", "--value", "11"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(session::load_file(book).power.find(kit::PowerRole::Seed));
    CHECK(gensheet_cli({"kit", "power-cell", book, "--cell", "Z2", "--role", "volume"}).code == cli::kKitFailure);

    r = gensheet_cli({"kit", "template", book, "--anchor", "A10", "--template", "{subject},oil painting", "--slot",
                      "subject=manual:owl|cat", "--axis", "subject=column"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    r = gensheet_cli({"eval", book, "--mock", "--out", (dir / "o").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    int images = 0;
    for (const auto& rec : manifest(dir / "o")) images += rec["type"] == "image";
    CHECK(images == 6 + 2);
    auto doc = session::load_file(book);
    CHECK(doc.workbook.sheets.at("Sheet1").cells.at(engine::parse_address("C11", "Sheet1").pos()).source() ==
          "=TTI(B11, $Z$1)");
    CHECK(gensheet_cli({"kit", "seed-grid", (dir / "nope.gws").string(), "--prompts", "A1", "--seeds", "1",
                        "--anchor", "C1"})
              .code == cli::kLoadFailure);
    fs::remove_all(dir);
}

TEST_CASE("serve refuses a busy port") {
    httplib::Server busy;
    const int port = busy.bind_to_any_port("127.0.0.1");
    std::thread th([&] { busy.listen_after_bind(); });
    busy.wait_until_ready();
    const auto dir = testing::temp_dir("cli");
    auto r = gensheet_cli({"serve", "--mock", "--port", std::to_string(port), "--cache-dir", (dir / "c").string()});
    CHECK(r.code == cli::kLoadFailure);
    CHECK(r.err.find("cannot listen") != std::string::npos);
    busy.stop();
    th.join();
    fs::remove_all(dir);
}
