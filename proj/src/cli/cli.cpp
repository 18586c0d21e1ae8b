#include "gensheet/cli/cli.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <algorithm>
#include <csignal>
#include <sstream>

#include "gensheet/kit/kit.hpp"
#include "gensheet/proxy/http.hpp"
#include "gensheet/proxy/proxy.hpp"
#include "gensheet/proxy/upstream.hpp"
#include "gensheet/runtime/runtime.hpp"
#include "gensheet/server/workbook_api.hpp"
#include "gensheet/session/session.hpp"

namespace gensheet::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct EvalOptions {
    std::string workbook;
    bool mock = false;
    std::string out_dir = "gensheet-out";
    bool allow_errors = false;
    double timeout_secs = 120;
    std::string cache_dir;
};

struct ServeOptions {
    std::string workbook;
    std::string host = "127.0.0.1";
    int port = 8040;
    bool mock = false;
    std::string cache_dir;
};

struct KitOptions {
    std::string workbook;
    std::string anchor;
    // seed-grid
    std::string prompts;
    std::vector<uint64_t> seeds;
    // cfg-slider
    std::string prompt;
    std::string prompt_cell;
    std::optional<uint64_t> seed;
    std::vector<double> cfg;
    // power-cell
    std::string cell;
    std::string role;
    std::optional<double> value;
    std::string label;
    // template
    std::string pattern;
    std::vector<std::string> slots;
    std::vector<std::string> axes;
    std::vector<std::string> fixed;
};

/// Proxy plus the backend the engine talks to.
struct Providers {
    std::unique_ptr<proxy::ProxyService> proxy;
    std::unique_ptr<proxy::LocalBackend> backend;
};

Providers make_providers(bool mock, const std::string& cache_dir) {
    auto cfg = proxy::ProxyConfig::from_env();
    if (!cache_dir.empty()) cfg.cache_dir = cache_dir;
    auto up = proxy::make_upstreams(mock, std::chrono::duration_cast<std::chrono::seconds>(cfg.timeout));
    Providers p;
    p.proxy = std::make_unique<proxy::ProxyService>(cfg, up.images, up.llm);
    p.backend = std::make_unique<proxy::LocalBackend>(*p.proxy);
    return p;
}

std::string image_file(const std::string& id) { return "images/" + id + ".png"; }

json manifest_record(const engine::CellAddress& a, const Value& v) {
    auto j = server::value_to_json(v);
    j["cell"] = to_string(a);
    if (v.is_image()) {
        j.erase("url");
        j["path"] = image_file(v.as_image().id);
    }
    return j;
}

int cmd_eval(const EvalOptions& o, std::ostream& out, std::ostream& err) {
    session::Session doc;
    try {
        if (!fs::exists(o.workbook)) throw std::runtime_error("no such file: " + o.workbook);
        doc = session::load_file(o.workbook);
    } catch (const std::exception& e) {
        err << "gensheet: cannot load " << o.workbook << ": " << e.what() << "\n";
        return kLoadFailure;
    }
    const fs::path out_dir = o.out_dir;
    Providers providers;
    try {
        fs::create_directories(out_dir / "images");
        providers = make_providers(o.mock, o.cache_dir.empty() && o.mock ? (out_dir / "cache").string() : o.cache_dir);
    } catch (const std::exception& e) {
        err << "gensheet: " << e.what() << "\n";
        return kLoadFailure;
    }

    std::vector<std::pair<engine::CellAddress, Value>> values;
    std::vector<std::pair<uint64_t, engine::CellAddress>> pending;
    {
        runtime::Runtime rt(engine::Engine(std::move(doc.workbook)), *providers.backend,
                            providers.proxy->config().parallelism);
        const auto budget = std::chrono::milliseconds(static_cast<int64_t>(o.timeout_secs * 1000));
        rt.wait_quiescent(budget);
        rt.run([&](engine::Engine& e) {
            values = e.non_blank_values();
            for (const auto& [id, f] : e.in_flight()) {
                for (const auto& w : f.waiters) pending.emplace_back(id, w);
            }
        });
    }
    std::sort(values.begin(), values.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    std::ostringstream manifest;
    int images = 0;
    std::vector<std::string> errors;
    for (const auto& [a, v] : values) {
        manifest << manifest_record(a, v).dump() << "\n";
        if (v.is_image()) {
            const auto& id = v.as_image().id;
            if (auto bytes = providers.proxy->image_bytes(id)) {
                session::write_file_atomic(out_dir / image_file(id),
                                           std::string_view(reinterpret_cast<const char*>(bytes->data()), bytes->size()));
                ++images;
            } else {
                err << "gensheet: blob missing for " << to_string(a) << "\n";
            }
        }
        if (v.is_error()) {
            errors.push_back(to_string(a) + " " + error_code(v.as_error().kind) + " " + v.as_error().message);
        }
    }
    session::write_file_atomic(out_dir / "manifest.jsonl", manifest.str());
    out << values.size() << " cells, " << images << " images -> " << (out_dir / "manifest.jsonl").string() << "\n";

    if (!pending.empty()) {
        for (const auto& [id, a] : pending) err << "pending: " << to_string(a) << " (request " << id << ")\n";
        err << "gensheet: " << pending.size() << " cells still pending after " << o.timeout_secs << " s\n";
        return kPendingAtTimeout;
    }
    for (const auto& e : errors) err << "error: " << e << "\n";
    if (!errors.empty() && !o.allow_errors) return kErrorCells;
    return 0;
}

httplib::Server* g_server = nullptr;

extern "C" void stop_server(int) {
    if (g_server) g_server->stop();
}

int cmd_serve(const ServeOptions& o, std::ostream& out, std::ostream& err) {
    session::Session doc;
    std::optional<fs::path> path;
    try {
        if (!o.workbook.empty()) {
            path = o.workbook;
            if (fs::exists(*path)) doc = session::load_file(*path);
        }
        if (doc.workbook.sheets.empty()) doc.workbook.sheets["Sheet1"];
    } catch (const std::exception& e) {
        err << "gensheet: cannot load " << o.workbook << ": " << e.what() << "\n";
        return kLoadFailure;
    }
    Providers providers;
    try {
        providers = make_providers(o.mock, o.cache_dir);
    } catch (const std::exception& e) {
        err << "gensheet: " << e.what() << "\n";
        return kLoadFailure;
    }
    gen::GenerationService service(*providers.backend);
    runtime::Runtime rt(engine::Engine(std::move(doc.workbook)), *providers.backend,
                        providers.proxy->config().parallelism);
    server::WorkbookApi api(rt, service, session::Session{{}, std::move(doc.power), std::move(doc.tokens)}, path);

    httplib::Server http;
    // SO_REUSEADDR without SO_REUSEPORT
    http.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });
    proxy::register_proxy_routes(http, *providers.proxy);
    server::register_workbook_routes(http, api);
    if (!http.bind_to_port(o.host, o.port)) {
        err << "gensheet: cannot listen on " << o.host << ":" << o.port << "\n";
        return kLoadFailure;
    }
    out << "serving on http://" << o.host << ":" << o.port << std::endl;
    g_server = &http;
    std::signal(SIGINT, stop_server);
    std::signal(SIGTERM, stop_server);
    http.listen_after_bind();
    g_server = nullptr;
    return 0;
}

kit::KitError bad_spec(const std::string& what) { return kit::KitError(kit::KitErrorKind::InvalidAxis, what); }

std::pair<std::string, std::string> split_assignment(const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw bad_spec("expected id=value, got '" + spec + "'");
    return {spec.substr(0, eq), spec.substr(eq + 1)};
}

/// manual:a|b|c, range:A1:A5, or FUNCTION:input[:length].
kit::AxisSource parse_source(const std::string& text, const std::string& sheet) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw bad_spec("bad slot source '" + text + "'");
    const auto head = text.substr(0, colon);
    const auto rest = text.substr(colon + 1);
    if (head == "manual") {
        kit::ManualList list;
        std::stringstream in(rest);
        for (std::string item; std::getline(in, item, '|');) list.items.push_back(item);
        return list;
    }
    if (head == "range") {
        try {
            return engine::parse_range(rest, sheet);
        } catch (const std::exception& e) {
            throw bad_spec("bad range '" + rest + "': " + e.what());
        }
    }
    kit::GenerativeList g{head, rest, 5};
    const auto last = rest.rfind(':');
    if (last != std::string::npos) {
        const auto len = rest.substr(last + 1);
        if (!len.empty() && std::all_of(len.begin(), len.end(), ::isdigit)) {
            g.input = rest.substr(0, last);
            g.length = std::stoi(len);
        }
    }
    return g;
}

/// Comma-separated segments; `{id}` is a slot.
kit::PromptTemplate parse_template(const KitOptions& o, const std::string& sheet) {
    kit::PromptTemplate t;
    std::stringstream in(o.pattern);
    for (std::string seg; std::getline(in, seg, ',');) {
        const auto b = seg.find_first_not_of(' ');
        if (b == std::string::npos) continue;
        seg = seg.substr(b, seg.find_last_not_of(' ') - b + 1);
        if (seg.size() > 2 && seg.front() == '{' && seg.back() == '}') t.segments.push_back(kit::Slot{seg.substr(1, seg.size() - 2)});
        else t.segments.push_back(kit::LiteralText{seg});
    }
    for (const auto& spec : o.slots) {
        auto [id, src] = split_assignment(spec);
        t.slots[id] = parse_source(src, sheet);
    }
    return t;
}

kit::TemplateLayout parse_layout(const KitOptions& o) {
    kit::TemplateLayout l;
    for (const auto& spec : o.axes) {
        auto [id, axis] = split_assignment(spec);
        if (axis == "column") l.axes[id] = kit::Axis::Column;
        else if (axis == "row") l.axes[id] = kit::Axis::Row;
        else throw bad_spec("axis must be column or row, got '" + axis + "'");
    }
    for (const auto& spec : o.fixed) {
        auto [id, k] = split_assignment(spec);
        try {
            l.fixed_items[id] = std::stoi(k);
        } catch (const std::exception&) {
            throw bad_spec("fixed item must be an index, got '" + k + "'");
        }
    }
    l.seeds = o.seeds;
    return l;
}

int cmd_kit(const std::string& which, const KitOptions& o, const CLI::App& sub, std::ostream& out, std::ostream& err) {
    session::Session doc;
    try {
        if (!fs::exists(o.workbook)) throw std::runtime_error("no such file: " + o.workbook);
        doc = session::load_file(o.workbook);
    } catch (const std::exception& e) {
        err << "gensheet: cannot load " << o.workbook << ": " << e.what() << "\n";
        return kLoadFailure;
    }
    const std::string default_sheet = doc.workbook.sheets.empty() ? "Sheet1" : doc.workbook.sheets.begin()->first;
    engine::Engine engine(std::move(doc.workbook));
    engine::RecordingDispatcher discard;
    engine.set_dispatcher(&discard);
    try {
        auto addr = [&](const std::string& text, const char* flag) {
            if (text.empty()) throw bad_spec(std::string(flag) + " is required");
            try {
                return engine::parse_address(text, default_sheet);
            } catch (const std::exception& e) {
                throw bad_spec(std::string(flag) + ": " + e.what());
            }
        };
        engine::ChangeSet cs;
        if (which == "seed-grid") {
            const auto anchor = addr(o.anchor, "--anchor");
            engine::CellRange prompts;
            try {
                prompts = engine::parse_range(o.prompts, anchor.sheet);
            } catch (const std::exception& e) {
                throw bad_spec(std::string("--prompts: ") + e.what());
            }
            cs = kit::build_seed_grid(engine, doc.power, anchor.sheet, prompts, o.seeds, anchor);
        } else if (which == "cfg-slider") {
            const auto anchor = addr(o.anchor, "--anchor");
            kit::PromptArg prompt;
            if (!o.prompt_cell.empty()) prompt.value = addr(o.prompt_cell, "--prompt-cell");
            else prompt.value = o.prompt;
            cs = kit::build_cfg_slider(engine, doc.power, prompt, o.seed, o.cfg, anchor);
        } else if (which == "power-cell") {
            auto role = kit::parse_role(o.role);
            if (!role) throw bad_spec("--role must be seed or cfg");
            kit::designate_power_cell(engine, doc.power, addr(o.cell, "--cell"), *role, o.value, o.label);
        } else {
            const auto anchor = addr(o.anchor, "--anchor");
            cs = kit::expand_template(engine, doc.power, parse_template(o, anchor.sheet), parse_layout(o), anchor);
        }
        doc.workbook = engine.workbook();
        session::save_file(o.workbook, doc);
        out << which << ": " << cs.updates.size() << " cells updated in " << o.workbook << "\n";
        return 0;
    } catch (const kit::KitError& e) {
        err << "gensheet kit " << which << ": " << kit::kind_name(e.kind()) << ": " << e.what() << "\n\n"
            << sub.help();
        return kKitFailure;
    } catch (const std::exception& e) {
        err << "gensheet kit " << which << ": " << e.what() << "\n\n" << sub.help();
        return kKitFailure;
    }
}

int cmd_init(const std::string& path, std::ostream& out, std::ostream& err) {
    if (fs::exists(path)) {
        err << "gensheet: " << path << " already exists\n";
        return kLoadFailure;
    }
    session::Session doc;
    doc.workbook.sheets["Sheet1"];
    session::save_file(path, doc);
    out << "created " << path << "\n";
    return 0;
}

int cmd_set(const std::string& path, const std::string& cell, const std::string& source, std::ostream& out,
            std::ostream& err) {
    session::Session doc;
    try {
        if (!fs::exists(path)) throw std::runtime_error("no such file");
        doc = session::load_file(path);
    } catch (const std::exception& e) {
        err << "gensheet: cannot load " << path << ": " << e.what() << "\n";
        return kLoadFailure;
    }
    try {
        const std::string sheet = doc.workbook.sheets.empty() ? "Sheet1" : doc.workbook.sheets.begin()->first;
        const auto addr = engine::parse_address(cell, sheet);
        auto content = engine::CellContent::parse(source);
        auto& cells = doc.workbook.sheets[addr.sheet].cells;
        if (content.kind() == engine::CellContent::Kind::Empty) cells.erase(addr.pos());
        else cells[addr.pos()] = std::move(content);
    } catch (const std::exception& e) {
        err << "gensheet set: " << e.what() << "\n";
        return 1;
    }
    session::save_file(path, doc);
    out << "set " << cell << " in " << path << "\n";
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"gensheet: generative spreadsheet engine, proxy and exploration kit"};
    app.require_subcommand(1);

    EvalOptions eval;
    auto* ev = app.add_subcommand("eval", "Evaluate a workbook to quiescence and export a manifest and images");
    ev->add_option("workbook", eval.workbook, "Workbook (.gws)")->required();
    ev->add_flag("--mock", eval.mock, "Offline deterministic providers");
    ev->add_option("--out", eval.out_dir, "Output directory")->capture_default_str();
    ev->add_flag("--allow-errors", eval.allow_errors, "Exit 0 even when cells hold errors");
    ev->add_option("--timeout", eval.timeout_secs, "Seconds to wait for pending cells")->capture_default_str();
    ev->add_option("--cache-dir", eval.cache_dir, "Blob cache directory (default: <out>/cache with --mock)");

    ServeOptions serve;
    auto* sv = app.add_subcommand("serve", "Run the caching proxy and the workbook API");
    sv->add_option("workbook", serve.workbook, "Workbook to open and save to");
    sv->add_option("--host", serve.host)->capture_default_str();
    sv->add_option("--port", serve.port)->capture_default_str()->check(CLI::Range(0, 65535));
    sv->add_flag("--mock", serve.mock, "Offline deterministic providers");
    sv->add_option("--cache-dir", serve.cache_dir, "Blob cache directory");

    std::string init_path;
    auto* in = app.add_subcommand("init", "Create an empty workbook");
    in->add_option("workbook", init_path)->required();

    std::string set_path, set_cell, set_source;
    auto* st = app.add_subcommand("set", "Set one cell's source");
    st->add_option("workbook", set_path)->required();
    st->add_option("cell", set_cell)->required();
    st->add_option("source", set_source)->required();

    KitOptions kit_opts;
    auto* kit = app.add_subcommand("kit", "Apply an exploration-kit constructor and save");
    kit->require_subcommand(1);
    auto* sg = kit->add_subcommand("seed-grid", "Header row of seeds and an image grid");
    auto* cs = kit->add_subcommand("cfg-slider", "Column of cfg values and the matching images");
    auto* pc = kit->add_subcommand("power-cell", "Designate a workbook-wide seed or cfg cell");
    auto* tp = kit->add_subcommand("template", "Expand a prompt template into lists, prompts and images");
    for (auto* s : {sg, cs, pc, tp}) s->add_option("workbook", kit_opts.workbook)->required();
    for (auto* s : {sg, cs, tp}) s->add_option("--anchor", kit_opts.anchor, "Top-left cell")->required();
    sg->add_option("--prompts", kit_opts.prompts, "Column of prompt cells, e.g. A2:A6")->required();
    sg->add_option("--seeds", kit_opts.seeds, "e.g. 3424,4244,4238")->delimiter(',')->required();
    cs->add_option("--prompt", kit_opts.prompt, "Prompt text");
    cs->add_option("--prompt-cell", kit_opts.prompt_cell, "Cell holding the prompt");
    cs->add_option("--seed", kit_opts.seed);
    cs->add_option("--cfg", kit_opts.cfg, "Ascending values in [0, 35]")->delimiter(',')->required();
    pc->add_option("--cell", kit_opts.cell)->required();
    pc->add_option("--role", kit_opts.role, "seed or cfg")->required();
    pc->add_option("--value", kit_opts.value, "Initial value");
    pc->add_option("--label", kit_opts.label);
    tp->add_option("--template", kit_opts.pattern, "Segments separated by commas; {id} is a slot")->required();
    tp->add_option("--slot", kit_opts.slots, "id=FUNCTION:input[:length] | id=manual:a|b | id=range:A1:A5");
    tp->add_option("--axis", kit_opts.axes, "id=column|row");
    tp->add_option("--fixed", kit_opts.fixed, "id=index");
    tp->add_option("--seeds", kit_opts.seeds)->delimiter(',');

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (*ev) return cmd_eval(eval, out, err);
        if (*sv) return cmd_serve(serve, out, err);
        if (*in) return cmd_init(init_path, out, err);
        if (*st) return cmd_set(set_path, set_cell, set_source, out, err);
        for (auto* s : {sg, cs, pc, tp}) {
            if (*s) return cmd_kit(s->get_name(), kit_opts, *s, out, err);
        }
    } catch (const std::exception& e) {
        err << "gensheet: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

}  // namespace gensheet::cli
