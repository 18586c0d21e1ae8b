#include "gensheet/server/workbook_api.hpp"

#include <httplib.h>

#include <condition_variable>
#include <deque>

#include "gensheet/formula/formula.hpp"

namespace gensheet::server {

using nlohmann::json;
using engine::CellAddress;
using engine::ChangeSet;
using engine::Engine;

json value_to_json(const Value& v) {
    return std::visit(
        [](const auto& d) -> json {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Blank>) return json{{"type", "blank"}};
            else if constexpr (std::is_same_v<T, std::string>) return json{{"type", "text"}, {"text", d}};
            else if constexpr (std::is_same_v<T, double>) return json{{"type", "number"}, {"number", d}};
            else if constexpr (std::is_same_v<T, ImageRef>)
                return json{{"type", "image"}, {"id", d.id}, {"url", d.url}, {"width", d.width}, {"height", d.height}};
            else if constexpr (std::is_same_v<T, ErrorValue>)
                return json{{"type", "error"}, {"code", error_code(d.kind)}, {"message", d.message}};
            else return json{{"type", "pending"}, {"request", d.request_id}};
        },
        v.data());
}

json changeset_to_json(uint64_t seq, const ChangeSet& cs) {
    json updates = json::array();
    for (const auto& u : cs.updates) updates.push_back({{"cell", to_string(u.addr)}, {"value", value_to_json(u.value)}});
    return json{{"seq", seq}, {"updates", updates}};
}

std::string sse_frame(uint64_t seq, const ChangeSet& cs) {
    return "id: " + std::to_string(seq) + "\nevent: changeset\ndata: " + changeset_to_json(seq, cs).dump() + "\n\n";
}

WorkbookApi::WorkbookApi(runtime::Runtime& rt, gen::GenerationService& service, session::Session meta,
                         std::optional<std::filesystem::path> workbook_path)
    : rt_(rt),
      service_(service),
      power_(std::move(meta.power)),
      tokens_(std::move(meta.tokens)),
      path_(std::move(workbook_path)) {}

session::Session WorkbookApi::capture() {
    return rt_.run([this](Engine& e) { return session::Session{e.workbook(), power_, tokens_}; });
}

ChangeSet WorkbookApi::open(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw session::NotFound("no such workbook: " + path.string());
    auto s = session::load_file(path);
    auto cs = rt_.reset(Engine(std::move(s.workbook)), [this, power = std::move(s.power), tokens = std::move(s.tokens)] {
        power_ = power;
        tokens_ = tokens;
    });
    path_ = path;
    std::lock_guard lock(snap_mu_);
    snapshots_.reset();
    return cs;
}

std::filesystem::path WorkbookApi::save(std::optional<std::filesystem::path> path) {
    auto target = path ? *path : path_.value_or("workbook.gws");
    session::save_file(target, capture());
    if (!path_) path_ = target;
    return target;
}

session::SnapshotStore& WorkbookApi::snapshots() {
    std::lock_guard lock(snap_mu_);
    if (!snapshots_) {
        auto dir = path_ ? path_->parent_path() : std::filesystem::current_path();
        snapshots_ = std::make_unique<session::SnapshotStore>(dir.empty() ? "." : dir);
    }
    return *snapshots_;
}

namespace {

class HttpError : public std::runtime_error {
public:
    HttpError(int status, const std::string& what) : std::runtime_error(what), status(status) {}
    int status;
};

json body_of(const httplib::Request& req) {
    try {
        auto j = json::parse(req.body.empty() ? "{}" : req.body);
        if (!j.is_object()) throw HttpError(400, "expected a JSON object");
        return j;
    } catch (const json::exception&) {
        throw HttpError(400, "body is not valid JSON");
    }
}

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

/// Runs a handler and maps document errors to HTTP statuses.
template <typename F>
httplib::Server::Handler guarded(F fn) {
    return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
        try {
            reply(res, 200, fn(req));
        } catch (const HttpError& e) {
            reply(res, e.status, json{{"error", e.what()}});
        } catch (const formula::FormulaError& e) {
            reply(res, 400, json{{"error", e.what()}, {"position", e.position()}});
        } catch (const kit::KitError& e) {
            reply(res, 400, json{{"error", e.what()}, {"kind", kit::kind_name(e.kind())}});
        } catch (const session::DuplicateLabel& e) {
            reply(res, 409, json{{"error", e.what()}});
        } catch (const session::NotFound& e) {
            reply(res, 404, json{{"error", e.what()}});
        } catch (const session::FormatError& e) {
            reply(res, 400, json{{"error", e.what()}, {"line", e.line()}});
        } catch (const session::VersionError& e) {
            reply(res, 400, json{{"error", e.what()}});
        } catch (const engine::EngineError& e) {
            reply(res, 400, json{{"error", e.what()}});
        } catch (const json::exception& e) {
            reply(res, 400, json{{"error", std::string("bad request: ") + e.what()}});
        } catch (const std::invalid_argument& e) {
            reply(res, 400, json{{"error", e.what()}});
        } catch (const std::exception& e) {
            reply(res, 500, json{{"error", e.what()}});
        }
    };
}

/// Direct responses carry the updates only; seq numbers belong to the event stream.
json updates_json(const ChangeSet& cs) {
    auto j = changeset_to_json(0, cs);
    j.erase("seq");
    return j;
}

std::string str(const json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_string()) throw HttpError(400, std::string(key) + " must be a string");
    return j.at(key).get<std::string>();
}

CellAddress addr_of(const std::string& text) { return engine::parse_address(text, "Sheet1"); }

json cell_json(const Engine& e, const CellAddress& a) {
    const auto* c = e.content(a);
    return json{{"cell", to_string(a)}, {"source", c ? c->source() : ""}, {"value", value_to_json(e.get_value(a))}};
}

json key_json(const gen::GenRequest& r) {
    if (const auto* t = std::get_if<gen::TtiCall>(&r)) {
        return json{{"kind", "tti"}, {"prompt", t->key.prompt}, {"seed", t->key.seed}, {"cfg", t->key.cfg}};
    }
    const auto& l = std::get<gen::LlmCall>(r);
    return json{{"kind", "llm"}, {"function", l.function}, {"input", l.input}, {"length", l.length}};
}

json token_json(const session::Token& t) {
    json j{{"label", t.label}};
    if (const auto* text = std::get_if<std::string>(&t.body)) {
        j["text"] = *text;
    } else {
        const auto& d = std::get<kit::DynamicToken>(t.body);
        j["generator"] = session::axis_to_json(d.generator);
        j["items"] = d.items;
    }
    return j;
}

kit::PromptTemplate template_of(const json& j) {
    kit::PromptTemplate t;
    for (const auto& seg : j.at("segments")) {
        if (seg.contains("text")) t.segments.push_back(kit::LiteralText{seg.at("text").get<std::string>()});
        else t.segments.push_back(kit::Slot{seg.at("slot").get<std::string>()});
    }
    if (j.contains("slots")) {
        for (const auto& [id, src] : j.at("slots").items()) t.slots[id] = session::axis_from_json(src);
    }
    return t;
}

kit::TemplateLayout layout_of(const json& j) {
    kit::TemplateLayout l;
    if (j.contains("axes")) {
        for (const auto& [id, axis] : j.at("axes").items()) {
            const auto a = axis.get<std::string>();
            if (a != "column" && a != "row") throw HttpError(400, "axis must be column or row");
            l.axes[id] = a == "column" ? kit::Axis::Column : kit::Axis::Row;
        }
    }
    if (j.contains("fixed")) {
        for (const auto& [id, k] : j.at("fixed").items()) l.fixed_items[id] = k.get<int>();
    }
    if (j.contains("seeds")) l.seeds = j.at("seeds").get<std::vector<uint64_t>>();
    return l;
}

/// Per-connection queue of event-stream frames.
struct EventQueue {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::string> frames;
    bool closed = false;

    void push(std::string f) {
        {
            std::lock_guard lock(mu);
            frames.push_back(std::move(f));
        }
        cv.notify_one();
    }
    std::optional<std::string> pop(std::chrono::milliseconds wait) {
        std::unique_lock lock(mu);
        cv.wait_for(lock, wait, [&] { return closed || !frames.empty(); });
        if (frames.empty()) return std::nullopt;
        auto f = std::move(frames.front());
        frames.pop_front();
        return f;
    }
};

}  // namespace

void register_workbook_routes(httplib::Server& server, WorkbookApi& api) {
    auto& rt = api.runtime();

    server.Get("/api/workbook", guarded([&](const httplib::Request&) {
        return rt.run([&](Engine& e) {
            json power = json::array();
            for (const auto& [role, pc] : api.power().by_role) {
                power.push_back({{"role", kit::role_name(role)}, {"cell", to_string(pc.addr)}, {"label", pc.label}});
            }
            const auto& st = e.settings();
            return json{{"sheets", e.sheet_names()},
                        {"settings",
                         {{"default_seed", st.default_seed},
                          {"default_cfg", st.default_cfg},
                          {"provider_profile", st.provider_profile}}},
                        {"power_cells", power},
                        {"path", api.path() ? api.path()->string() : ""},
                        {"seq", rt.last_seq()}};
        });
    }));

    server.Get("/api/cells", guarded([&](const httplib::Request& req) {
        const std::string sheet = req.get_param_value("sheet");
        return rt.run([&](Engine& e) {
            std::set<CellAddress> cells;
            for (const auto& [a, v] : e.non_blank_values()) cells.insert(a);
            for (const auto& [name, s] : e.workbook().sheets) {
                for (const auto& [pos, c] : s.cells) cells.insert({name, pos.col, pos.row});
            }
            json out = json::array();
            for (const auto& a : cells) {
                if (sheet.empty() || a.sheet == sheet) out.push_back(cell_json(e, a));
            }
            return json{{"seq", rt.last_seq()}, {"cells", out}};
        });
    }));

    server.Get("/api/cell", guarded([&](const httplib::Request& req) {
        const auto a = addr_of(req.get_param_value("addr"));
        return rt.run([&](Engine& e) { return cell_json(e, a); });
    }));

    server.Post("/api/cell", guarded([&](const httplib::Request& req) {
        auto j = body_of(req);
        const auto a = addr_of(str(j, "cell"));
        const auto source = str(j, "source");
        return updates_json(rt.run([&](Engine& e) { return e.set_cell(a, source); }));
    }));

    server.Post("/api/cells", guarded([&](const httplib::Request& req) {
        auto j = body_of(req);
        std::vector<std::pair<CellAddress, engine::CellContent>> batch;
        for (const auto& c : j.at("cells")) {
            batch.emplace_back(addr_of(str(c, "cell")), engine::CellContent::parse(str(c, "source")));
        }
        return updates_json(rt.run([&](Engine& e) { return e.set_cells(std::move(batch)); }));
    }));

    server.Post("/api/sheets", guarded([&](const httplib::Request& req) {
        const auto name = str(body_of(req), "name");
        return updates_json(rt.run([&](Engine& e) { return e.add_sheet(name); }));
    }));

    server.Post("/api/sheets/duplicate", guarded([&](const httplib::Request& req) {
        auto j = body_of(req);
        const auto source = str(j, "source");
        std::optional<std::string> name;
        if (j.contains("name")) name = str(j, "name");
        auto [created, cs] = rt.run([&](Engine& e) { return e.duplicate_sheet(source, name); });
        auto out = updates_json(cs);
        out["sheet"] = created;
        return out;
    }));

    server.Post("/api/autofill", guarded([&](const httplib::Request& req) {
        auto j = body_of(req);
        const auto src = engine::parse_range(str(j, "source"), "Sheet1");
        const auto dst = engine::parse_range(str(j, "target"), src.sheet);
        return updates_json(rt.run([&](Engine& e) { return e.autofill(src, dst); }));
    }));

    server.Post("/api/duplicate-region", guarded([&](const httplib::Request& req) {
        auto j = body_of(req);
        const auto src = engine::parse_range(str(j, "source"), "Sheet1");
        const auto dst = engine::parse_address(str(j, "destination"), src.sheet);
        return updates_json(rt.run([&](Engine& e) { return e.duplicate_region(src, dst); }));
    }));

    server.Post("/api/settings", guarded([&](const httplib::Request& req) {
        auto j = body_of(req);
        return updates_json(rt.run([&](Engine& e) {
            auto st = e.settings();
            if (j.contains("default_seed")) st.default_seed = j.at("default_seed").get<uint32_t>();
            if (j.contains("default_cfg")) {
                st.default_cfg = j.at("default_cfg").get<double>();
                if (auto problem = gen::validate_key({"x", st.default_seed, st.default_cfg})) {
                    throw HttpError(400, *problem);
                }
            }
            if (j.contains("provider_profile")) st.provider_profile = j.at("provider_profile").get<std::string>();
            return e.set_settings(st);
        }));
    }));

    server.Post("/api/retry", guarded([&](const httplib::Request&) {
        return updates_json(rt.run([](Engine& e) { return e.retry_failed(); }));
    }));

    server.Get("/api/pending", guarded([&](const httplib::Request&) {
        return rt.run([](Engine& e) {
            json out = json::array();
            for (const auto& [id, f] : e.in_flight()) {
                json waiters = json::array();
                for (const auto& w : f.waiters) waiters.push_back(to_string(w));
                out.push_back({{"request", id}, {"key", key_json(f.request)}, {"waiters", waiters}});
            }
            return json{{"pending", out}};
        });
    }));

    server.Get("/api/quiescent", guarded([&](const httplib::Request& req) {
        long ms = 0;
        if (req.has_param("timeout_ms")) ms = std::stol(req.get_param_value("timeout_ms"));
        return json{{"quiescent", rt.wait_quiescent(std::chrono::milliseconds(ms))}};
    }));

    server.Post("/api/open", guarded([&](const httplib::Request& req) {
        return updates_json(api.open(str(body_of(req), "path")));
    }));

    server.Post("/api/save", guarded([&](const httplib::Request& req) {
        auto j = body_of(req);
        std::optional<std::filesystem::path> p;
        if (j.contains("path")) p = str(j, "path");
        return json{{"path", api.save(p).string()}};
    }));

    server.Get("/api/snapshots", guarded([&](const httplib::Request&) {
        json out = json::array();
        for (const auto& s : api.snapshots().list()) {
            out.push_back({{"seq", s.seq}, {"label", s.label}, {"timestamp", s.timestamp}});
        }
        return json{{"snapshots", out}};
    }));

    server.Post("/api/snapshots", guarded([&](const httplib::Request& req) {
        auto j = body_of(req);
        auto info = api.snapshots().snapshot(api.capture(), j.value("label", ""));
        return json{{"seq", info.seq}, {"label", info.label}, {"timestamp", info.timestamp}};
    }));

    server.Post("/api/snapshots/restore", guarded([&](const httplib::Request& req) {
        const auto seq = body_of(req).at("seq").get<uint64_t>();
        auto s = api.snapshots().restore(seq);
        auto cs = rt.reset(Engine(std::move(s.workbook)),
                           [&api, power = std::move(s.power), tokens = std::move(s.tokens)] {
                               api.power() = power;
                               api.tokens() = tokens;
                           });
        return updates_json(cs);
    }));

    server.Post("/api/kit/seed-grid", guarded([&](const httplib::Request& req) {
        auto j = body_of(req);
        const auto anchor = addr_of(str(j, "anchor"));
        const auto prompts = engine::parse_range(str(j, "prompts"), anchor.sheet);
        const auto seeds = j.at("seeds").get<std::vector<uint64_t>>();
        return updates_json(rt.run([&](Engine& e) {
            return kit::build_seed_grid(e, api.power(), anchor.sheet, prompts, seeds, anchor);
        }));
    }));

    server.Post("/api/kit/cfg-slider", guarded([&](const httplib::Request& req) {
        auto j = body_of(req);
        const auto anchor = addr_of(str(j, "anchor"));
        kit::PromptArg prompt;
        if (j.contains("prompt_cell")) prompt.value = engine::parse_address(str(j, "prompt_cell"), anchor.sheet);
        else prompt.value = str(j, "prompt");
        std::optional<uint64_t> seed;
        if (j.contains("seed")) seed = j.at("seed").get<uint64_t>();
        const auto cfg = j.at("cfg").get<std::vector<double>>();
        return updates_json(rt.run([&](Engine& e) {
            return kit::build_cfg_slider(e, api.power(), prompt, seed, cfg, anchor);
        }));
    }));

    server.Post("/api/kit/power-cell", guarded([&](const httplib::Request& req) {
        auto j = body_of(req);
        const auto a = addr_of(str(j, "cell"));
        auto role = kit::parse_role(str(j, "role"));
        if (!role) throw HttpError(400, "role must be seed or cfg");
        std::optional<double> value;
        if (j.contains("value")) value = j.at("value").get<double>();
        const auto label = j.value("label", "");
        auto pc = rt.run([&](Engine& e) { return kit::designate_power_cell(e, api.power(), a, *role, value, label); });
        return json{{"cell", to_string(pc.addr)}, {"role", kit::role_name(pc.role)}, {"label", pc.label}};
    }));

    server.Post("/api/kit/template", guarded([&](const httplib::Request& req) {
        auto j = body_of(req);
        const auto anchor = addr_of(str(j, "anchor"));
        const auto tmpl = template_of(j);
        const auto layout = layout_of(j);
        return updates_json(rt.run([&](Engine& e) {
            return kit::expand_template(e, api.power(), tmpl, layout, anchor);
        }));
    }));

    server.Get("/api/tokens", guarded([&](const httplib::Request&) {
        return rt.run([&](Engine&) {
            json out = json::array();
            for (const auto& t : api.tokens().list_tokens()) out.push_back(token_json(t));
            return json{{"tokens", out}};
        });
    }));

    server.Post("/api/tokens", guarded([&](const httplib::Request& req) {
        auto j = body_of(req);
        return rt.run([&](Engine&) {
            if (j.contains("generator")) {
                kit::DynamicToken d{str(j, "label"), session::axis_from_json(j.at("generator")), {}};
                if (j.contains("items")) d.items = j.at("items").get<std::vector<std::string>>();
                kit::axis_length(d.generator);
                return token_json(api.tokens().add_token(std::move(d)));
            }
            return token_json(api.tokens().add_token(str(j, "text")));
        });
    }));

    server.Delete(R"(/api/tokens/(.+))", guarded([&](const httplib::Request& req) {
        const std::string label = req.matches[1];
        rt.run([&](Engine&) { api.tokens().remove_token(label); });
        return json{{"removed", label}};
    }));

    server.Post("/api/tokens/regenerate", guarded([&](const httplib::Request& req) {
        const auto label = str(body_of(req), "label");
        auto token = rt.run([&](Engine&) {
            const auto* t = api.tokens().find(label);
            if (!t || !std::holds_alternative<kit::DynamicToken>(t->body)) {
                throw session::NotFound("no dynamic token labelled " + label);
            }
            return std::get<kit::DynamicToken>(t->body);
        });
        // Provider calls happen off the writer thread; ranges read the document on it.
        kit::DynamicToken next = std::holds_alternative<engine::CellRange>(token.generator)
                                     ? rt.run([&](Engine& e) { return kit::regenerate_token(token, api.service(), &e); })
                                     : kit::regenerate_token(token, api.service());
        rt.run([&](Engine&) { api.tokens().update_token(next); });
        return token_json(session::Token{next.label, next});
    }));

    server.Get("/api/events", [&rt](const httplib::Request&, httplib::Response& res) {
        auto queue = std::make_shared<EventQueue>();
        const int token = rt.subscribe([queue](uint64_t seq, const ChangeSet& cs) { queue->push(sse_frame(seq, cs)); });
        queue->push("retry: 1000\nevent: ready\ndata: " + json{{"seq", rt.last_seq()}}.dump() + "\n\n");
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider(
            "text/event-stream",
            [queue, idle = 0](std::size_t, httplib::DataSink& sink) mutable {
                if (!sink.is_writable()) return false;
                auto frame = queue->pop(std::chrono::milliseconds(200));
                if (!frame) {
                    if (++idle < 75) return true;
                    frame = ": keepalive\n\n";
                }
                idle = 0;
                return sink.write(frame->data(), frame->size());
            },
            [&rt, token, queue](bool) {
                rt.unsubscribe(token);
                std::lock_guard lock(queue->mu);
                queue->closed = true;
            });
    });
}

}  // namespace gensheet::server
