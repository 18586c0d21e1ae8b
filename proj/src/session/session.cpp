#include "gensheet/session/session.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "gensheet/formula/formula.hpp"

namespace gensheet::session {

using nlohmann::json;
using engine::CellContent;

const Token& TokenBank::insert(Token t) {
    if (t.label.empty()) throw std::invalid_argument("token label is empty");
    if (tokens_.count(t.label)) throw DuplicateLabel(t.label);
    auto label = t.label;
    return tokens_.emplace(label, std::move(t)).first->second;
}

const Token& TokenBank::add_token(const std::string& text) { return insert(Token{text, text}); }

const Token& TokenBank::add_token(kit::DynamicToken token) {
    auto label = token.label;
    return insert(Token{label, std::move(token)});
}

void TokenBank::remove_token(const std::string& label) {
    if (!tokens_.erase(label)) throw NotFound("no token labelled " + label);
}

void TokenBank::update_token(const kit::DynamicToken& token) {
    auto it = tokens_.find(token.label);
    if (it == tokens_.end() || !std::holds_alternative<kit::DynamicToken>(it->second.body)) {
        throw NotFound("no dynamic token labelled " + token.label);
    }
    it->second.body = token;
}

const Token* TokenBank::find(const std::string& label) const {
    auto it = tokens_.find(label);
    return it == tokens_.end() ? nullptr : &it->second;
}

std::vector<Token> TokenBank::list_tokens() const {
    std::vector<Token> out;
    for (const auto& [_, t] : tokens_) out.push_back(t);
    return out;
}

bool same_contents(const Session& a, const Session& b) {
    if (a.workbook.settings != b.workbook.settings || !(a.power == b.power) || !(a.tokens == b.tokens)) return false;
    if (a.workbook.sheets.size() != b.workbook.sheets.size()) return false;
    for (auto ia = a.workbook.sheets.begin(), ib = b.workbook.sheets.begin(); ia != a.workbook.sheets.end(); ++ia, ++ib) {
        if (ia->first != ib->first || ia->second.cells != ib->second.cells) return false;
    }
    return true;
}

json axis_to_json(const kit::AxisSource& src) {
    if (const auto* m = std::get_if<kit::ManualList>(&src)) return json{{"manual", m->items}};
    if (const auto* g = std::get_if<kit::GenerativeList>(&src)) {
        return json{{"generative", json{{"function", g->function}, {"input", g->input}, {"length", g->length}}}};
    }
    return json{{"range", to_string(std::get<engine::CellRange>(src))}};
}

kit::AxisSource axis_from_json(const json& j) {
    if (j.contains("manual")) return kit::ManualList{j.at("manual").get<std::vector<std::string>>()};
    if (j.contains("generative")) {
        const auto& g = j.at("generative");
        return kit::GenerativeList{g.at("function").get<std::string>(), g.at("input").get<std::string>(),
                                   g.at("length").get<int>()};
    }
    if (j.contains("range")) return engine::parse_range(j.at("range").get<std::string>(), "");
    throw std::invalid_argument("unknown axis source");
}

namespace {

const char* kind_word(const CellContent& c) {
    if (c.is_formula()) return "formula";
    return c.literal_value().is_number() ? "number" : "text";
}

std::string utc_now() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

std::string save(const Session& s) {
    std::ostringstream out;
    out << kMagic << ' ' << kFormatVersion << '\n';
    const auto& st = s.workbook.settings;
    out << "settings "
        << json{{"default_seed", st.default_seed}, {"default_cfg", st.default_cfg}, {"provider_profile", st.provider_profile}}
               .dump()
        << '\n';
    for (const auto& [name, sheet] : s.workbook.sheets) {
        out << "sheet " << json(name).dump() << '\n';
        for (const auto& [pos, c] : sheet.cells) {
            if (c.is_empty()) continue;
            out << "cell " << engine::local_a1(pos.col, pos.row) << ' ' << kind_word(c) << ' ' << json(c.source()).dump()
                << '\n';
        }
    }
    for (const auto& [role, pc] : s.power.by_role) {
        out << "power " << json{{"role", kit::role_name(role)}, {"cell", to_string(pc.addr)}, {"label", pc.label}}.dump()
            << '\n';
    }
    for (const auto& t : s.tokens.list_tokens()) {
        json j{{"label", t.label}};
        if (const auto* text = std::get_if<std::string>(&t.body)) {
            j["text"] = *text;
        } else {
            const auto& d = std::get<kit::DynamicToken>(t.body);
            j["generator"] = axis_to_json(d.generator);
            j["items"] = d.items;
        }
        out << "token " << j.dump() << '\n';
    }
    return out.str();
}

namespace {

/// Splits off the first space-separated word.
std::pair<std::string_view, std::string_view> split_word(std::string_view s) {
    auto sp = s.find(' ');
    if (sp == std::string_view::npos) return {s, {}};
    return {s.substr(0, sp), s.substr(sp + 1)};
}

}  // namespace

Session load(std::string_view bytes) {
    Session s;
    s.workbook.sheets.clear();
    int line_no = 0;
    std::string current_sheet;
    bool have_header = false;
    bool have_sheet = false;
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        auto nl = bytes.find('\n', pos);
        if (nl == std::string_view::npos) nl = bytes.size();
        std::string_view line = bytes.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line[0] == '#') continue;

        auto [word, rest] = split_word(line);
        if (!have_header) {
            if (word != kMagic) throw FormatError(line_no, "missing gensheet-workbook header");
            int version = 0;
            auto [p, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), version);
            if (ec != std::errc() || p != rest.data() + rest.size()) throw FormatError(line_no, "bad format version");
            if (version != kFormatVersion) throw VersionError(version);
            have_header = true;
            continue;
        }
        try {
            if (word == "settings") {
                auto j = json::parse(rest);
                auto& st = s.workbook.settings;
                st.default_seed = j.at("default_seed").get<uint32_t>();
                st.default_cfg = j.at("default_cfg").get<double>();
                st.provider_profile = j.at("provider_profile").get<std::string>();
            } else if (word == "sheet") {
                current_sheet = json::parse(rest).get<std::string>();
                if (current_sheet.empty()) throw FormatError(line_no, "empty sheet name");
                if (!s.workbook.sheets.emplace(current_sheet, engine::Sheet{}).second) {
                    throw FormatError(line_no, "sheet " + current_sheet + " appears twice");
                }
                have_sheet = true;
            } else if (word == "cell") {
                if (!have_sheet) throw FormatError(line_no, "cell before any sheet");
                auto [a1, rest2] = split_word(rest);
                auto [kind, source_json] = split_word(rest2);
                auto ref = formula::parse_cell_ref(a1);
                if (!ref || ref->sheet || ref->col_absolute || ref->row_absolute) {
                    throw FormatError(line_no, "bad cell address " + std::string(a1));
                }
                const auto source = json::parse(source_json).get<std::string>();
                const engine::CellAddress addr{current_sheet, ref->col, ref->row};
                CellContent content;
                if (kind == "formula") {
                    if (source.empty() || source[0] != '=') throw FormatError(line_no, "formula must start with '='");
                    try {
                        content = CellContent::parse(source);
                    } catch (const formula::FormulaError& e) {
                        throw FormatError(line_no, to_string(addr) + ": " + e.what());
                    }
                } else if (kind == "number") {
                    content = source.empty() || source[0] == '=' ? CellContent() : CellContent::parse(source);
                    if (!content.literal_value().is_number()) throw FormatError(line_no, to_string(addr) + ": not a number");
                } else if (kind == "text") {
                    if (source.empty()) throw FormatError(line_no, to_string(addr) + ": empty text");
                    content = CellContent::literal(Value::text(source));
                } else {
                    throw FormatError(line_no, "unknown cell kind " + std::string(kind));
                }
                auto& cells = s.workbook.sheets[current_sheet].cells;
                if (!cells.emplace(addr.pos(), std::move(content)).second) {
                    throw FormatError(line_no, to_string(addr) + " appears twice");
                }
            } else if (word == "power") {
                auto j = json::parse(rest);
                auto role = kit::parse_role(j.at("role").get<std::string>());
                if (!role) throw FormatError(line_no, "unknown power cell role");
                auto addr = engine::parse_address(j.at("cell").get<std::string>(), "");
                s.power.by_role[*role] = kit::PowerCell{addr, *role, j.at("label").get<std::string>()};
            } else if (word == "token") {
                auto j = json::parse(rest);
                auto label = j.at("label").get<std::string>();
                if (j.contains("text")) {
                    if (j.at("text").get<std::string>() != label) throw FormatError(line_no, "text token label mismatch");
                    s.tokens.add_token(label);
                } else {
                    s.tokens.add_token(kit::DynamicToken{label, axis_from_json(j.at("generator")),
                                                         j.at("items").get<std::vector<std::string>>()});
                }
            } else {
                throw FormatError(line_no, "unknown record " + std::string(word));
            }
        } catch (const FormatError&) {
            throw;
        } catch (const DuplicateLabel& e) {
            throw FormatError(line_no, e.what());
        } catch (const std::exception& e) {
            throw FormatError(line_no, e.what());
        }
    }
    if (!have_header) throw FormatError(1, "missing gensheet-workbook header");
    return s;
}

Session load_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return load(ss.str());
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
    static thread_local std::mt19937_64 rng(std::random_device{}());
    auto tmp = path;
    tmp += ".tmp" + std::to_string(rng() % 1000000);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void save_file(const std::filesystem::path& path, const Session& session) { write_file_atomic(path, save(session)); }

namespace {

std::string clean_label(const std::string& label) {
    std::string out;
    for (unsigned char c : label) out.push_back(std::isalnum(c) || c == '-' || c == '_' ? static_cast<char>(c) : '_');
    return out;
}

/// `<seq>-<label>.gws` or `<seq>.gws`.
std::optional<uint64_t> seq_of(const std::filesystem::path& p) {
    if (p.extension() != ".gws") return std::nullopt;
    auto stem = p.stem().string();
    uint64_t seq = 0;
    auto [ptr, ec] = std::from_chars(stem.data(), stem.data() + stem.size(), seq);
    if (ec != std::errc() || ptr == stem.data() || (ptr != stem.data() + stem.size() && *ptr != '-')) return std::nullopt;
    return seq;
}

}  // namespace

SnapshotStore::SnapshotStore(std::filesystem::path dir) : root_(std::move(dir) / "snapshots") {
    std::filesystem::create_directories(root_);
    for (const auto& info : list()) last_seq_ = std::max(last_seq_, info.seq);
}

SnapshotInfo SnapshotStore::snapshot(const Session& session, const std::string& label) {
    std::lock_guard lock(mu_);
    SnapshotInfo info;
    info.seq = ++last_seq_;
    info.label = label;
    info.timestamp = utc_now();
    const auto clean = clean_label(label);
    info.path = root_ / (std::to_string(info.seq) + (clean.empty() ? "" : "-" + clean) + ".gws");
    if (std::filesystem::exists(info.path)) throw std::runtime_error("snapshot already exists: " + info.path.string());
    std::string bytes = "# snapshot " + json{{"seq", info.seq}, {"label", label}, {"timestamp", info.timestamp}}.dump() +
                        "\n" + save(session);
    write_file_atomic(info.path, bytes);
    return info;
}

Session SnapshotStore::restore(uint64_t seq) const {
    for (const auto& info : list()) {
        if (info.seq == seq) return load_file(info.path);
    }
    throw NotFound("no snapshot " + std::to_string(seq));
}

std::vector<SnapshotInfo> SnapshotStore::list() const {
    std::vector<SnapshotInfo> out;
    for (const auto& entry : std::filesystem::directory_iterator(root_)) {
        auto seq = seq_of(entry.path());
        if (!seq) continue;
        SnapshotInfo info{*seq, {}, {}, entry.path()};
        std::ifstream in(entry.path());
        std::string first;
        if (std::getline(in, first) && first.rfind("# snapshot ", 0) == 0) {
            try {
                auto j = json::parse(first.substr(11));
                info.label = j.value("label", "");
                info.timestamp = j.value("timestamp", "");
            } catch (const json::exception&) {
            }
        }
        out.push_back(std::move(info));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.seq < b.seq; });
    return out;
}

}  // namespace gensheet::session
