#include "gensheet/engine/engine.hpp"

#include <algorithm>

#include "gensheet/formula/formula.hpp"

namespace gensheet::engine {

namespace {

/// The list call a formula consists of, if it is one.
const formula::CallNode* top_list_call(const CellContent& c) {
    if (!c.is_formula()) return nullptr;
    const auto* call = c.ast()->as<formula::CallNode>();
    if (!call) return nullptr;
    const auto* spec = gen::find_function(call->name);
    return spec && gen::is_list_function(*spec) ? call : nullptr;
}

bool in_grid(int64_t col, int64_t row) {
    return col >= 0 && col <= formula::kMaxCol && row >= 0 && row <= formula::kMaxRow;
}

/// Strongly connected components over nodes 0..n-1, emitted so that every
/// component comes after the components it has edges to.
std::vector<std::vector<int>> tarjan(const std::vector<std::vector<int>>& adj) {
    const int n = static_cast<int>(adj.size());
    std::vector<int> index(n, -1), low(n, 0);
    std::vector<bool> on_stack(n, false);
    std::vector<int> stack;
    std::vector<std::vector<int>> out;
    int counter = 0;
    struct Frame {
        int v;
        std::size_t next;
    };
    for (int root = 0; root < n; ++root) {
        if (index[root] != -1) continue;
        std::vector<Frame> frames{{root, 0}};
        index[root] = low[root] = counter++;
        stack.push_back(root);
        on_stack[root] = true;
        while (!frames.empty()) {
            auto& f = frames.back();
            if (f.next < adj[f.v].size()) {
                const int w = adj[f.v][f.next++];
                if (index[w] == -1) {
                    index[w] = low[w] = counter++;
                    stack.push_back(w);
                    on_stack[w] = true;
                    frames.push_back({w, 0});
                } else if (on_stack[w]) {
                    low[f.v] = std::min(low[f.v], index[w]);
                }
                continue;
            }
            const int v = f.v;
            frames.pop_back();
            if (!frames.empty()) low[frames.back().v] = std::min(low[frames.back().v], low[v]);
            if (low[v] == index[v]) {
                std::vector<int> comp;
                int w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                    comp.push_back(w);
                } while (w != v);
                std::sort(comp.begin(), comp.end());
                out.push_back(std::move(comp));
            }
        }
    }
    return out;
}

Value from_result(const gen::GenResult& r) {
    if (const auto* img = std::get_if<ImageRef>(&r)) return Value::image(*img);
    if (const auto* s = std::get_if<std::string>(&r)) return Value::text(*s);
    if (const auto* e = std::get_if<ErrorValue>(&r)) return Value::error(e->kind, e->message);
    return Value::error(ErrorKind::GenErr, "provider returned a list where one value was expected");
}

}  // namespace

const Value* ChangeSet::find(const CellAddress& addr) const {
    for (const auto& u : updates) {
        if (u.addr == addr) return &u.value;
    }
    return nullptr;
}

CellAddress SpillRegion::cell(int offset) const {
    CellAddress a = origin;
    if (direction == SpillDirection::Column) a.row += offset;
    else a.col += offset;
    return a;
}

/// Evaluation context bound to the cell being computed.
class Engine::Context : public EvalContext {
public:
    Context(Engine& e, const CellAddress& cell) : engine_(e), cell_(cell) {
        defaults_.seed = e.wb_.settings.default_seed;
        defaults_.cfg = e.wb_.settings.default_cfg;
    }

    Value lookup(const CellAddress& addr) override { return engine_.lookup(addr); }
    bool sheet_exists(const std::string& name) override { return engine_.has_sheet(name); }
    const gen::GenDefaults& defaults() override { return defaults_; }

    std::variant<Value, gen::ItemList> generate(const gen::GenRequest& request) override {
        auto key = gen::request_key(request);
        if (auto m = engine_.memo_.find(key); m != engine_.memo_.end()) {
            if (const auto* items = std::get_if<gen::ItemList>(&m->second)) return *items;
            return from_result(m->second);
        }
        uint64_t id;
        if (auto f = engine_.in_flight_by_key_.find(key); f != engine_.in_flight_by_key_.end()) {
            id = f->second;
        } else {
            id = engine_.next_request_id_++;
            engine_.in_flight_.emplace(id, InFlightRequest{request, key, {}});
            engine_.in_flight_by_key_.emplace(key, id);
            engine_.to_dispatch_.push_back(id);
        }
        engine_.in_flight_.at(id).waiters.insert(cell_);
        engine_.waiting_on_[cell_].insert(id);
        return Value::pending(id);
    }

private:
    Engine& engine_;
    CellAddress cell_;
    gen::GenDefaults defaults_;
};

Engine::Engine() { wb_.sheets["Sheet1"]; }

Engine::Engine(Workbook workbook) : wb_(std::move(workbook)) {
    if (wb_.sheets.empty()) wb_.sheets["Sheet1"];
    for (const auto& [name, sheet] : wb_.sheets) {
        for (const auto& [pos, c] : sheet.cells) {
            if (c.is_formula()) graph_.set_refs(CellAddress{name, pos.col, pos.row}, resolve_refs(*c.ast(), name));
        }
    }
    recompute_all();
}

std::vector<std::string> Engine::sheet_names() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : wb_.sheets) out.push_back(k);
    return out;
}

ChangeSet Engine::set_settings(const WorkbookSettings& settings) {
    wb_.settings = settings;
    auto readers = graph_.readers();
    return apply({}, std::set<CellAddress>(readers.begin(), readers.end()));
}

ChangeSet Engine::add_sheet(const std::string& name) {
    if (name.empty()) throw EngineError("sheet name must not be empty");
    if (has_sheet(name)) throw EngineError("sheet already exists: " + name);
    wb_.sheets[name];
    std::set<CellAddress> dirty;
    for (const auto& reader : graph_.readers()) {
        for (const auto& r : graph_.refs_of(reader)) {
            if (r.sheet == name) dirty.insert(reader);
        }
    }
    return apply({}, std::move(dirty));
}

ChangeSet Engine::set_cell(const CellAddress& addr, std::string_view source) {
    return set_cell(addr, CellContent::parse(source));
}

ChangeSet Engine::set_cell(const CellAddress& addr, CellContent content) {
    std::vector<std::pair<CellAddress, CellContent>> cells;
    cells.emplace_back(addr, std::move(content));
    return apply(std::move(cells), {});
}

ChangeSet Engine::set_cells(std::vector<std::pair<CellAddress, CellContent>> cells) {
    return apply(std::move(cells), {});
}

Value Engine::get_value(const CellAddress& addr) const { return lookup(addr); }

std::vector<std::pair<CellAddress, Value>> Engine::non_blank_values() const {
    std::map<CellAddress, Value> out;
    for (const auto& [name, sheet] : wb_.sheets) {
        for (const auto& [pos, c] : sheet.cells) {
            CellAddress a{name, pos.col, pos.row};
            auto v = lookup(a);
            if (!v.is_blank()) out.emplace(a, std::move(v));
        }
    }
    for (const auto& [child, _] : coverage_) {
        auto v = lookup(child);
        if (!v.is_blank()) out.emplace(child, std::move(v));
    }
    return {out.begin(), out.end()};
}

Value Engine::lookup(const CellAddress& addr) const {
    if (const auto* c = wb_.find(addr)) {
        if (c->kind() == CellContent::Kind::Literal) return c->literal_value();
        auto v = values_.find(addr);
        return v == values_.end() ? Value::blank() : v->second;
    }
    if (auto cov = coverage_.find(addr); cov != coverage_.end()) {
        const auto& o = cov->second;
        const int offset = (addr.row - o.row) + (addr.col - o.col);
        return child_value(o, offset);
    }
    return Value::blank();
}

Value Engine::child_value(const CellAddress& origin, int offset) const {
    auto v = values_.find(origin);
    if (v != values_.end()) {
        if (v->second.is_pending()) return v->second;
        if (v->second.is_error()) {
            if (v->second.as_error().kind == ErrorKind::Cycle) {
                return Value::error(ErrorKind::Value, "depends on a cell in a cycle");
            }
            return v->second;
        }
    }
    auto l = lists_.find(origin);
    if (l == lists_.end() || offset >= static_cast<int>(l->second.size())) return Value::blank();
    return Value::text(l->second[static_cast<std::size_t>(offset)]);
}

std::map<CellAddress, Engine::Reservation> Engine::compute_reservations() const {
    std::map<CellAddress, Reservation> out;
    std::map<CellAddress, int> claims;
    for (const auto& [name, sheet] : wb_.sheets) {
        for (const auto& [pos, c] : sheet.cells) {
            const auto* call = top_list_call(c);
            if (!call) continue;
            auto ext = gen::list_call_extent(*call);
            const auto* e = std::get_if<gen::SpillExtent>(&ext);
            if (!e) continue;
            Reservation r;
            r.region.origin = CellAddress{name, pos.col, pos.row};
            r.region.direction =
                e->direction == gen::OutputShape::ListRow ? SpillDirection::Row : SpillDirection::Column;
            r.region.length = e->length;
            for (int i = 1; i < e->length; ++i) {
                const auto child = r.region.cell(i);
                if (!in_grid(child.col, child.row)) {
                    r.blocked = true;
                    break;
                }
                ++claims[child];
            }
            out.emplace(r.region.origin, r);
        }
    }
    for (auto& [origin, r] : out) {
        for (int i = 1; i < r.region.length && !r.blocked; ++i) {
            const auto child = r.region.cell(i);
            if (!in_grid(child.col, child.row) || wb_.find(child) || claims[child] > 1) r.blocked = true;
        }
    }
    return out;
}

std::map<CellAddress, CellAddress> Engine::coverage_of(const std::map<CellAddress, Reservation>& res) const {
    std::map<CellAddress, CellAddress> out;
    for (const auto& [origin, r] : res) {
        if (r.blocked) continue;
        for (int i = 1; i < r.region.length; ++i) out.emplace(r.region.cell(i), origin);
    }
    return out;
}

void Engine::begin_operation() {
    before_.clear();
    touch_order_.clear();
    order_.clear();
    order_counter_ = 0;
}

void Engine::touch(const CellAddress& addr) {
    if (before_.count(addr)) return;
    before_.emplace(addr, lookup(addr));
    touch_order_.push_back(addr);
    order_[addr] = ++order_counter_;
}

void Engine::touch_region(const CellAddress& origin) {
    auto r = reservations_.find(origin);
    if (r == reservations_.end()) return;
    for (int i = 1; i < r->second.region.length; ++i) {
        const auto child = r->second.region.cell(i);
        if (in_grid(child.col, child.row)) touch(child);
    }
}

void Engine::stop_waiting(const CellAddress& cell) {
    auto w = waiting_on_.find(cell);
    if (w == waiting_on_.end()) return;
    for (auto id : w->second) {
        if (auto f = in_flight_.find(id); f != in_flight_.end()) f->second.waiters.erase(cell);
    }
    waiting_on_.erase(w);
}

ChangeSet Engine::apply(std::vector<std::pair<CellAddress, CellContent>> cells, std::set<CellAddress> extra_dirty) {
    begin_operation();

    for (const auto& [addr, content] : cells) {
        if (!has_sheet(addr.sheet)) throw EngineError("no sheet named " + addr.sheet);
        if (!in_grid(addr.col, addr.row)) throw EngineError("address outside the grid");
    }
    std::set<CellAddress> seeds = std::move(extra_dirty);
    std::set<CellAddress> changed;
    for (const auto& [addr, content] : cells) {
        touch(addr);
        touch_region(addr);
    }
    for (auto& [addr, content] : cells) {
        auto& sheet_cells = wb_.sheets.at(addr.sheet).cells;
        changed.insert(addr);
        stop_waiting(addr);
        values_.erase(addr);
        lists_.erase(addr);
        if (content.is_formula()) {
            graph_.set_refs(addr, resolve_refs(*content.ast(), addr.sheet));
            seeds.insert(addr);
        } else {
            graph_.remove(addr);
            seeds.erase(addr);
        }
        if (content.is_empty()) sheet_cells.erase(addr.pos());
        else sheet_cells[addr.pos()] = std::move(content);
    }

    auto next = compute_reservations();
    std::set<CellAddress> origins;
    for (const auto& [o, _] : reservations_) origins.insert(o);
    for (const auto& [o, _] : next) origins.insert(o);
    for (const auto& o : origins) {
        auto a = reservations_.find(o);
        auto b = next.find(o);
        const bool same = a != reservations_.end() && b != next.end() && a->second.region == b->second.region &&
                          a->second.blocked == b->second.blocked;
        if (same) continue;
        for (const auto* r : {a != reservations_.end() ? &a->second : nullptr, b != next.end() ? &b->second : nullptr}) {
            if (!r) continue;
            for (int i = 1; i < r->region.length; ++i) {
                const auto child = r->region.cell(i);
                if (!in_grid(child.col, child.row)) continue;
                touch(child);
                changed.insert(child);
            }
        }
        if (b != next.end()) seeds.insert(o);
    }
    reservations_ = std::move(next);
    coverage_ = coverage_of(reservations_);

    for (const auto& addr : changed) {
        for (const auto& r : graph_.readers_of(addr)) seeds.insert(r);
    }
    std::set<CellAddress> formula_seeds;
    for (const auto& s : seeds) {
        const auto* c = wb_.find(s);
        if (c && c->is_formula()) formula_seeds.insert(s);
    }
    evaluate_dirty(readers_closure(std::move(formula_seeds)));
    return finish();
}

std::set<CellAddress> Engine::direct_readers(const CellAddress& addr) const {
    auto out = graph_.readers_of(addr);
    auto r = reservations_.find(addr);
    if (r != reservations_.end() && !r->second.blocked) {
        for (int i = 1; i < r->second.region.length; ++i) {
            for (const auto& x : graph_.readers_of(r->second.region.cell(i))) out.insert(x);
        }
    }
    return out;
}

std::set<CellAddress> Engine::readers_closure(std::set<CellAddress> seeds) const {
    std::vector<CellAddress> queue(seeds.begin(), seeds.end());
    while (!queue.empty()) {
        auto x = std::move(queue.back());
        queue.pop_back();
        for (const auto& r : direct_readers(x)) {
            if (seeds.insert(r).second) queue.push_back(r);
        }
    }
    return seeds;
}

std::vector<CellAddress> Engine::effective_deps(const CellAddress& cell) const {
    std::set<CellAddress> out;
    for (const auto& rect : graph_.refs_of(cell)) {
        auto s = wb_.sheets.find(rect.sheet);
        if (s == wb_.sheets.end()) continue;
        const auto& cells = s->second.cells;
        for (auto it = cells.lower_bound(CellPos{rect.row0, rect.col0});
             it != cells.end() && it->first.row <= rect.row1; ++it) {
            if (it->first.col < rect.col0 || it->first.col > rect.col1) continue;
            if (it->second.is_formula()) out.insert(CellAddress{rect.sheet, it->first.col, it->first.row});
        }
        for (auto it = coverage_.lower_bound(CellAddress{rect.sheet, rect.col0, rect.row0});
             it != coverage_.end() && it->first.sheet == rect.sheet && it->first.row <= rect.row1; ++it) {
            if (it->first.col < rect.col0 || it->first.col > rect.col1) continue;
            out.insert(it->second);
        }
    }
    return {out.begin(), out.end()};
}

void Engine::evaluate_dirty(const std::set<CellAddress>& dirty) {
    std::vector<CellAddress> nodes(dirty.begin(), dirty.end());
    std::map<CellAddress, int> ids;
    for (std::size_t i = 0; i < nodes.size(); ++i) ids.emplace(nodes[i], static_cast<int>(i));
    std::vector<std::vector<int>> adj(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        for (const auto& d : effective_deps(nodes[i])) {
            if (auto it = ids.find(d); it != ids.end()) adj[i].push_back(it->second);
        }
    }
    for (const auto& comp : tarjan(adj)) {
        const bool cyclic = comp.size() > 1 || std::find(adj[comp[0]].begin(), adj[comp[0]].end(), comp[0]) !=
                                                   adj[comp[0]].end();
        for (int v : comp) evaluate_cell(nodes[static_cast<std::size_t>(v)], cyclic);
    }
}

void Engine::evaluate_cell(const CellAddress& cell, bool on_cycle) {
    touch(cell);
    touch_region(cell);
    order_[cell] = ++order_counter_;
    if (auto r = reservations_.find(cell); r != reservations_.end()) {
        for (int i = 1; i < r->second.region.length; ++i) {
            const auto child = r->second.region.cell(i);
            if (order_.count(child)) order_[child] = ++order_counter_;
        }
    }
    stop_waiting(cell);
    lists_.erase(cell);
    const auto* content = wb_.find(cell);
    if (!content || !content->is_formula()) {
        values_.erase(cell);
        return;
    }
    if (on_cycle) {
        values_[cell] = Value::error(ErrorKind::Cycle, "reference cycle");
        return;
    }
    Context ctx(*this, cell);
    if (const auto* call = top_list_call(*content)) {
        auto ext = gen::list_call_extent(*call);
        if (const auto* e = std::get_if<ErrorValue>(&ext)) {
            values_[cell] = Value::error(e->kind, e->message);
            return;
        }
        const auto& res = reservations_.at(cell);
        if (res.blocked) {
            values_[cell] = Value::error(ErrorKind::Spill, "spill range is not empty");
            return;
        }
        auto out = evaluate_top(*content->ast(), cell.sheet, ctx);
        if (auto* v = std::get_if<Value>(&out)) {
            values_[cell] = v->is_text() ? Value::error(ErrorKind::GenErr, "provider returned one value for a list")
                                         : *v;
            return;
        }
        auto& items = std::get<gen::ItemList>(out);
        if (static_cast<int>(items.size()) != res.region.length) {
            values_[cell] = Value::error(ErrorKind::GenErr, "expected " + std::to_string(res.region.length) +
                                                                " items, got " + std::to_string(items.size()));
            return;
        }
        values_[cell] = Value::text(items.front());
        lists_[cell] = std::move(items);
        return;
    }
    auto out = evaluate_top(*content->ast(), cell.sheet, ctx);
    if (auto* v = std::get_if<Value>(&out)) {
        values_[cell] = std::move(*v);
    } else {
        values_[cell] = Value::error(ErrorKind::GenErr, "provider returned a list where one value was expected");
    }
}

ChangeSet Engine::finish() {
    ChangeSet cs;
    std::stable_sort(touch_order_.begin(), touch_order_.end(),
                     [&](const CellAddress& a, const CellAddress& b) { return order_.at(a) < order_.at(b); });
    for (const auto& addr : touch_order_) {
        auto now = lookup(addr);
        if (!(now == before_.at(addr))) cs.updates.push_back({addr, std::move(now)});
    }
    begin_operation();
    flush_dispatches();
    return cs;
}

void Engine::set_dispatcher(Dispatcher* dispatcher) {
    dispatcher_ = dispatcher;
    flush_dispatches();
}

void Engine::flush_dispatches() {
    if (!dispatcher_) return;
    auto ids = std::exchange(to_dispatch_, {});
    for (auto id : ids) {
        auto it = in_flight_.find(id);
        if (it != in_flight_.end()) dispatcher_->dispatch(id, it->second.request);
    }
}

ChangeSet Engine::resolve_pending(uint64_t request_id, const gen::GenResult& result) {
    auto it = in_flight_.find(request_id);
    if (it == in_flight_.end()) {
        if (stale_logger_) stale_logger_(request_id, "unknown request");
        ChangeSet cs;
        cs.stale = true;
        return cs;
    }
    memo_[it->second.key] = result;
    in_flight_by_key_.erase(it->second.key);
    auto waiters = std::move(it->second.waiters);
    in_flight_.erase(it);
    for (const auto& w : waiters) {
        auto wo = waiting_on_.find(w);
        if (wo == waiting_on_.end()) continue;
        wo->second.erase(request_id);
        if (wo->second.empty()) waiting_on_.erase(wo);
    }
    if (waiters.empty()) {
        if (stale_logger_) stale_logger_(request_id, "no cell is waiting for this result");
        ChangeSet cs;
        cs.stale = true;
        return cs;
    }
    begin_operation();
    evaluate_dirty(readers_closure(std::move(waiters)));
    return finish();
}

ChangeSet Engine::retry_failed() {
    for (auto it = memo_.begin(); it != memo_.end();) {
        if (std::holds_alternative<ErrorValue>(it->second)) it = memo_.erase(it);
        else ++it;
    }
    std::set<CellAddress> seeds;
    for (const auto& [addr, v] : values_) {
        if (v.is_error() && v.as_error().kind == ErrorKind::GenErr) seeds.insert(addr);
    }
    begin_operation();
    evaluate_dirty(readers_closure(std::move(seeds)));
    return finish();
}

ChangeSet Engine::recompute_all() {
    auto readers = graph_.readers();
    return apply({}, std::set<CellAddress>(readers.begin(), readers.end()));
}

std::vector<SpillRegion> Engine::spill_regions() const {
    std::vector<SpillRegion> out;
    for (const auto& [o, r] : reservations_) {
        if (!r.blocked) out.push_back(r.region);
    }
    return out;
}

std::optional<SpillRegion> Engine::spill_region_at(const CellAddress& origin) const {
    auto r = reservations_.find(origin);
    if (r == reservations_.end() || r->second.blocked) return std::nullopt;
    return r->second.region;
}

std::optional<CellAddress> Engine::spill_owner(const CellAddress& addr) const {
    auto it = coverage_.find(addr);
    if (it == coverage_.end()) return std::nullopt;
    return it->second;
}

ChangeSet Engine::autofill(const CellRange& source, const CellRange& target) {
    const bool down = target.sheet == source.sheet && target.col0 == source.col0 && target.col1 == source.col1 &&
                      target.row0 == source.row0 && target.row1 > source.row1;
    const bool up = target.sheet == source.sheet && target.col0 == source.col0 && target.col1 == source.col1 &&
                    target.row1 == source.row1 && target.row0 < source.row0;
    const bool right = target.sheet == source.sheet && target.row0 == source.row0 && target.row1 == source.row1 &&
                       target.col0 == source.col0 && target.col1 > source.col1;
    const bool left = target.sheet == source.sheet && target.row0 == source.row0 && target.row1 == source.row1 &&
                      target.col1 == source.col1 && target.col0 < source.col0;
    if (!(down || up || right || left)) throw InvalidRange("target does not extend the source along one axis");
    if (!has_sheet(source.sheet)) throw InvalidRange("no sheet named " + source.sheet);
    if (!in_grid(target.col0, target.row0) || !in_grid(target.col1, target.row1)) {
        throw InvalidRange("target outside the grid");
    }
    const int32_t w = source.width();
    const int32_t h = source.height();
    auto wrap = [](int32_t v, int32_t m) { return ((v % m) + m) % m; };
    std::vector<std::pair<CellAddress, CellContent>> cells;
    for (int32_t r = target.row0; r <= target.row1; ++r) {
        for (int32_t c = target.col0; c <= target.col1; ++c) {
            CellAddress dst{target.sheet, c, r};
            if (source.contains(dst)) continue;
            CellAddress src{source.sheet, source.col0 + wrap(c - source.col0, w), source.row0 + wrap(r - source.row0, h)};
            const auto* content = wb_.find(src);
            if (!content) {
                cells.emplace_back(dst, CellContent{});
            } else if (content->is_formula()) {
                cells.emplace_back(dst, CellContent::from_formula(
                                            formula::rewrite_refs(content->ast(), c - src.col, r - src.row)));
            } else {
                cells.emplace_back(dst, *content);
            }
        }
    }
    return apply(std::move(cells), {});
}

ChangeSet Engine::duplicate_region(const CellRange& source, const CellAddress& destination) {
    if (!has_sheet(source.sheet)) throw InvalidRange("no sheet named " + source.sheet);
    if (!has_sheet(destination.sheet)) throw InvalidRange("no sheet named " + destination.sheet);
    const int32_t dc = destination.col - source.col0;
    const int32_t dr = destination.row - source.row0;
    CellRange dst{destination.sheet, destination.col, destination.row, source.col1 + dc, source.row1 + dr};
    if (!in_grid(dst.col0, dst.row0) || !in_grid(dst.col1, dst.row1)) throw InvalidRange("destination outside the grid");
    if (dst.sheet == source.sheet && dst.col0 <= source.col1 && source.col0 <= dst.col1 && dst.row0 <= source.row1 &&
        source.row0 <= dst.row1) {
        throw InvalidRange("source and destination overlap");
    }
    const auto& dst_cells = wb_.sheets.at(dst.sheet).cells;
    for (auto it = dst_cells.lower_bound(CellPos{dst.row0, dst.col0}); it != dst_cells.end() && it->first.row <= dst.row1;
         ++it) {
        if (it->first.col >= dst.col0 && it->first.col <= dst.col1) throw InvalidRange("destination is not empty");
    }
    std::vector<std::pair<CellAddress, CellContent>> cells;
    const auto& src_cells = wb_.sheets.at(source.sheet).cells;
    for (auto it = src_cells.lower_bound(CellPos{source.row0, source.col0});
         it != src_cells.end() && it->first.row <= source.row1; ++it) {
        if (it->first.col < source.col0 || it->first.col > source.col1) continue;
        CellAddress to{dst.sheet, it->first.col + dc, it->first.row + dr};
        if (it->second.is_formula()) {
            cells.emplace_back(to, CellContent::from_formula(formula::rewrite_refs(it->second.ast(), dc, dr)));
        } else {
            cells.emplace_back(to, it->second);
        }
    }
    return apply(std::move(cells), {});
}

std::pair<std::string, ChangeSet> Engine::duplicate_sheet(const std::string& source, std::optional<std::string> new_name) {
    if (!has_sheet(source)) throw EngineError("no sheet named " + source);
    std::string name;
    if (new_name) {
        name = *new_name;
        if (name.empty() || has_sheet(name)) throw EngineError("cannot create sheet " + name);
    } else {
        for (int i = 2;; ++i) {
            name = source + " (" + std::to_string(i) + ")";
            if (!has_sheet(name)) break;
        }
    }
    wb_.sheets[name];
    std::vector<std::pair<CellAddress, CellContent>> cells;
    for (const auto& [pos, c] : wb_.sheets.at(source).cells) {
        CellAddress to{name, pos.col, pos.row};
        if (c.is_formula()) cells.emplace_back(to, CellContent::from_formula(formula::rename_sheet(c.ast(), source, name)));
        else cells.emplace_back(to, c);
    }
    std::set<CellAddress> dirty;
    for (const auto& reader : graph_.readers()) {
        for (const auto& r : graph_.refs_of(reader)) {
            if (r.sheet == name) dirty.insert(reader);
        }
    }
    auto cs = apply(std::move(cells), std::move(dirty));
    return {name, std::move(cs)};
}

}  // namespace gensheet::engine
