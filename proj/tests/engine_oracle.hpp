#pragma once

// From-scratch reference evaluation of a workbook: recursive, memoized,
// with its own spill blocking and a reachability-based cycle check. Shares
// only expression semantics (evaluate_top) with the incremental engine.

#include <map>
#include <optional>
#include <set>

#include "gensheet/engine/engine.hpp"
#include "gensheet/genfns/service.hpp"

namespace gensheet::testing {

class Oracle : public engine::EvalContext {
public:
    Oracle(const engine::Workbook& wb, gen::GenerationService& service) : wb_(wb), service_(service) {
        defaults_.seed = wb.settings.default_seed;
        defaults_.cfg = wb.settings.default_cfg;
        find_regions();
        find_cycles();
    }

    Value value(const engine::CellAddress& addr) {
        if (auto it = done_.find(addr); it != done_.end()) return it->second;
        Value v = compute(addr);
        done_[addr] = v;
        return v;
    }

    const std::set<engine::CellAddress>& cycle_cells() const { return cyclic_; }
    /// child -> origin for every region that holds its cells.
    const std::map<engine::CellAddress, engine::CellAddress>& covered() const { return covered_; }

    Value lookup(const engine::CellAddress& addr) override { return value(addr); }
    bool sheet_exists(const std::string& name) override { return wb_.sheets.count(name) != 0; }
    const gen::GenDefaults& defaults() override { return defaults_; }
    std::variant<Value, gen::ItemList> generate(const gen::GenRequest& request) override {
        auto r = service_.run(request);
        if (auto* items = std::get_if<gen::ItemList>(&r)) return *items;
        if (auto* img = std::get_if<ImageRef>(&r)) return Value::image(*img);
        if (auto* s = std::get_if<std::string>(&r)) return Value::text(*s);
        const auto& e = std::get<ErrorValue>(r);
        return Value::error(e.kind, e.message);
    }

private:
    struct Region {
        engine::CellAddress origin;
        bool row = false;
        int length = 0;
    };

    static const formula::CallNode* list_call(const engine::CellContent& c) {
        if (!c.is_formula()) return nullptr;
        const auto* call = c.ast()->as<formula::CallNode>();
        if (!call) return nullptr;
        const auto* spec = gen::find_function(call->name);
        if (!spec || spec->kind != gen::FunctionKind::LlmList) return nullptr;
        return call;
    }

    static engine::CellAddress child(const Region& r, int i) {
        auto a = r.origin;
        (r.row ? a.col : a.row) += i;
        return a;
    }

    void find_regions() {
        std::vector<Region> all;
        for (const auto& [name, sheet] : wb_.sheets) {
            for (const auto& [pos, c] : sheet.cells) {
                const auto* call = list_call(c);
                if (!call) continue;
                if (call->args.size() == 2 && !call->args[1]->as<formula::NumLit>()) continue;
                int len = gen::kDefaultListLength;
                if (call->args.size() == 2) {
                    const double d = call->args[1]->as<formula::NumLit>()->value;
                    if (d != static_cast<int>(d) || d < 1 || d > gen::kMaxListLength) continue;
                    len = static_cast<int>(d);
                }
                const bool row = call->name.size() > 2 && call->name.substr(call->name.size() - 2) == "_T";
                all.push_back(Region{engine::CellAddress{name, pos.col, pos.row}, row, len});
            }
        }
        for (const auto& r : all) {
            bool ok = true;
            for (int i = 1; i < r.length && ok; ++i) {
                auto c = child(r, i);
                if (c.col > formula::kMaxCol || c.row > formula::kMaxRow) ok = false;
                else if (wb_.find(c)) ok = false;
                for (const auto& other : all) {
                    if (other.origin == r.origin) continue;
                    for (int j = 1; j < other.length; ++j) {
                        if (child(other, j) == c) ok = false;
                    }
                }
            }
            if (!ok) {
                blocked_.insert(r.origin);
                continue;
            }
            regions_[r.origin] = r;
            for (int i = 1; i < r.length; ++i) covered_[child(r, i)] = r.origin;
        }
    }

    std::vector<engine::CellAddress> edges(const engine::CellAddress& from) const {
        std::vector<engine::CellAddress> out;
        const auto* c = wb_.find(from);
        if (!c || !c->is_formula()) return out;
        for (const auto& rect : formula::collect_refs(*c->ast())) {
            const auto sheet = rect.start.sheet.value_or(from.sheet);
            for (int32_t r = rect.start.row; r <= rect.end.row; ++r) {
                for (int32_t col = rect.start.col; col <= rect.end.col; ++col) {
                    engine::CellAddress a{sheet, col, r};
                    const auto* t = wb_.find(a);
                    if (t && t->is_formula()) out.push_back(a);
                    else if (auto cov = covered_.find(a); cov != covered_.end() && !t) out.push_back(cov->second);
                }
            }
        }
        return out;
    }

    void find_cycles() {
        for (const auto& [name, sheet] : wb_.sheets) {
            for (const auto& [pos, c] : sheet.cells) {
                if (!c.is_formula()) continue;
                engine::CellAddress start{name, pos.col, pos.row};
                std::set<engine::CellAddress> seen;
                std::vector<engine::CellAddress> stack = edges(start);
                bool found = false;
                while (!stack.empty() && !found) {
                    auto x = stack.back();
                    stack.pop_back();
                    if (x == start) found = true;
                    if (!seen.insert(x).second) continue;
                    for (auto& y : edges(x)) stack.push_back(y);
                }
                if (found) cyclic_.insert(start);
            }
        }
    }

    Value compute(const engine::CellAddress& addr) {
        const auto* c = wb_.find(addr);
        if (!c) {
            auto cov = covered_.find(addr);
            if (cov == covered_.end()) return Value::blank();
            const auto& origin = cov->second;
            Value ov = value(origin);
            if (ov.is_error() && ov.as_error().kind == ErrorKind::Cycle) {
                return Value::error(ErrorKind::Value, "depends on a cell in a cycle");
            }
            if (ov.is_error() || ov.is_pending()) return ov;
            const int offset = (addr.row - origin.row) + (addr.col - origin.col);
            const auto& items = lists_.at(origin);
            return offset < static_cast<int>(items.size()) ? Value::text(items[offset]) : Value::blank();
        }
        if (!c->is_formula()) return c->literal_value();
        if (cyclic_.count(addr)) return Value::error(ErrorKind::Cycle, "reference cycle");
        if (const auto* call = list_call(*c)) {
            auto ext = gen::list_call_extent(*call);
            if (auto* e = std::get_if<ErrorValue>(&ext)) return Value::error(e->kind, e->message);
            if (blocked_.count(addr)) return Value::error(ErrorKind::Spill, "spill range is not empty");
        }
        auto out = engine::evaluate_top(*c->ast(), addr.sheet, *this);
        if (auto* items = std::get_if<gen::ItemList>(&out)) {
            lists_[addr] = *items;
            return Value::text(items->front());
        }
        return std::get<Value>(out);
    }

    const engine::Workbook& wb_;
    gen::GenerationService& service_;
    gen::GenDefaults defaults_;
    std::map<engine::CellAddress, Region> regions_;
    std::set<engine::CellAddress> blocked_;
    std::map<engine::CellAddress, engine::CellAddress> covered_;
    std::set<engine::CellAddress> cyclic_;
    std::map<engine::CellAddress, Value> done_;
    std::map<engine::CellAddress, gen::ItemList> lists_;
};

}  // namespace gensheet::testing
