#include "gensheet/engine/dependency_graph.hpp"

namespace gensheet::engine {

void DependencyGraph::set_refs(const CellAddress& reader, std::vector<CellRange> refs) {
    remove(reader);
    std::vector<CellRange> ranges;
    for (const auto& r : refs) {
        if (r.width() == 1 && r.height() == 1) {
            point_readers_[CellAddress{r.sheet, r.col0, r.row0}].insert(reader);
        } else {
            ranges.push_back(r);
        }
    }
    if (!ranges.empty()) range_readers_[reader] = std::move(ranges);
    forward_[reader] = std::move(refs);
}

void DependencyGraph::remove(const CellAddress& reader) {
    auto it = forward_.find(reader);
    if (it == forward_.end()) return;
    for (const auto& r : it->second) {
        if (r.width() == 1 && r.height() == 1) {
            auto p = point_readers_.find(CellAddress{r.sheet, r.col0, r.row0});
            if (p != point_readers_.end()) {
                p->second.erase(reader);
                if (p->second.empty()) point_readers_.erase(p);
            }
        }
    }
    range_readers_.erase(reader);
    forward_.erase(it);
}

void DependencyGraph::clear() {
    forward_.clear();
    point_readers_.clear();
    range_readers_.clear();
}

const std::vector<CellRange>& DependencyGraph::refs_of(const CellAddress& reader) const {
    static const std::vector<CellRange> none;
    auto it = forward_.find(reader);
    return it == forward_.end() ? none : it->second;
}

std::set<CellAddress> DependencyGraph::readers_of(const CellAddress& addr) const {
    std::set<CellAddress> out;
    if (auto p = point_readers_.find(addr); p != point_readers_.end()) out = p->second;
    for (const auto& [reader, ranges] : range_readers_) {
        for (const auto& r : ranges) {
            if (r.contains(addr)) {
                out.insert(reader);
                break;
            }
        }
    }
    return out;
}

std::vector<CellAddress> DependencyGraph::readers() const {
    std::vector<CellAddress> out;
    out.reserve(forward_.size());
    for (const auto& [k, _] : forward_) out.push_back(k);
    return out;
}

std::vector<CellRange> resolve_refs(const formula::Expr& expr, const std::string& sheet) {
    std::vector<CellRange> out;
    for (const auto& r : formula::collect_refs(expr)) {
        out.push_back(CellRange{r.start.sheet.value_or(sheet), r.start.col, r.start.row, r.end.col, r.end.row});
    }
    return out;
}

}  // namespace gensheet::engine
