#pragma once

#include <map>
#include <set>
#include <vector>

#include "gensheet/engine/workbook.hpp"

namespace gensheet::engine {

/// Reference edges of formula cells, resolved to concrete sheets. Single-cell
/// references are indexed for reverse lookup; multi-cell ranges are scanned.
class DependencyGraph {
public:
    void set_refs(const CellAddress& reader, std::vector<CellRange> refs);
    void remove(const CellAddress& reader);
    void clear();

    const std::vector<CellRange>& refs_of(const CellAddress& reader) const;
    /// Formula cells whose references cover addr.
    std::set<CellAddress> readers_of(const CellAddress& addr) const;
    std::vector<CellAddress> readers() const;

private:
    std::map<CellAddress, std::vector<CellRange>> forward_;
    std::map<CellAddress, std::set<CellAddress>> point_readers_;
    std::map<CellAddress, std::vector<CellRange>> range_readers_;
};

/// Concrete rectangles referenced by a formula on `sheet`.
std::vector<CellRange> resolve_refs(const formula::Expr& expr, const std::string& sheet);

}  // namespace gensheet::engine
