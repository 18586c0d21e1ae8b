#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gensheet/engine/dependency_graph.hpp"
#include "gensheet/engine/evaluator.hpp"
#include "gensheet/engine/workbook.hpp"
#include "gensheet/genfns/functions.hpp"

namespace gensheet::engine {

struct CellUpdate {
    CellAddress addr;
    Value value;
};

struct ChangeSet {
    std::vector<CellUpdate> updates;
    /// Set by resolve_pending when the result had nobody left to land on.
    bool stale = false;

    const Value* find(const CellAddress& addr) const;
};

enum class SpillDirection { Column, Row };

struct SpillRegion {
    CellAddress origin;
    SpillDirection direction = SpillDirection::Column;
    int length = 1;

    bool operator==(const SpillRegion&) const = default;
    CellAddress cell(int offset) const;
};

/// Receives each generation request once, after the edit that created it
/// has finished recomputing. Results come back through resolve_pending.
class Dispatcher {
public:
    virtual ~Dispatcher() = default;
    virtual void dispatch(uint64_t request_id, const gen::GenRequest& request) = 0;
};

/// Keeps every dispatched request for tests and synchronous drivers.
class RecordingDispatcher : public Dispatcher {
public:
    void dispatch(uint64_t request_id, const gen::GenRequest& request) override {
        requests.emplace_back(request_id, request);
    }
    std::vector<std::pair<uint64_t, gen::GenRequest>> take() { return std::exchange(requests, {}); }

    std::vector<std::pair<uint64_t, gen::GenRequest>> requests;
};

struct InFlightRequest {
    gen::GenRequest request;
    std::string key;
    std::set<CellAddress> waiters;
};

/// The reactive document. Not thread-safe: callers serialize access.
class Engine {
public:
    Engine();
    explicit Engine(Workbook workbook);

    /// Requests created while no dispatcher is set wait for the next one.
    void set_dispatcher(Dispatcher* dispatcher);
    /// Invoked for requests that land on no cell.
    void set_stale_logger(std::function<void(uint64_t, const std::string&)> fn) { stale_logger_ = std::move(fn); }

    const Workbook& workbook() const { return wb_; }
    const WorkbookSettings& settings() const { return wb_.settings; }
    /// Changing defaults re-evaluates every formula.
    ChangeSet set_settings(const WorkbookSettings& settings);

    bool has_sheet(const std::string& name) const { return wb_.sheets.count(name) != 0; }
    std::vector<std::string> sheet_names() const;
    /// Formulas that referenced a missing sheet re-evaluate.
    ChangeSet add_sheet(const std::string& name);

    ChangeSet set_cell(const CellAddress& addr, std::string_view source);
    ChangeSet set_cell(const CellAddress& addr, CellContent content);
    /// Several cells in one recompute.
    ChangeSet set_cells(std::vector<std::pair<CellAddress, CellContent>> cells);

    Value get_value(const CellAddress& addr) const;
    const CellContent* content(const CellAddress& addr) const { return wb_.find(addr); }
    /// Every address that currently shows a non-blank value, sorted.
    std::vector<std::pair<CellAddress, Value>> non_blank_values() const;

    ChangeSet autofill(const CellRange& source, const CellRange& target);
    ChangeSet duplicate_region(const CellRange& source, const CellAddress& destination);
    /// Copies a whole sheet; the new name defaults to "name (2)", "name (3)", ...
    std::pair<std::string, ChangeSet> duplicate_sheet(const std::string& source,
                                                      std::optional<std::string> new_name = std::nullopt);

    ChangeSet resolve_pending(uint64_t request_id, const gen::GenResult& result);
    /// Drops memoized failures and re-evaluates the cells that showed them.
    ChangeSet retry_failed();
    ChangeSet recompute_all();

    /// Regions currently holding their cells (reserved and not blocked).
    std::vector<SpillRegion> spill_regions() const;
    std::optional<SpillRegion> spill_region_at(const CellAddress& origin) const;
    /// Origin of the region covering addr, if any (addr itself excluded).
    std::optional<CellAddress> spill_owner(const CellAddress& addr) const;

    const std::map<uint64_t, InFlightRequest>& in_flight() const { return in_flight_; }
    const DependencyGraph& graph() const { return graph_; }
    std::size_t memo_size() const { return memo_.size(); }

private:
    struct Reservation {
        SpillRegion region;
        bool blocked = false;
    };

    class Context;
    friend class Context;

    ChangeSet apply(std::vector<std::pair<CellAddress, CellContent>> cells, std::set<CellAddress> extra_dirty);
    std::map<CellAddress, Reservation> compute_reservations() const;
    std::map<CellAddress, CellAddress> coverage_of(const std::map<CellAddress, Reservation>& res) const;
    void touch(const CellAddress& addr);
    void touch_region(const CellAddress& origin);
    void begin_operation();
    std::vector<CellAddress> effective_deps(const CellAddress& cell) const;
    std::set<CellAddress> readers_closure(std::set<CellAddress> seeds) const;
    std::set<CellAddress> direct_readers(const CellAddress& addr) const;
    void evaluate_dirty(const std::set<CellAddress>& dirty);
    void evaluate_cell(const CellAddress& cell, bool on_cycle);
    void stop_waiting(const CellAddress& cell);
    Value child_value(const CellAddress& origin, int offset) const;
    Value lookup(const CellAddress& addr) const;
    ChangeSet finish();
    void flush_dispatches();

    Workbook wb_;
    DependencyGraph graph_;
    std::map<CellAddress, Value> values_;  // formula cells
    std::map<CellAddress, gen::ItemList> lists_;
    std::map<CellAddress, Reservation> reservations_;
    std::map<CellAddress, CellAddress> coverage_;  // child -> origin, unblocked only

    std::map<std::string, gen::GenResult> memo_;
    std::map<uint64_t, InFlightRequest> in_flight_;
    std::map<std::string, uint64_t> in_flight_by_key_;
    std::map<CellAddress, std::set<uint64_t>> waiting_on_;
    uint64_t next_request_id_ = 1;
    std::vector<uint64_t> to_dispatch_;

    Dispatcher* dispatcher_ = nullptr;
    std::function<void(uint64_t, const std::string&)> stale_logger_;

    // Per-operation bookkeeping for the ChangeSet.
    std::map<CellAddress, Value> before_;
    std::vector<CellAddress> touch_order_;
    std::map<CellAddress, uint64_t> order_;  // evaluation order within the operation
    uint64_t order_counter_ = 0;
};

}  // namespace gensheet::engine
