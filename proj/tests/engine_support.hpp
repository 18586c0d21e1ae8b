#pragma once

#include "gensheet/engine/engine.hpp"
#include "gensheet/genfns/service.hpp"

namespace gensheet::testing {

/// Engine wired to a recording dispatcher and the offline providers, for
/// tests that drive resolution by hand.
struct MockedEngine {
    engine::Engine engine;
    engine::RecordingDispatcher dispatcher;
    gen::MockBackend backend;
    gen::GenerationService service{backend};

    MockedEngine() { engine.set_dispatcher(&dispatcher); }
    explicit MockedEngine(engine::Workbook wb) : engine(std::move(wb)) { engine.set_dispatcher(&dispatcher); }

    engine::CellAddress at(const char* a1, const char* sheet = "Sheet1") const {
        return engine::parse_address(a1, sheet);
    }
    engine::ChangeSet set(const char* a1, std::string_view source) { return engine.set_cell(at(a1), source); }
    Value get(const char* a1) const { return engine.get_value(at(a1)); }

    /// Resolves requests until none are left; returns how many ran.
    int drain() {
        int n = 0;
        while (!dispatcher.requests.empty()) {
            for (auto& [id, req] : dispatcher.take()) {
                engine.resolve_pending(id, service.run(req));
                ++n;
            }
        }
        return n;
    }
};

}  // namespace gensheet::testing
