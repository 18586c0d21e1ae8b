#pragma once

#include <filesystem>
#include <memory>
#include <optional>

#include <json.hpp>

#include "gensheet/kit/kit.hpp"
#include "gensheet/runtime/runtime.hpp"
#include "gensheet/session/session.hpp"

namespace httplib {
class Server;
}

namespace gensheet::server {

/// Wire forms shared by the HTTP API and the CLI manifest.
nlohmann::json value_to_json(const Value& v);
nlohmann::json changeset_to_json(uint64_t seq, const engine::ChangeSet& cs);
/// One `event: changeset` frame of the event stream.
std::string sse_frame(uint64_t seq, const engine::ChangeSet& cs);

/// Document-level state served over HTTP: the runtime's engine plus the
/// power-cell and token registries, which only the writer thread touches.
class WorkbookApi {
public:
    /// workbook_path is where save/open default to; snapshots live beside it.
    WorkbookApi(runtime::Runtime& rt, gen::GenerationService& service, session::Session meta,
                std::optional<std::filesystem::path> workbook_path);

    runtime::Runtime& runtime() { return rt_; }
    gen::GenerationService& service() { return service_; }

    /// Consistent cut of the whole document.
    session::Session capture();
    engine::ChangeSet open(const std::filesystem::path& path);
    std::filesystem::path save(std::optional<std::filesystem::path> path);
    session::SnapshotStore& snapshots();

    kit::PowerCells& power() { return power_; }           // writer thread only
    session::TokenBank& tokens() { return tokens_; }      // writer thread only
    const std::optional<std::filesystem::path>& path() const { return path_; }

private:
    runtime::Runtime& rt_;
    gen::GenerationService& service_;
    kit::PowerCells power_;
    session::TokenBank tokens_;
    std::optional<std::filesystem::path> path_;
    std::mutex snap_mu_;
    std::unique_ptr<session::SnapshotStore> snapshots_;
};

/// Routes under /api, including the `GET /api/events` ChangeSet stream.
void register_workbook_routes(httplib::Server& server, WorkbookApi& api);

}  // namespace gensheet::server
