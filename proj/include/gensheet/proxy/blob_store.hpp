#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace gensheet::proxy {

struct BlobMeta {
    std::string id;
    std::string content_type;
    int64_t created_at = 0;  // unix seconds
    uint64_t length = 0;
    std::string sha256;  // hex digest of the blob bytes
};

/// Content-addressed files `<id>.png` with a `<id>.meta.json` sidecar.
/// Writes go through a temp file and a rename; reads re-check the digest.
class BlobStore {
public:
    /// Indexes existing entries whose blob matches its sidecar; leftovers
    /// of interrupted writes are removed.
    explicit BlobStore(std::filesystem::path dir);

    const std::filesystem::path& dir() const { return dir_; }
    bool contains(const std::string& id) const;
    std::optional<BlobMeta> meta(const std::string& id) const;
    /// nullopt when missing or when the bytes no longer match; a corrupt
    /// entry is dropped from the index.
    std::optional<std::vector<uint8_t>> read(const std::string& id);
    BlobMeta write(const std::string& id, const std::vector<uint8_t>& bytes, const std::string& content_type);

    std::size_t entries() const;
    uint64_t bytes() const;

    std::filesystem::path blob_path(const std::string& id) const;
    std::filesystem::path meta_path(const std::string& id) const;

private:
    std::filesystem::path dir_;
    mutable std::mutex mu_;
    std::map<std::string, BlobMeta> index_;
};

}  // namespace gensheet::proxy
