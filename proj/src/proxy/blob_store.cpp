#include "gensheet/proxy/blob_store.hpp"

#include <chrono>
#include <fstream>
#include <random>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "gensheet/digest.hpp"

namespace gensheet::proxy {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string hex_sha256(const std::vector<uint8_t>& bytes) {
    return to_hex(sha256(std::span<const uint8_t>(bytes)));
}

std::optional<std::vector<uint8_t>> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return std::nullopt;
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_atomically(const fs::path& target, const char* data, std::size_t size) {
    static thread_local std::mt19937_64 rng(std::random_device{}());
    auto tmp = target;
    tmp += ".tmp" + std::to_string(rng());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(data, static_cast<std::streamsize>(size));
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw std::runtime_error("cannot write " + tmp.string());
        }
    }
    fs::rename(tmp, target);
}

json to_json(const BlobMeta& m) {
    return json{{"id", m.id},
                {"content_type", m.content_type},
                {"created_at", m.created_at},
                {"length", m.length},
                {"sha256", m.sha256}};
}

}  // namespace

BlobStore::BlobStore(fs::path dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
    for (const auto& entry : fs::directory_iterator(dir_)) {
        const auto name = entry.path().filename().string();
        if (name.find(".tmp") != std::string::npos) {
            std::error_code ec;
            fs::remove(entry.path(), ec);
            continue;
        }
        const std::string suffix = ".meta.json";
        if (name.size() <= suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) {
            continue;
        }
        try {
            std::ifstream in(entry.path());
            auto j = json::parse(in);
            BlobMeta m{j.at("id"), j.at("content_type"), j.at("created_at"), j.at("length"), j.at("sha256")};
            auto bytes = slurp(blob_path(m.id));
            if (!bytes || bytes->size() != m.length || hex_sha256(*bytes) != m.sha256) {
                spdlog::warn("blob store: removing corrupt entry {}", m.id);
                std::error_code ec;
                std::filesystem::remove(blob_path(m.id), ec);
                std::filesystem::remove(meta_path(m.id), ec);
                continue;
            }
            index_.emplace(m.id, std::move(m));
        } catch (const std::exception& e) {
            spdlog::warn("blob store: unreadable sidecar {}: {}", name, e.what());
        }
    }
}

fs::path BlobStore::blob_path(const std::string& id) const { return dir_ / (id + ".png"); }
fs::path BlobStore::meta_path(const std::string& id) const { return dir_ / (id + ".meta.json"); }

bool BlobStore::contains(const std::string& id) const {
    std::lock_guard lock(mu_);
    return index_.count(id) != 0;
}

std::optional<BlobMeta> BlobStore::meta(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::vector<uint8_t>> BlobStore::read(const std::string& id) {
    auto m = meta(id);
    if (!m) return std::nullopt;
    auto bytes = slurp(blob_path(id));
    if (!bytes || hex_sha256(*bytes) != m->sha256) {
        spdlog::warn("blob store: checksum mismatch for {}, dropping entry", id);
        std::lock_guard lock(mu_);
        index_.erase(id);
        std::error_code ec;
        std::filesystem::remove(blob_path(id), ec);
        std::filesystem::remove(meta_path(id), ec);
        return std::nullopt;
    }
    return bytes;
}

BlobMeta BlobStore::write(const std::string& id, const std::vector<uint8_t>& bytes, const std::string& content_type) {
    BlobMeta m;
    m.id = id;
    m.content_type = content_type;
    m.created_at = std::chrono::duration_cast<std::chrono::seconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
    m.length = bytes.size();
    m.sha256 = hex_sha256(bytes);
    write_atomically(blob_path(id), reinterpret_cast<const char*>(bytes.data()), bytes.size());
    const auto sidecar = to_json(m).dump();
    write_atomically(meta_path(id), sidecar.data(), sidecar.size());
    std::lock_guard lock(mu_);
    index_[id] = m;
    return m;
}

std::size_t BlobStore::entries() const {
    std::lock_guard lock(mu_);
    return index_.size();
}

uint64_t BlobStore::bytes() const {
    std::lock_guard lock(mu_);
    uint64_t total = 0;
    for (const auto& [_, m] : index_) total += m.length;
    return total;
}

}  // namespace gensheet::proxy
