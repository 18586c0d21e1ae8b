#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "gensheet/engine/workbook.hpp"
#include "gensheet/kit/kit.hpp"

namespace gensheet::session {

inline constexpr int kFormatVersion = 1;
inline constexpr const char* kMagic = "gensheet-workbook";

class FormatError : public std::runtime_error {
public:
    FormatError(int line, std::string reason)
        : std::runtime_error("line " + std::to_string(line) + ": " + reason), line_(line), reason_(std::move(reason)) {}
    int line() const { return line_; }
    const std::string& reason() const { return reason_; }

private:
    int line_;
    std::string reason_;
};

class VersionError : public std::runtime_error {
public:
    explicit VersionError(int version)
        : std::runtime_error("unsupported workbook format version " + std::to_string(version)), version_(version) {}
    int version() const { return version_; }

private:
    int version_;
};

class DuplicateLabel : public std::runtime_error {
public:
    explicit DuplicateLabel(const std::string& label) : std::runtime_error("token label already used: " + label) {}
};

class NotFound : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A saved prompt fragment, or a regenerable one.
struct Token {
    std::string label;
    std::variant<std::string, kit::DynamicToken> body;

    bool operator==(const Token&) const = default;
};

/// Tokens by label.
class TokenBank {
public:
    /// The text is its own label.
    const Token& add_token(const std::string& text);
    const Token& add_token(kit::DynamicToken token);
    void remove_token(const std::string& label);
    /// Replaces a dynamic token's items, e.g. after regenerate_token.
    void update_token(const kit::DynamicToken& token);
    const Token* find(const std::string& label) const;
    std::vector<Token> list_tokens() const;

    bool operator==(const TokenBank&) const = default;

private:
    const Token& insert(Token t);
    std::map<std::string, Token> tokens_;
};

/// Everything a .gws file holds. Values are not stored; they are
/// recomputed when the workbook is loaded into an engine.
struct Session {
    engine::Workbook workbook;
    kit::PowerCells power;
    TokenBank tokens;
};

/// {"manual": [...]}, {"generative": {function, input, length}} or {"range": "S!A1:A5"}.
nlohmann::json axis_to_json(const kit::AxisSource& source);
kit::AxisSource axis_from_json(const nlohmann::json& j);

bool same_contents(const Session& a, const Session& b);

/// Canonical text form: sheets by name, cells row-major, one record per line.
std::string save(const Session& session);
/// Throws FormatError or VersionError.
Session load(std::string_view bytes);

Session load_file(const std::filesystem::path& path);
/// Temp file in the same directory, then rename.
void save_file(const std::filesystem::path& path, const Session& session);
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

struct SnapshotInfo {
    uint64_t seq = 0;
    std::string label;
    std::string timestamp;  // UTC, ISO 8601
    std::filesystem::path path;
};

/// `<dir>/snapshots/<seq>-<label>.gws`, never rewritten once created.
class SnapshotStore {
public:
    explicit SnapshotStore(std::filesystem::path dir);

    SnapshotInfo snapshot(const Session& session, const std::string& label = {});
    /// Throws NotFound.
    Session restore(uint64_t seq) const;
    std::vector<SnapshotInfo> list() const;

private:
    std::filesystem::path root_;
    mutable std::mutex mu_;
    uint64_t last_seq_ = 0;
};

}  // namespace gensheet::session
