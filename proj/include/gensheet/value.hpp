#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

namespace gensheet {

enum class ErrorKind {
    Name,    // #NAME?
    Ref,     // #REF!
    Value,   // #VALUE!
    Cycle,   // #CYCLE!
    Spill,   // #SPILL!
    GenErr,  // #GEN_ERR
};

const char* error_code(ErrorKind kind);
std::optional<ErrorKind> parse_error_code(std::string_view code);

struct ErrorValue {
    ErrorKind kind;
    std::string message;

    bool operator==(const ErrorValue&) const = default;
};

/// A generated image held by the proxy's blob store; cells carry only this
/// handle, never pixels.
struct ImageRef {
    std::string id;  // hex digest of the generation key
    std::string url;
    int width = 512;
    int height = 512;

    bool operator==(const ImageRef&) const = default;
};

struct Blank {
    bool operator==(const Blank&) const = default;
};

struct Pending {
    uint64_t request_id = 0;
    bool operator==(const Pending&) const = default;
};

class Value {
public:
    using Data = std::variant<Blank, std::string, double, ImageRef, ErrorValue, Pending>;

    Value() = default;
    static Value blank() { return Value(); }
    static Value text(std::string s) { return Value(Data(std::move(s))); }
    static Value number(double d) { return Value(Data(d)); }
    static Value image(ImageRef ref) { return Value(Data(std::move(ref))); }
    static Value error(ErrorKind kind, std::string message = {}) {
        return Value(Data(ErrorValue{kind, std::move(message)}));
    }
    static Value pending(uint64_t id) { return Value(Data(Pending{id})); }

    const Data& data() const { return data_; }

    bool is_blank() const { return std::holds_alternative<Blank>(data_); }
    bool is_text() const { return std::holds_alternative<std::string>(data_); }
    bool is_number() const { return std::holds_alternative<double>(data_); }
    bool is_image() const { return std::holds_alternative<ImageRef>(data_); }
    bool is_error() const { return std::holds_alternative<ErrorValue>(data_); }
    bool is_pending() const { return std::holds_alternative<Pending>(data_); }

    const std::string& as_text() const { return std::get<std::string>(data_); }
    double as_number() const { return std::get<double>(data_); }
    const ImageRef& as_image() const { return std::get<ImageRef>(data_); }
    const ErrorValue& as_error() const { return std::get<ErrorValue>(data_); }
    uint64_t pending_id() const { return std::get<Pending>(data_).request_id; }

    bool operator==(const Value& other) const { return data_ == other.data_; }

private:
    explicit Value(Data d) : data_(std::move(d)) {}
    Data data_;
};

/// Text coercion for concatenation and prompts: Blank is "", numbers use the
/// shortest round-trip form. Images, errors and pending values have none.
std::optional<std::string> coerce_text(const Value& v);

/// Human-readable rendering (`#SPILL!`, `<pending 4>`, `<image ab12..>`).
std::string display(const Value& v);

}  // namespace gensheet
