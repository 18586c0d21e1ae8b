#include "gensheet/value.hpp"

#include "gensheet/formula/formula.hpp"

namespace gensheet {

const char* error_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Name: return "#NAME?";
        case ErrorKind::Ref: return "#REF!";
        case ErrorKind::Value: return "#VALUE!";
        case ErrorKind::Cycle: return "#CYCLE!";
        case ErrorKind::Spill: return "#SPILL!";
        case ErrorKind::GenErr: return "#GEN_ERR";
    }
    return "#ERR";
}

std::optional<ErrorKind> parse_error_code(std::string_view code) {
    for (auto k : {ErrorKind::Name, ErrorKind::Ref, ErrorKind::Value, ErrorKind::Cycle, ErrorKind::Spill,
                   ErrorKind::GenErr}) {
        if (code == error_code(k)) return k;
    }
    return std::nullopt;
}

std::optional<std::string> coerce_text(const Value& v) {
    if (v.is_blank()) return std::string();
    if (v.is_text()) return v.as_text();
    if (v.is_number()) return formula::format_number(v.as_number());
    return std::nullopt;
}

std::string display(const Value& v) {
    if (v.is_blank()) return "";
    if (v.is_text()) return v.as_text();
    if (v.is_number()) return formula::format_number(v.as_number());
    if (v.is_image()) return "<image " + v.as_image().id + ">";
    if (v.is_pending()) return "<pending " + std::to_string(v.pending_id()) + ">";
    return error_code(v.as_error().kind);
}

}  // namespace gensheet
