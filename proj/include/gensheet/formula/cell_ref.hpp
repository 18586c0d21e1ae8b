#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace gensheet::formula {

inline constexpr int32_t kMaxCol = 16383;    // XFD
inline constexpr int32_t kMaxRow = 1048575;  // row 1048576 in A1 notation

/// A cell reference as written in a formula. Indices are 0-based; the
/// absolute flags correspond to `$` anchors in A1 notation.
struct CellRef {
    int32_t col = 0;
    int32_t row = 0;
    bool col_absolute = false;
    bool row_absolute = false;
    std::optional<std::string> sheet;

    bool operator==(const CellRef&) const = default;
};

/// 0 -> "A", 25 -> "Z", 26 -> "AA".
std::string column_name(int32_t col);

/// Inverse of column_name. Case-insensitive; nullopt when out of range.
std::optional<int32_t> parse_column(std::string_view letters);

/// Parses `A1`, `$B$2`, `Sheet!C3`, `'my sheet'!$D4`.
std::optional<CellRef> parse_cell_ref(std::string_view text);

std::string to_a1(const CellRef& ref);

/// Quotes a sheet name for use as a reference prefix when it is not a
/// plain identifier.
std::string quote_sheet_name(std::string_view sheet);

}  // namespace gensheet::formula
