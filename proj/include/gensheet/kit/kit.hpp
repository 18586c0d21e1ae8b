#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "gensheet/engine/engine.hpp"
#include "gensheet/genfns/service.hpp"

namespace gensheet::kit {

enum class KitErrorKind { InvalidAxis, TooManyAxes, InvalidValue, Placement, Generation };

const char* kind_name(KitErrorKind kind);

class KitError : public std::runtime_error {
public:
    KitError(KitErrorKind kind, const std::string& what, std::optional<ErrorValue> cell_error = std::nullopt)
        : std::runtime_error(what), kind_(kind), cell_error_(std::move(cell_error)) {}
    KitErrorKind kind() const { return kind_; }
    /// The sheet error behind a Generation failure (#GEN_ERR, #VALUE!).
    const std::optional<ErrorValue>& cell_error() const { return cell_error_; }

private:
    KitErrorKind kind_;
    std::optional<ErrorValue> cell_error_;
};

enum class PowerRole { Seed, Cfg };

const char* role_name(PowerRole role);
std::optional<PowerRole> parse_role(std::string_view name);

struct PowerCell {
    engine::CellAddress addr;
    PowerRole role = PowerRole::Seed;
    std::string label;

    bool operator==(const PowerCell&) const = default;
};

/// Power cells by role. Constructors reference them absolutely for any
/// role their arguments leave open.
struct PowerCells {
    std::map<PowerRole, PowerCell> by_role;

    const PowerCell* find(PowerRole role) const;
    bool operator==(const PowerCells&) const = default;
};

struct ManualList {
    std::vector<std::string> items;
    bool operator==(const ManualList&) const = default;
};

struct GenerativeList {
    std::string function;  // a registered list function, e.g. DIVERGENTS
    std::string input;
    int length = gen::kDefaultListLength;
    bool operator==(const GenerativeList&) const = default;
};

using AxisSource = std::variant<ManualList, GenerativeList, engine::CellRange>;

/// Checks the source and returns its item count. Throws InvalidAxis.
int axis_length(const AxisSource& source);

/// Items of a source right now. Generative lists run through the service
/// (Generation error on failure); ranges read the engine's values.
std::vector<std::string> resolve_axis(const AxisSource& source, gen::GenerationService& service,
                                      const engine::Engine* engine = nullptr);

struct LiteralText {
    std::string text;
    bool operator==(const LiteralText&) const = default;
};

struct Slot {
    std::string id;
    bool operator==(const Slot&) const = default;
};

struct PromptTemplate {
    std::vector<std::variant<LiteralText, Slot>> segments;
    std::map<std::string, AxisSource> slots;
};

enum class Axis { Column, Row };

/// How a template is laid out. Slots on an axis vary along it (several
/// slots on one axis are zipped and need equal lengths); other slots use
/// item fixed_items[id] (default 0). Seeds add an image column per seed
/// and require that no slot sits on the Row axis.
struct TemplateLayout {
    std::map<std::string, Axis> axes;
    std::map<std::string, int> fixed_items;
    std::vector<uint64_t> seeds;
};

/// Prompt joiner between template segments.
inline constexpr const char* kSegmentJoiner = ", ";

engine::ChangeSet build_seed_grid(engine::Engine& engine, const PowerCells& power, const std::string& sheet,
                                  const engine::CellRange& prompts, const std::vector<uint64_t>& seeds,
                                  const engine::CellAddress& anchor);

/// prompt is either literal text or an A1 reference (leading '=' or a
/// parseable reference, e.g. "C7").
struct PromptArg {
    std::variant<std::string, engine::CellAddress> value;
};

engine::ChangeSet build_cfg_slider(engine::Engine& engine, const PowerCells& power, const PromptArg& prompt,
                                   std::optional<uint64_t> seed, const std::vector<double>& cfg_values,
                                   const engine::CellAddress& anchor);

/// Registers addr for role and writes the initial value when given.
PowerCell designate_power_cell(engine::Engine& engine, PowerCells& power, const engine::CellAddress& addr,
                               PowerRole role, std::optional<double> initial, std::string label = {});

/// Whether some formula references the cell with both coordinates absolute.
bool referenced_absolutely(const engine::Engine& engine, const engine::CellAddress& addr);

engine::ChangeSet expand_template(engine::Engine& engine, const PowerCells& power, const PromptTemplate& tmpl,
                                  const TemplateLayout& layout, const engine::CellAddress& anchor);

/// Cells written by the last expand_template-shaped call, for checks.
struct TemplateShape {
    int rows = 1;     // column-axis length
    int columns = 1;  // row-axis length
    int prompt_cells() const { return rows * columns; }
};
TemplateShape template_shape(const PromptTemplate& tmpl, const TemplateLayout& layout);

struct DynamicToken {
    std::string label;
    AxisSource generator;
    std::vector<std::string> items;

    bool operator==(const DynamicToken&) const = default;
};

/// Fresh items from the generator, swapped in all at once.
DynamicToken regenerate_token(const DynamicToken& token, gen::GenerationService& service,
                              const engine::Engine* engine = nullptr);

}  // namespace gensheet::kit
