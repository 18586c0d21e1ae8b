#include "gensheet/kit/kit.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "gensheet/formula/formula.hpp"
#include "gensheet/genfns/functions.hpp"

namespace gensheet::kit {

using engine::CellAddress;
using engine::CellContent;
using engine::CellRange;
using engine::ChangeSet;
using engine::Engine;
using formula::ExprPtr;

const char* kind_name(KitErrorKind kind) {
    switch (kind) {
        case KitErrorKind::InvalidAxis: return "InvalidAxis";
        case KitErrorKind::TooManyAxes: return "TooManyAxes";
        case KitErrorKind::InvalidValue: return "InvalidValue";
        case KitErrorKind::Placement: return "Placement";
        case KitErrorKind::Generation: return "Generation";
    }
    return "?";
}

const char* role_name(PowerRole role) { return role == PowerRole::Seed ? "seed" : "cfg"; }

std::optional<PowerRole> parse_role(std::string_view name) {
    std::string n(name);
    std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::tolower(c); });
    if (n == "seed") return PowerRole::Seed;
    if (n == "cfg") return PowerRole::Cfg;
    return std::nullopt;
}

const PowerCell* PowerCells::find(PowerRole role) const {
    auto it = by_role.find(role);
    return it == by_role.end() ? nullptr : &it->second;
}

namespace {

[[noreturn]] void fail(KitErrorKind kind, const std::string& what) { throw KitError(kind, what); }

/// A reference to target as written from a formula on `from_sheet`.
ExprPtr ref_to(const CellAddress& target, const std::string& from_sheet, bool col_abs, bool row_abs) {
    formula::CellRef r;
    r.col = target.col;
    r.row = target.row;
    r.col_absolute = col_abs;
    r.row_absolute = row_abs;
    if (target.sheet != from_sheet) r.sheet = target.sheet;
    return formula::make_ref(r);
}

ExprPtr abs_ref(const CellAddress& target, const std::string& from_sheet) {
    return ref_to(target, from_sheet, true, true);
}

CellAddress at(const std::string& sheet, int32_t col, int32_t row) { return CellAddress{sheet, col, row}; }

/// Collects the cells a constructor will write and the spill regions it
/// will reserve; refuses to write anything if one of them is taken.
class Plan {
public:
    explicit Plan(Engine& engine) : engine_(engine) {}

    void put(const CellAddress& addr, CellContent content) {
        claim(addr);
        writes_.emplace_back(addr, std::move(content));
    }
    void put(const CellAddress& addr, ExprPtr ast) { put(addr, CellContent::from_formula(std::move(ast))); }
    /// Cells below addr that a list formula written at addr will fill.
    void reserve_below(const CellAddress& addr, int length) {
        for (int i = 1; i < length; ++i) claim(at(addr.sheet, addr.col, addr.row + i));
    }

    ChangeSet commit() {
        if (!engine_.has_sheet(sheet_)) fail(KitErrorKind::Placement, "no sheet named " + sheet_);
        return engine_.set_cells(std::move(writes_));
    }

private:
    void claim(const CellAddress& addr) {
        sheet_ = addr.sheet;
        if (addr.col < 0 || addr.row < 0 || addr.col > formula::kMaxCol || addr.row > formula::kMaxRow) {
            fail(KitErrorKind::Placement, "structure does not fit on the grid");
        }
        if (!claimed_.insert(addr).second) fail(KitErrorKind::Placement, "structure overlaps itself at " + to_string(addr));
        if (!engine_.has_sheet(addr.sheet)) return;  // reported at commit
        const auto* c = engine_.content(addr);
        if ((c && !c->is_empty()) || engine_.spill_owner(addr)) {
            fail(KitErrorKind::Placement, "#SPILL!: " + to_string(addr) + " is occupied");
        }
    }

    Engine& engine_;
    std::string sheet_;
    std::set<CellAddress> claimed_;
    std::vector<std::pair<CellAddress, CellContent>> writes_;
};

void check_seed(uint64_t seed) {
    if (seed > 0xffffffffull) fail(KitErrorKind::InvalidValue, "seed must be in 0..4294967295");
}

/// TTI(prompt, seed?, cfg?), with power cells filling unset roles.
ExprPtr tti_call(ExprPtr prompt, ExprPtr seed, ExprPtr cfg, const PowerCells& power, const std::string& sheet) {
    if (!seed) {
        if (const auto* p = power.find(PowerRole::Seed)) seed = abs_ref(p->addr, sheet);
    }
    if (!cfg) {
        if (const auto* p = power.find(PowerRole::Cfg)) cfg = abs_ref(p->addr, sheet);
    }
    std::vector<ExprPtr> args{std::move(prompt)};
    if (seed || cfg) args.push_back(seed ? seed : formula::make_number(gen::kDefaultSeed));
    if (cfg) args.push_back(cfg);
    return formula::make_call("TTI", std::move(args));
}

const gen::FunctionSpec& list_spec(const GenerativeList& g) {
    const auto* spec = gen::find_function(g.function);
    if (!spec || !gen::is_list_function(*spec)) fail(KitErrorKind::InvalidAxis, g.function + " is not a list function");
    if (spec->shape != gen::OutputShape::ListColumn) spec = gen::transposed_twin(*spec);
    return *spec;
}

}  // namespace

int axis_length(const AxisSource& source) {
    return std::visit(
        [](const auto& s) -> int {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, ManualList>) {
                if (s.items.empty()) fail(KitErrorKind::InvalidAxis, "manual list is empty");
                return static_cast<int>(s.items.size());
            } else if constexpr (std::is_same_v<T, GenerativeList>) {
                list_spec(s);
                if (s.length < 1 || s.length > gen::kMaxListLength) {
                    fail(KitErrorKind::InvalidAxis, "list length must be in 1..1000");
                }
                return s.length;
            } else {
                if (s.width() < 1 || s.height() < 1) fail(KitErrorKind::InvalidAxis, "range is empty");
                if (s.width() != 1 && s.height() != 1) fail(KitErrorKind::InvalidAxis, "range must be one row or one column");
                return s.width() * s.height();
            }
        },
        source);
}

namespace {

/// i-th cell of a one-row or one-column range.
CellAddress range_cell(const CellRange& r, int i) {
    return r.width() == 1 ? at(r.sheet, r.col0, r.row0 + i) : at(r.sheet, r.col0 + i, r.row0);
}

}  // namespace

std::vector<std::string> resolve_axis(const AxisSource& source, gen::GenerationService& service,
                                      const Engine* engine) {
    const int n = axis_length(source);
    if (const auto* m = std::get_if<ManualList>(&source)) return m->items;
    if (const auto* r = std::get_if<CellRange>(&source)) {
        if (!engine) fail(KitErrorKind::InvalidAxis, "range source needs a workbook");
        std::vector<std::string> items;
        for (int i = 0; i < n; ++i) {
            auto v = engine->get_value(range_cell(*r, i));
            auto t = coerce_text(v);
            if (!t) fail(KitErrorKind::InvalidAxis, "range cell " + to_string(range_cell(*r, i)) + " is " + display(v));
            items.push_back(*t);
        }
        return items;
    }
    const auto& g = std::get<GenerativeList>(source);
    const auto& spec = list_spec(g);
    auto built = gen::build_request(spec, {gen::Arg(Value::text(g.input)), gen::Arg(Value::number(g.length))}, {});
    if (const auto* err = std::get_if<Value>(&built)) {
        throw KitError(KitErrorKind::Generation, display(*err) + ": " + err->as_error().message, err->as_error());
    }
    auto result = service.run(std::get<gen::GenRequest>(built));
    if (auto* items = std::get_if<gen::ItemList>(&result)) return *items;
    if (auto* e = std::get_if<ErrorValue>(&result)) {
        throw KitError(KitErrorKind::Generation, std::string(error_code(e->kind)) + ": " + e->message, *e);
    }
    fail(KitErrorKind::Generation, "list function returned a non-list result");
}

ChangeSet build_seed_grid(Engine& engine, const PowerCells& power, const std::string& sheet, const CellRange& prompts,
                          const std::vector<uint64_t>& seeds, const CellAddress& anchor) {
    if (seeds.empty()) fail(KitErrorKind::InvalidAxis, "seed list is empty");
    const int n = axis_length(prompts);
    for (auto s : seeds) check_seed(s);
    const std::string& here = anchor.sheet.empty() ? sheet : anchor.sheet;
    Plan plan(engine);
    for (std::size_t j = 0; j < seeds.size(); ++j) {
        plan.put(at(here, anchor.col + static_cast<int32_t>(j), anchor.row),
                 CellContent::literal(Value::number(static_cast<double>(seeds[j]))));
    }
    for (int i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < seeds.size(); ++j) {
            const auto header = at(here, anchor.col + static_cast<int32_t>(j), anchor.row);
            plan.put(at(here, header.col, anchor.row + 1 + i),
                     tti_call(abs_ref(range_cell(prompts, i), here), ref_to(header, here, false, true), nullptr, power,
                              here));
        }
    }
    return plan.commit();
}

ChangeSet build_cfg_slider(Engine& engine, const PowerCells& power, const PromptArg& prompt,
                           std::optional<uint64_t> seed, const std::vector<double>& cfg_values,
                           const CellAddress& anchor) {
    if (cfg_values.empty()) fail(KitErrorKind::InvalidAxis, "cfg list is empty");
    for (std::size_t i = 0; i < cfg_values.size(); ++i) {
        const double c = cfg_values[i];
        if (!std::isfinite(c) || c < 0 || c > 35) fail(KitErrorKind::InvalidAxis, "cfg values must be within [0, 35]");
        if (std::fabs(c * 10 - std::round(c * 10)) > 1e-9) {
            fail(KitErrorKind::InvalidAxis, "cfg values carry at most one decimal");
        }
        if (i > 0 && !(c > cfg_values[i - 1])) fail(KitErrorKind::InvalidAxis, "cfg values must be strictly ascending");
    }
    if (seed) check_seed(*seed);
    const std::string& here = anchor.sheet;
    ExprPtr prompt_expr = std::holds_alternative<std::string>(prompt.value)
                              ? formula::make_text(std::get<std::string>(prompt.value))
                              : abs_ref(std::get<CellAddress>(prompt.value), here);
    ExprPtr seed_expr = seed ? formula::make_number(static_cast<double>(*seed)) : nullptr;
    Plan plan(engine);
    for (std::size_t i = 0; i < cfg_values.size(); ++i) {
        const auto cfg_cell = at(here, anchor.col, anchor.row + static_cast<int32_t>(i));
        plan.put(cfg_cell, CellContent::literal(Value::number(cfg_values[i])));
        plan.put(at(here, anchor.col + 1, cfg_cell.row),
                 tti_call(prompt_expr, seed_expr, ref_to(cfg_cell, here, true, false), power, here));
    }
    return plan.commit();
}

PowerCell designate_power_cell(Engine& engine, PowerCells& power, const CellAddress& addr, PowerRole role,
                               std::optional<double> initial, std::string label) {
    if (!engine.has_sheet(addr.sheet)) fail(KitErrorKind::InvalidValue, "no sheet named " + addr.sheet);
    const auto* c = engine.content(addr);
    if (c && !c->is_empty() && !(c->kind() == CellContent::Kind::Literal && c->literal_value().is_number())) {
        fail(KitErrorKind::InvalidValue, to_string(addr) + " does not hold a number");
    }
    if (engine.spill_owner(addr)) fail(KitErrorKind::InvalidValue, to_string(addr) + " is inside a spill");
    const auto current = initial ? initial : (c && !c->is_empty() ? std::optional(c->literal_value().as_number())
                                                                    : std::nullopt);
    if (current) {
        gen::GenerationKey probe{"x", gen::kDefaultSeed, gen::kDefaultCfg};
        if (role == PowerRole::Seed) {
            if (*current < 0 || *current > 4294967295.0 || std::floor(*current) != *current) {
                fail(KitErrorKind::InvalidValue, "seed must be an integer in 0..4294967295");
            }
        } else {
            probe.cfg = *current;
            if (auto problem = gen::validate_key(probe)) fail(KitErrorKind::InvalidValue, *problem);
        }
    }
    if (initial) engine.set_cell(addr, CellContent::literal(Value::number(*initial)));
    PowerCell cell{addr, role, label.empty() ? role_name(role) : std::move(label)};
    power.by_role[role] = cell;
    return cell;
}

bool referenced_absolutely(const Engine& engine, const CellAddress& addr) {
    for (const auto& [name, sheet] : engine.workbook().sheets) {
        for (const auto& [pos, c] : sheet.cells) {
            if (!c.is_formula()) continue;
            for (const auto& r : formula::collect_refs(*c.ast())) {
                const auto& s = r.start;
                const bool single = s.col == r.end.col && s.row == r.end.row;
                if (single && s.col_absolute && s.row_absolute && s.col == addr.col && s.row == addr.row &&
                    s.sheet.value_or(name) == addr.sheet) {
                    return true;
                }
            }
        }
    }
    return false;
}

namespace {

struct ResolvedLayout {
    std::vector<std::string> column_slots;
    std::vector<std::string> row_slots;
    TemplateShape shape;
};

ResolvedLayout resolve_layout(const PromptTemplate& tmpl, const TemplateLayout& layout) {
    if (tmpl.segments.empty()) fail(KitErrorKind::InvalidAxis, "template has no segments");
    std::set<std::string> used;
    for (const auto& seg : tmpl.segments) {
        if (const auto* s = std::get_if<Slot>(&seg)) {
            if (!tmpl.slots.count(s->id)) fail(KitErrorKind::InvalidAxis, "slot " + s->id + " has no source");
            used.insert(s->id);
        }
    }
    ResolvedLayout out;
    for (const auto& [id, axis] : layout.axes) {
        if (!used.count(id)) fail(KitErrorKind::InvalidAxis, "layout names unknown slot " + id);
        (axis == Axis::Column ? out.column_slots : out.row_slots).push_back(id);
    }
    if (layout.axes.size() > 2) fail(KitErrorKind::TooManyAxes, "at most two slots can sit on grid axes");
    for (const auto& [id, source] : tmpl.slots) {
        const int n = axis_length(source);
        if (!layout.axes.count(id)) {
            auto f = layout.fixed_items.find(id);
            const int k = f == layout.fixed_items.end() ? 0 : f->second;
            if (k < 0 || k >= n) fail(KitErrorKind::InvalidAxis, "fixed item for slot " + id + " is out of range");
        }
    }
    auto axis_len = [&](const std::vector<std::string>& ids) {
        int len = 1;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const int n = axis_length(tmpl.slots.at(ids[i]));
            if (i > 0 && n != len) fail(KitErrorKind::InvalidAxis, "zipped slots on one axis need equal lengths");
            len = n;
        }
        return len;
    };
    out.shape.rows = axis_len(out.column_slots);
    out.shape.columns = axis_len(out.row_slots);
    if (!layout.seeds.empty() && !out.row_slots.empty()) {
        fail(KitErrorKind::TooManyAxes, "seeds take the row axis; no slot may use it");
    }
    for (auto s : layout.seeds) check_seed(s);
    return out;
}

}  // namespace

TemplateShape template_shape(const PromptTemplate& tmpl, const TemplateLayout& layout) {
    return resolve_layout(tmpl, layout).shape;
}

// Layout from the anchor:
//   one column per materialized source (header at the anchor row, items below),
//   then the prompt block, then the image block. With seeds the image block
//   has a seed header row, like a seed grid.
ChangeSet expand_template(Engine& engine, const PowerCells& power, const PromptTemplate& tmpl,
                          const TemplateLayout& layout, const CellAddress& anchor) {
    const auto resolved = resolve_layout(tmpl, layout);
    const std::string& here = anchor.sheet;
    Plan plan(engine);

    // Slot id -> cell holding item i.
    std::map<std::string, std::function<CellAddress(int)>> item_cell;
    std::map<std::string, std::string> inline_text;
    std::set<std::string> used;
    for (const auto& seg : tmpl.segments) {
        if (const auto* s = std::get_if<Slot>(&seg)) used.insert(s->id);
    }
    int32_t col = anchor.col;
    for (const auto& [id, source] : tmpl.slots) {
        if (!used.count(id)) continue;
        const bool on_axis = layout.axes.count(id) != 0;
        if (const auto* r = std::get_if<CellRange>(&source)) {
            item_cell[id] = [r = *r](int i) { return range_cell(r, i); };
            continue;
        }
        if (const auto* m = std::get_if<ManualList>(&source); m && !on_axis) {
            auto f = layout.fixed_items.find(id);
            inline_text[id] = m->items.at(f == layout.fixed_items.end() ? 0 : f->second);
            continue;
        }
        const int32_t c = col++;
        const int32_t top = anchor.row + 1;
        plan.put(at(here, c, anchor.row), CellContent::literal(Value::text(id)));
        if (const auto* m = std::get_if<ManualList>(&source)) {
            for (std::size_t i = 0; i < m->items.size(); ++i) {
                plan.put(at(here, c, top + static_cast<int32_t>(i)), CellContent::literal(Value::text(m->items[i])));
            }
        } else {
            const auto& g = std::get<GenerativeList>(source);
            const auto& spec = list_spec(g);
            plan.put(at(here, c, top), formula::make_call(spec.name, {formula::make_text(g.input),
                                                                      formula::make_number(g.length)}));
            plan.reserve_below(at(here, c, top), g.length);
        }
        item_cell[id] = [here, c, top](int i) { return at(here, c, top + i); };
    }

    const int rows = resolved.shape.rows;
    const int cols = resolved.shape.columns;
    const int32_t prompt_col = col;
    const int32_t top = anchor.row + 1;
    plan.put(at(here, prompt_col, anchor.row), CellContent::literal(Value::text("prompt")));

    auto slot_expr = [&](const std::string& id, int row_i, int col_j) -> ExprPtr {
        if (auto t = inline_text.find(id); t != inline_text.end()) return formula::make_text(t->second);
        int index;
        bool col_abs = true, row_abs = true;
        if (auto a = layout.axes.find(id); a != layout.axes.end()) {
            index = a->second == Axis::Column ? row_i : col_j;
            // Column-axis items move with the prompt row; row-axis items stay put.
            if (a->second == Axis::Column && !std::holds_alternative<CellRange>(tmpl.slots.at(id))) row_abs = false;
        } else {
            auto f = layout.fixed_items.find(id);
            index = f == layout.fixed_items.end() ? 0 : f->second;
        }
        return ref_to(item_cell.at(id)(index), here, col_abs, row_abs);
    };

    auto all_literal = std::all_of(tmpl.segments.begin(), tmpl.segments.end(), [&](const auto& seg) {
        const auto* s = std::get_if<Slot>(&seg);
        return !s || inline_text.count(s->id);
    });

    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            const auto cell = at(here, prompt_col + j, top + i);
            if (all_literal) {
                std::string text;
                for (std::size_t k = 0; k < tmpl.segments.size(); ++k) {
                    if (k) text += kSegmentJoiner;
                    const auto& seg = tmpl.segments[k];
                    text += std::holds_alternative<LiteralText>(seg) ? std::get<LiteralText>(seg).text
                                                                     : inline_text.at(std::get<Slot>(seg).id);
                }
                plan.put(cell, CellContent::literal(Value::text(text)));
                continue;
            }
            ExprPtr expr;
            for (const auto& seg : tmpl.segments) {
                ExprPtr part = std::holds_alternative<LiteralText>(seg) ? formula::make_text(std::get<LiteralText>(seg).text)
                                                                        : slot_expr(std::get<Slot>(seg).id, i, j);
                expr = expr ? formula::make_binary(formula::BinaryOp::Concat,
                                                   formula::make_binary(formula::BinaryOp::Concat, expr,
                                                                        formula::make_text(kSegmentJoiner)),
                                                   part)
                            : part;
            }
            plan.put(cell, expr);
        }
    }

    const int32_t image_col = prompt_col + cols;
    if (!layout.seeds.empty()) {
        for (std::size_t s = 0; s < layout.seeds.size(); ++s) {
            plan.put(at(here, image_col + static_cast<int32_t>(s), anchor.row),
                     CellContent::literal(Value::number(static_cast<double>(layout.seeds[s]))));
        }
        for (int i = 0; i < rows; ++i) {
            for (std::size_t s = 0; s < layout.seeds.size(); ++s) {
                const auto header = at(here, image_col + static_cast<int32_t>(s), anchor.row);
                plan.put(at(here, header.col, top + i),
                         tti_call(ref_to(at(here, prompt_col, top + i), here, true, false),
                                  ref_to(header, here, false, true), nullptr, power, here));
            }
        }
    } else {
        plan.put(at(here, image_col, anchor.row), CellContent::literal(Value::text("image")));
        for (int i = 0; i < rows; ++i) {
            for (int j = 0; j < cols; ++j) {
                plan.put(at(here, image_col + j, top + i),
                         tti_call(ref_to(at(here, prompt_col + j, top + i), here, false, false), nullptr, nullptr,
                                  power, here));
            }
        }
    }
    return plan.commit();
}

DynamicToken regenerate_token(const DynamicToken& token, gen::GenerationService& service, const Engine* engine) {
    DynamicToken next = token;
    next.items = resolve_axis(token.generator, service, engine);
    return next;
}

}  // namespace gensheet::kit
