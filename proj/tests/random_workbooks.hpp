#pragma once

#include <random>
#include <string>

#include "gensheet/formula/formula.hpp"
#include "gensheet/session/session.hpp"
#include "test_support.hpp"

namespace gensheet::testing {

/// Random cell sources and edit targets on a w x h grid.
struct RandomEditor {
    std::mt19937_64& rng;
    int w;
    int h;

    int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

    std::string ref() {
        // Mostly inside the grid, sometimes just outside it.
        const int c = pick(0, w + 1);
        const int r = pick(0, h + 1);
        return formula::column_name(c) + std::to_string(r + 1);
    }
    std::string range() {
        auto a = ref();
        auto b = ref();
        return a + ":" + b;
    }
    std::string source() {
        static const char* words[] = {"cat", "sunset", "red", "portrait of a woman", ""};
        switch (pick(0, 19)) {
            case 0: return std::to_string(pick(0, 9));
            case 1: return words[pick(0, 4)];
            case 2: return "";
            case 3: return "=" + ref();
            case 4: return "=" + ref() + "&\" \"&" + ref();
            case 5: return "=" + ref() + "+" + ref();
            case 6: return "=SUM(" + range() + ")";
            case 7: return "=CONCAT(" + range() + ")";
            case 8: return "=GPT_LIST(" + ref() + ", " + std::to_string(pick(1, 4)) + ")";
            case 9: return "=SYNONYMS_T(\"red\", " + std::to_string(pick(1, 4)) + ")";
            case 10: return "=TTI(" + ref() + ", " + ref() + ")";
            case 11: return "=IMAGE(" + ref() + ")";
            case 12: return "=EMBELLISH(" + ref() + ")";
            case 13: return "=LIST_COMPLETION(" + range() + ", 2)";
            case 14: return "=NOPE()";
            case 15: return "=" + ref() + "/" + ref();
            case 16: return "=GPT_LIST(\"x\", " + ref() + ")";
            case 17: return "=DIVERGENTS(" + ref() + ")";
            case 18: return "=GPT(" + ref() + "&\"?\")";
            default: return "=" + ref() + "&" + ref();
        }
    }
    engine::CellAddress cell() { return engine::CellAddress{"Sheet1", pick(0, w - 1), pick(0, h - 1)}; }
};

inline session::Session random_session(std::mt19937_64& rng) {
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    static const char* sheet_names[] = {"Sheet1", "waves", "it's a sheet", "Ünïcode", "s p a c e", "x!y"};
    session::Session s;
    const int sheets = pick(1, 3);
    for (int i = 0; i < sheets; ++i) {
        auto& sheet = s.workbook.sheets[sheet_names[pick(0, 5)]];
        const int cells = pick(0, 25);
        for (int c = 0; c < cells; ++c) {
            engine::CellPos p{pick(0, 19), pick(0, 19)};
            switch (pick(0, 6)) {
                case 0: sheet.cells[p] = engine::CellContent::literal(Value::number(pick(-1000, 100000))); break;
                case 1: sheet.cells[p] = engine::CellContent::parse(std::to_string(pick(0, 99)) + ".50"); break;
                case 2: {
                    auto t = random_text(rng);
                    if (!t.empty()) sheet.cells[p] = engine::CellContent::literal(Value::text(t));
                    break;
                }
                case 3: sheet.cells[p] = engine::CellContent::literal(Value::text(std::to_string(pick(0, 9)))); break;
                case 4:
                    sheet.cells[p] = engine::CellContent::parse("=TTI(\"p" + std::to_string(pick(0, 4)) + "\", " +
                                                        std::to_string(pick(0, 3)) + ")");
                    break;
                case 5: sheet.cells[p] = engine::CellContent::parse("=GPT_LIST(\"things\", " + std::to_string(pick(1, 4)) + ")"); break;
                default: sheet.cells[p] = engine::CellContent::from_formula(random_ast(rng, 3)); break;
            }
        }
    }
    s.workbook.settings.default_seed = static_cast<uint32_t>(pick(0, 1 << 20));
    s.workbook.settings.default_cfg = pick(0, 350) / 10.0;
    if (pick(0, 1)) s.workbook.settings.provider_profile = "studio \"b\"";
    const auto& first = s.workbook.sheets.begin()->first;
    if (pick(0, 1)) s.power.by_role[kit::PowerRole::Seed] = {{first, pick(0, 5), pick(0, 5)}, kit::PowerRole::Seed, "seed"};
    if (pick(0, 1)) s.power.by_role[kit::PowerRole::Cfg] = {{first, 7, 0}, kit::PowerRole::Cfg, "global cfg"};
    const int tokens = pick(0, 3);
    for (int t = 0; t < tokens; ++t) {
        const std::string label = "tok" + std::to_string(t) + random_text(rng);
        switch (pick(0, 3)) {
            case 0: s.tokens.add_token(label); break;
            case 1: s.tokens.add_token(kit::DynamicToken{label, kit::ManualList{{"a", "b"}}, {"a", "b"}}); break;
            case 2:
                s.tokens.add_token(kit::DynamicToken{label, kit::GenerativeList{"SYNONYMS", "red", 3}, {"x", "y", "z"}});
                break;
            default:
                s.tokens.add_token(kit::DynamicToken{label, engine::parse_range("A1:A4", first), {}});
                break;
        }
    }
    return s;
}

}  // namespace gensheet::testing
