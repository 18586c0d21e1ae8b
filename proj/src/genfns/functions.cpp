#include "gensheet/genfns/functions.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "gensheet/formula/formula.hpp"

namespace gensheet::gen {

namespace {

std::vector<FunctionSpec> build_specs() {
    std::vector<FunctionSpec> specs = {
        {"TTI", FunctionKind::Tti, 1, 3, OutputShape::Scalar, ""},
        {"GPT", FunctionKind::LlmScalar, 1, 1, OutputShape::Scalar, "[USER INPUT]"},
        {"EMBELLISH", FunctionKind::LlmScalar, 1, 1, OutputShape::Scalar, "Embellish this sentence: [USER INPUT]"},
    };
    const std::vector<std::pair<std::string, std::string>> lists = {
        {"GPT_LIST", "[USER INPUT]"},
        {"LIST_COMPLETION", R"(Similar items to this list without repeating "[LIST]")"},
        {"SYNONYMS", R"(Synonyms of "[USER INPUT]")"},
        {"ANTONYMS", R"(Antonyms of "[USER INPUT]")"},
        {"DIVERGENTS", R"(Divergent words to "[USER INPUT]")"},
        {"ALTERNATIVES", R"(Alternative ways to say "[USER INPUT]")"},
    };
    for (const auto& [name, tmpl] : lists) {
        specs.push_back({name, FunctionKind::LlmList, 1, 2, OutputShape::ListColumn, tmpl});
        specs.push_back({name + "_T", FunctionKind::LlmList, 1, 2, OutputShape::ListRow, tmpl});
    }
    return specs;
}

std::string upper(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return out;
}

std::string base_name(const std::string& name) {
    if (name.size() > 2 && name.ends_with("_T")) return name.substr(0, name.size() - 2);
    return name;
}

bool blank_text(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

Value value_error(std::string message) { return Value::error(ErrorKind::Value, std::move(message)); }

std::optional<int> integral_length(double v) {
    if (!std::isfinite(v) || v != std::floor(v) || v < 1 || v > kMaxListLength) return std::nullopt;
    return static_cast<int>(v);
}

}  // namespace

const std::vector<FunctionSpec>& function_specs() {
    static const std::vector<FunctionSpec> specs = build_specs();
    return specs;
}

const FunctionSpec* find_function(std::string_view name) {
    const auto key = upper(name);
    for (const auto& s : function_specs()) {
        if (s.name == key) return &s;
    }
    return nullptr;
}

const FunctionSpec* transposed_twin(const FunctionSpec& spec) {
    if (!is_list_function(spec)) return nullptr;
    if (spec.shape == OutputShape::ListRow) return find_function(base_name(spec.name));
    return find_function(spec.name + "_T");
}

bool is_list_function(const FunctionSpec& spec) { return spec.kind == FunctionKind::LlmList; }

std::string render_prompt(const FunctionSpec& spec, std::string_view user_input) {
    std::string out = spec.prompt_template;
    for (std::string_view slot : {std::string_view("[USER INPUT]"), std::string_view("[LIST]")}) {
        if (auto pos = out.find(slot); pos != std::string::npos) {
            out.replace(pos, slot.size(), user_input);
            break;
        }
    }
    return out;
}

LlmRequest list_request(std::string_view prompt, int length) {
    LlmRequest req;
    req.messages = {
        {"system", std::string(kListSystemMessage)},
        {"user", std::string(kFewShotUser)},
        {"assistant", std::string(kFewShotAssistant)},
        {"user", std::string(prompt) + " (length: " + std::to_string(length) + ")"},
    };
    req.expects_list = true;
    req.expected_length = length;
    return req;
}

LlmRequest scalar_request(std::string_view prompt) {
    LlmRequest req;
    req.messages = {{"user", std::string(prompt)}};
    return req;
}

LlmRequest assemble_llm_request(const FunctionSpec& spec, std::string_view user_input, int length) {
    const auto prompt = render_prompt(spec, user_input);
    if (is_list_function(spec)) return list_request(prompt, length);
    return scalar_request(prompt);
}

std::string request_key(const GenRequest& request) {
    if (auto tti = std::get_if<TtiCall>(&request)) return "tti\x1F" + canonical_encoding(tti->key);
    const auto& llm = std::get<LlmCall>(request);
    return "llm\x1F" + llm.function + "\x1F" + llm.input + "\x1F" + std::to_string(llm.length);
}

std::variant<GenRequest, Value> build_request(const FunctionSpec& spec, const std::vector<Arg>& args,
                                              const GenDefaults& defaults) {
    const int argc = static_cast<int>(args.size());
    if (argc < spec.min_args || argc > spec.max_args) {
        return value_error(spec.name + " takes " + std::to_string(spec.min_args) +
                           (spec.min_args == spec.max_args ? "" : "-" + std::to_string(spec.max_args)) +
                           " arguments");
    }
    const bool accepts_range_input = spec.name.starts_with("LIST_COMPLETION");
    for (int i = 0; i < argc; ++i) {
        if (std::holds_alternative<std::vector<Value>>(args[i]) && !(i == 0 && accepts_range_input)) {
            return value_error(spec.name + " does not accept a range here");
        }
    }

    if (spec.kind == FunctionKind::Tti) {
        const auto prompt = coerce_text(std::get<Value>(args[0]));
        if (!prompt) return value_error("prompt must be text");
        if (blank_text(*prompt)) return value_error("prompt is empty");
        GenerationKey key{*prompt, defaults.seed, defaults.cfg};
        if (argc >= 2) {
            const auto& seed = std::get<Value>(args[1]);
            if (seed.is_number()) {
                const double s = seed.as_number();
                if (!std::isfinite(s) || s != std::floor(s) || s < 0 || s > 4294967295.0) {
                    return value_error("seed must be an integer in [0, 4294967295]");
                }
                key.seed = static_cast<uint64_t>(s);
            } else if (!seed.is_blank()) {
                return value_error("seed must be a number");
            }
        }
        if (argc >= 3) {
            const auto& cfg = std::get<Value>(args[2]);
            if (cfg.is_number()) key.cfg = cfg.as_number();
            else if (!cfg.is_blank()) return value_error("cfg must be a number");
        }
        if (auto err = validate_key(key)) return value_error(*err);
        return GenRequest{TtiCall{std::move(key)}};
    }

    std::string input;
    if (auto range = std::get_if<std::vector<Value>>(&args[0])) {
        std::vector<std::string> items;
        for (const auto& v : *range) {
            auto t = coerce_text(v);
            if (!t) return value_error("list items must be text");
            if (!blank_text(*t)) items.push_back(*t);
        }
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (i) input += ", ";
            input += items[i];
        }
    } else {
        auto t = coerce_text(std::get<Value>(args[0]));
        if (!t) return value_error("input must be text");
        input = *t;
    }
    if (blank_text(input)) return value_error("input is empty");

    int length = 0;
    if (is_list_function(spec)) {
        length = kDefaultListLength;
        if (argc >= 2) {
            const auto& len = std::get<Value>(args[1]);
            if (!len.is_number()) return value_error("length must be a number");
            auto n = integral_length(len.as_number());
            if (!n) return value_error("length must be an integer in [1, 1000]");
            length = *n;
        }
    }
    LlmCall call;
    call.function = base_name(spec.name);
    call.input = input;
    call.length = length;
    call.request = assemble_llm_request(spec, input, length);
    return GenRequest{std::move(call)};
}

std::variant<SpillExtent, ErrorValue> list_call_extent(const formula::CallNode& call) {
    const FunctionSpec* spec = find_function(call.name);
    if (!spec || !is_list_function(*spec)) return ErrorValue{ErrorKind::Value, call.name + " is not a list function"};
    int length = kDefaultListLength;
    if (call.args.size() >= 2) {
        const auto* lit = call.args[1]->as<formula::NumLit>();
        if (!lit) return ErrorValue{ErrorKind::Value, "list length must be a number literal"};
        auto n = integral_length(lit->value);
        if (!n) return ErrorValue{ErrorKind::Value, "length must be an integer in [1, 1000]"};
        length = *n;
    }
    return SpillExtent{spec->shape, length};
}

}  // namespace gensheet::gen
