#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gensheet/formula/ast.hpp"
#include "gensheet/genfns/generation.hpp"
#include "gensheet/value.hpp"

namespace gensheet::gen {

enum class OutputShape { Scalar, ListColumn, ListRow };

enum class FunctionKind {
    Tti,
    LlmScalar,
    LlmList,
};

inline constexpr int kDefaultListLength = 5;
inline constexpr int kMaxListLength = 1000;

/// One entry of the generative function set. prompt_template carries a
/// `[USER INPUT]` or `[LIST]` slot.
struct FunctionSpec {
    std::string name;
    FunctionKind kind;
    int min_args;
    int max_args;
    OutputShape shape;
    std::string prompt_template;
};

const std::vector<FunctionSpec>& function_specs();

/// Case-insensitive lookup; nullptr for unregistered names.
const FunctionSpec* find_function(std::string_view name);

/// The `_T` twin of a list function (or the plain one for a `_T` name).
const FunctionSpec* transposed_twin(const FunctionSpec& spec);

bool is_list_function(const FunctionSpec& spec);

// Exact upstream strings for list requests.
inline constexpr std::string_view kListSystemMessage =
    "Respond with a Javascript array literal with the given length in parentheses";
inline constexpr std::string_view kFewShotUser = "types of animals (length: 5)";
inline constexpr std::string_view kFewShotAssistant = R"(["dog", "cat", "frog", "horse", "deer"])";

/// Substitutes the user input (or the comma-joined list) into the template.
std::string render_prompt(const FunctionSpec& spec, std::string_view user_input);

/// System message, few-shot pair, then `<prompt> (length: N)`.
LlmRequest list_request(std::string_view prompt, int length);

/// A bare user message carrying the rendered prompt.
LlmRequest scalar_request(std::string_view prompt);

/// Assembles the exact upstream request for a list or scalar LLM function.
LlmRequest assemble_llm_request(const FunctionSpec& spec, std::string_view user_input, int length);

struct TtiCall {
    GenerationKey key;
};

struct LlmCall {
    std::string function;
    std::string input;
    int length = 0;  // 0 for scalar functions
    LlmRequest request;
};

using GenRequest = std::variant<TtiCall, LlmCall>;

/// Memoization identity of a request: equal keys produce equal results.
std::string request_key(const GenRequest& request);

using ItemList = std::vector<std::string>;
using GenResult = std::variant<ImageRef, std::string, ItemList, ErrorValue>;

/// Evaluated call argument: a scalar, or the row-major cells of a range.
using Arg = std::variant<Value, std::vector<Value>>;

struct GenDefaults {
    uint32_t seed = kDefaultSeed;
    double cfg = kDefaultCfg;
};

/// Builds the request for a generative call from evaluated arguments.
/// Returns an error Value for argument problems. Arguments must already
/// be free of errors and pending values.
std::variant<GenRequest, Value> build_request(const FunctionSpec& spec, const std::vector<Arg>& args,
                                              const GenDefaults& defaults);

/// Static spill extent of a top-level list call, read from the syntax so
/// regions are known before any result arrives.
struct SpillExtent {
    OutputShape direction;
    int length;
};
std::variant<SpillExtent, ErrorValue> list_call_extent(const formula::CallNode& call);

}  // namespace gensheet::gen
