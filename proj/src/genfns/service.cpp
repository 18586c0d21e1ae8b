#include "gensheet/genfns/service.hpp"

#include "gensheet/genfns/array_literal.hpp"
#include "gensheet/genfns/mock.hpp"

namespace gensheet::gen {

ImageRef MockBackend::generate_image(const GenerationKey& key) {
    if (auto problem = validate_key(key)) throw GenerationError(*problem);
    auto id = key_id(key);
    return ImageRef{id, "/image/" + id, kImageSize, kImageSize};
}

std::string MockBackend::complete(const LlmRequest& request) { return mock_llm(request); }

GenResult GenerationService::run(const GenRequest& request) {
    try {
        if (auto tti = std::get_if<TtiCall>(&request)) return backend_.generate_image(tti->key);
        const auto& llm = std::get<LlmCall>(request);
        if (llm.request.expects_list) return run_list(llm.request, llm.length);
        return backend_.complete(llm.request);
    } catch (const std::exception& e) {
        return ErrorValue{ErrorKind::GenErr, e.what()};
    }
}

GenResult GenerationService::run_list(const LlmRequest& request, int length) {
    std::string problem;
    for (int attempt = 0; attempt < 2; ++attempt) {
        const auto text = backend_.complete(request);
        auto items = parse_array_literal(text);
        if (!items) {
            problem = "malformed array literal";
            continue;
        }
        if (static_cast<int>(items->size()) != length) {
            problem = "expected " + std::to_string(length) + " items, got " + std::to_string(items->size());
            continue;
        }
        return std::move(*items);
    }
    return ErrorValue{ErrorKind::GenErr, problem};
}

}  // namespace gensheet::gen
