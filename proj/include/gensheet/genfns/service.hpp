#pragma once

#include <stdexcept>
#include <string>

#include "gensheet/genfns/functions.hpp"

namespace gensheet::gen {

/// Raised by backends when a provider fails or times out. The message is
/// surfaced in the #GEN_ERR value.
class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Where generation requests go: the caching proxy, in process or remote.
class GenerationBackend {
public:
    virtual ~GenerationBackend() = default;
    virtual ImageRef generate_image(const GenerationKey& key) = 0;
    virtual std::string complete(const LlmRequest& request) = 0;
};

/// Offline provider that answers with mock text and image handles named
/// after the key, without rendering pixels.
class MockBackend : public GenerationBackend {
public:
    ImageRef generate_image(const GenerationKey& key) override;
    std::string complete(const LlmRequest& request) override;
};

/// Executes one request against a backend. Blocking; safe to call from
/// many threads when the backend is.
class GenerationService {
public:
    explicit GenerationService(GenerationBackend& backend) : backend_(backend) {}

    GenResult run(const GenRequest& request);

    /// List path: parse the array literal and require exactly `length`
    /// items, re-requesting once before giving up.
    GenResult run_list(const LlmRequest& request, int length);

private:
    GenerationBackend& backend_;
};

}  // namespace gensheet::gen
