#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gensheet/genfns/generation.hpp"

namespace gensheet::gen {

/// Lowercased ASCII with runs of non-alphanumerics collapsed to `-` and
/// trimmed at both ends. "Synonyms of \"red\"" -> "synonyms-of-red".
std::string slugify(std::string_view text);

/// Offline LLM. List requests answer `["<slug>-1", ..., "<slug>-N"]` where
/// the slug comes from the final user prompt; scalar requests answer
/// `EMBELLISH(<input>)` or `GPT(<input>)`.
std::string mock_llm(const LlmRequest& request);

/// Parameters of the procedural mock image, derived from a key.
struct MockImageParams {
    Sha256Digest digest{};
    int cfg_tenths = 70;
    int width = kImageSize;
    int height = kImageSize;
};

MockImageParams mock_image_params(const GenerationKey& key);

/// Fills `rgb` (width*height*3 bytes, row-major) with the mock image.
/// The parallel and serial kernels must agree byte for byte.
void render_mock_pixels(const MockImageParams& params, std::span<uint8_t> rgb);
void render_mock_pixels_serial(const MockImageParams& params, std::span<uint8_t> rgb);

/// RGB8 PNG with stored (uncompressed) deflate blocks, so the byte stream is
/// fixed by the pixels alone.
std::vector<uint8_t> encode_png_rgb(std::span<const uint8_t> rgb, int width, int height);

/// Deterministic 512x512 PNG for a key.
std::vector<uint8_t> mock_tti(const GenerationKey& key);

}  // namespace gensheet::gen
