#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include <zlib.h>

#include "gensheet/genfns/mock.hpp"

namespace gensheet::gen {

namespace {

constexpr uint64_t mix64(uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

uint64_t load_le64(const uint8_t* p) {
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

// Pixel rule shared by both kernels: keyed noise averaged with a
// digest-dependent gradient, then scaled about mid-gray by a contrast that
// grows with cfg (factor 100 + 2*tenths over 800).
struct PixelRule {
    uint64_t k0;
    uint64_t k1;
    int gx[3];
    int gy[3];
    int offset[3];
    int factor;

    explicit PixelRule(const MockImageParams& p)
        : k0(load_le64(p.digest.data())), k1(load_le64(p.digest.data() + 8)), factor(100 + 2 * p.cfg_tenths) {
        for (int c = 0; c < 3; ++c) {
            gx[c] = p.digest[16 + c];
            gy[c] = p.digest[19 + c];
            offset[c] = p.digest[22 + c];
        }
    }

    void row(int y, int width, uint8_t* out) const {
        for (int x = 0; x < width; ++x) {
            const uint64_t h = mix64(k0 ^ mix64(k1 ^ ((static_cast<uint64_t>(y) << 16) | static_cast<uint64_t>(x))));
            for (int c = 0; c < 3; ++c) {
                const int noise = static_cast<int>((h >> (8 * c)) & 0xFF);
                const int structure = ((x * gx[c] + y * gy[c]) / 64 + offset[c]) % 256;
                const int v = (noise + structure) / 2;
                const int d = v - 128;
                const int q = (std::abs(d) * factor) / 800;
                out[3 * x + c] = static_cast<uint8_t>(d < 0 ? 128 - q : 128 + q);
            }
        }
    }
};

void check_size(const MockImageParams& params, std::span<uint8_t> rgb) {
    if (rgb.size() != static_cast<std::size_t>(params.width) * params.height * 3) {
        throw std::invalid_argument("pixel buffer size does not match image dimensions");
    }
}

void put_be32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

void put_chunk(std::vector<uint8_t>& out, const char type[4], const std::vector<uint8_t>& data) {
    put_be32(out, static_cast<uint32_t>(data.size()));
    const std::size_t type_at = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const uLong crc = crc32(0L, out.data() + type_at, static_cast<uInt>(4 + data.size()));
    put_be32(out, static_cast<uint32_t>(crc));
}

}  // namespace

MockImageParams mock_image_params(const GenerationKey& key) {
    MockImageParams p;
    p.digest = key_digest(key);
    p.cfg_tenths = static_cast<int>(std::llround(key.cfg * 10.0));
    return p;
}

void render_mock_pixels(const MockImageParams& params, std::span<uint8_t> rgb) {
    check_size(params, rgb);
    const PixelRule rule(params);
    const int width = params.width;
    const int height = params.height;
    uint8_t* base = rgb.data();
#pragma omp parallel for schedule(static)
    for (int y = 0; y < height; ++y) {
        rule.row(y, width, base + static_cast<std::size_t>(y) * width * 3);
    }
}

void render_mock_pixels_serial(const MockImageParams& params, std::span<uint8_t> rgb) {
    check_size(params, rgb);
    const PixelRule rule(params);
    for (int y = 0; y < params.height; ++y) {
        rule.row(y, params.width, rgb.data() + static_cast<std::size_t>(y) * params.width * 3);
    }
}

std::vector<uint8_t> encode_png_rgb(std::span<const uint8_t> rgb, int width, int height) {
    const std::size_t stride = static_cast<std::size_t>(width) * 3;
    std::vector<uint8_t> raw;
    raw.reserve((stride + 1) * height);
    for (int y = 0; y < height; ++y) {
        raw.push_back(0);  // filter: none
        raw.insert(raw.end(), rgb.begin() + y * stride, rgb.begin() + (y + 1) * stride);
    }

    std::vector<uint8_t> z;
    z.reserve(raw.size() + raw.size() / 65535 * 5 + 16);
    z.push_back(0x78);
    z.push_back(0x01);
    std::size_t pos = 0;
    do {
        const std::size_t len = std::min<std::size_t>(65535, raw.size() - pos);
        const bool last = pos + len == raw.size();
        z.push_back(last ? 1 : 0);
        z.push_back(static_cast<uint8_t>(len & 0xFF));
        z.push_back(static_cast<uint8_t>(len >> 8));
        z.push_back(static_cast<uint8_t>(~len & 0xFF));
        z.push_back(static_cast<uint8_t>((~len >> 8) & 0xFF));
        z.insert(z.end(), raw.begin() + pos, raw.begin() + pos + len);
        pos += len;
    } while (pos < raw.size());
    put_be32(z, static_cast<uint32_t>(adler32(1L, raw.data(), static_cast<uInt>(raw.size()))));

    std::vector<uint8_t> png = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
    std::vector<uint8_t> ihdr;
    put_be32(ihdr, static_cast<uint32_t>(width));
    put_be32(ihdr, static_cast<uint32_t>(height));
    ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});
    put_chunk(png, "IHDR", ihdr);
    put_chunk(png, "IDAT", z);
    put_chunk(png, "IEND", {});
    return png;
}

std::vector<uint8_t> mock_tti(const GenerationKey& key) {
    const auto params = mock_image_params(key);
    std::vector<uint8_t> rgb(static_cast<std::size_t>(params.width) * params.height * 3);
    render_mock_pixels(params, rgb);
    return encode_png_rgb(rgb, params.width, params.height);
}

}  // namespace gensheet::gen
