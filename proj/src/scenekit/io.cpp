// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#include "semscene/scenekit/io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace semscene {

namespace {

constexpr std::array<char, 4> kDepthMagic = {'S', 'D', 'P', 'T'};

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::kInvalidArgument, "cannot write " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::kInvalidArgument, "cannot read " + path.string());
    return in;
}

void put_u32le(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32le(const unsigned char* b) {
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string pnm_token(std::istream& in) {
    std::string tok;
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            if (!tok.empty()) break;
        } else {
            tok.push_back(static_cast<char>(c));
        }
        c = in.get();
    }
    return tok;
}

struct PnmHeader {
    std::string magic;
    int width = 0;
    int height = 0;
    int maxval = 0;
};

PnmHeader read_pnm_header(std::istream& in, const std::filesystem::path& path) {
    PnmHeader h;
    h.magic = pnm_token(in);
    try {
        h.width = std::stoi(pnm_token(in));
        h.height = std::stoi(pnm_token(in));
        h.maxval = std::stoi(pnm_token(in));
    } catch (const std::exception&) {
        fail(ErrorKind::kFormat, "malformed image header in " + path.string());
    }
    if (h.width <= 0 || h.height <= 0 || h.maxval <= 0 || h.maxval > 65535) {
        fail(ErrorKind::kFormat, "invalid image dimensions in " + path.string());
    }
    return h;
}

}  // namespace

void save_mask(const std::filesystem::path& path, const SemanticMask& mask) {
    mask.validate();
    require(mask.num_classes() < 65535, "too many classes for a 16-bit mask file");
    auto out = open_out(path);
    out << "P5\n" << mask.width() << ' ' << mask.height() << "\n65535\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(mask.width()) * 2);
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            const auto v = static_cast<std::uint16_t>(mask(y, x));
            row[2 * x] = static_cast<unsigned char>(v >> 8);
            row[2 * x + 1] = static_cast<unsigned char>(v & 0xff);
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!out) fail(ErrorKind::kInvalidArgument, "write failed for " + path.string());
}

SemanticMask load_mask(const std::filesystem::path& path, int num_classes) {
    auto in = open_in(path);
    const PnmHeader h = read_pnm_header(in, path);
    if (h.magic != "P5" || h.maxval != 65535) fail(ErrorKind::kFormat, "expected 16-bit P5 mask: " + path.string());
    SemanticMask mask(h.height, h.width, num_classes);
    std::vector<unsigned char> row(static_cast<std::size_t>(h.width) * 2);
    for (int y = 0; y < h.height; ++y) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
        if (!in) fail(ErrorKind::kFormat, "truncated mask file " + path.string());
        for (int x = 0; x < h.width; ++x) {
            const int v = (row[2 * x] << 8) | row[2 * x + 1];
            if (v > num_classes) {
                fail(ErrorKind::kValidation, "label " + std::to_string(v) + " >= num_classes in " + path.string());
            }
            mask(y, x) = v;
        }
    }
    return mask;
}

void save_depth(const std::filesystem::path& path, const DepthMap& depth) {
    depth.validate();
    auto out = open_out(path);
    out.write(kDepthMagic.data(), 4);
    put_u32le(out, static_cast<std::uint32_t>(depth.height()));
    put_u32le(out, static_cast<std::uint32_t>(depth.width()));
    put_u32le(out, 0);
    for (std::size_t i = 0; i < depth.pixels(); ++i) {
        const float v = depth.valid(i) ? depth.value(i) : 0.0f;
        put_u32le(out, std::bit_cast<std::uint32_t>(v));
    }
    if (!out) fail(ErrorKind::kInvalidArgument, "write failed for " + path.string());
}

DepthMap load_depth(const std::filesystem::path& path) {
    auto in = open_in(path);
    unsigned char header[16];
    in.read(reinterpret_cast<char*>(header), 16);
    if (!in || std::memcmp(header, kDepthMagic.data(), 4) != 0) {
        fail(ErrorKind::kFormat, "bad depth header in " + path.string());
    }
    const std::uint32_t h = get_u32le(header + 4);
    const std::uint32_t w = get_u32le(header + 8);
    if (h == 0 || w == 0 || h > (1u << 16) || w > (1u << 16)) {
        fail(ErrorKind::kFormat, "bad depth dimensions in " + path.string());
    }
    DepthMap depth(static_cast<int>(h), static_cast<int>(w));
    std::vector<unsigned char> buf(static_cast<std::size_t>(h) * w * 4);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!in) fail(ErrorKind::kFormat, "truncated depth file " + path.string());
    for (std::uint32_t y = 0; y < h; ++y) {
        for (std::uint32_t x = 0; x < w; ++x) {
            const float v = std::bit_cast<float>(get_u32le(buf.data() + 4 * (static_cast<std::size_t>(y) * w + x)));
            if (v == 0.0f) continue;
            if (!(std::isfinite(v) && v > 0.0f)) fail(ErrorKind::kValidation, "invalid depth value in " + path.string());
            depth.set(static_cast<int>(y), static_cast<int>(x), v);
        }
    }
    return depth;
}

void save_image(const std::filesystem::path& path, const ColorImage& image) {
    auto out = open_out(path);
    out << "P6\n" << image.width() << ' ' << image.height() << "\n255\n";
    std::vector<unsigned char> buf(image.size());
    for (std::size_t i = 0; i < image.size(); ++i) {
        const float v = std::clamp(image.data()[i], 0.0f, 1.0f);
        buf[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) fail(ErrorKind::kInvalidArgument, "write failed for " + path.string());
}

ColorImage load_image(const std::filesystem::path& path) {
    auto in = open_in(path);
    const PnmHeader h = read_pnm_header(in, path);
    if (h.magic != "P6" || h.maxval != 255) fail(ErrorKind::kFormat, "expected 8-bit P6 image: " + path.string());
    ColorImage image(h.height, h.width);
    std::vector<unsigned char> buf(image.size());
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!in) fail(ErrorKind::kFormat, "truncated image file " + path.string());
    for (std::size_t i = 0; i < buf.size(); ++i) image.data()[i] = static_cast<float>(buf[i]) / 255.0f;
    return image;
}

}  // namespace semscene
