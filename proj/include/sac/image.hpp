#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sac/common.hpp"
#include "sac/sha256.hpp"

namespace sac {

// Decoded raster image. Pixels are row-major and channel-interleaved.
struct RawImage {
    int width = 0;
    int height = 0;
    int channels = 0;  // 1 (grayscale) or 3 (RGB)
    std::vector<uint8_t> pixels;

    void validate() const {
        if (width < 8 || height < 8)
            throw InvalidImage("dimensions must be at least 8x8, got " + std::to_string(width) + "x" +
                               std::to_string(height));
        if (channels != 1 && channels != 3)
            throw InvalidImage("channels must be 1 or 3, got " + std::to_string(channels));
        size_t expected = static_cast<size_t>(width) * height * channels;
        if (pixels.size() != expected)
            throw InvalidImage("pixel buffer has " + std::to_string(pixels.size()) + " bytes, expected " +
                               std::to_string(expected));
    }

    uint8_t at(int x, int y, int c) const {
        return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    uint8_t& at(int x, int y, int c) {
        return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
    }

    bool operator==(const RawImage&) const = default;

    Digest digest() const {
        Sha256 h;
        ByteWriter header;
        header.str("sac-raw-image-v1");
        header.u32(static_cast<uint32_t>(width));
        header.u32(static_cast<uint32_t>(height));
        header.u32(static_cast<uint32_t>(channels));
        h.update(header.data());
        h.update(pixels);
        return h.finalize();
    }
};

inline RawImage make_image(int width, int height, int channels, uint8_t fill = 0) {
    RawImage img;
    img.width = width;
    img.height = height;
    img.channels = channels;
    img.pixels.assign(static_cast<size_t>(width) * height * channels, fill);
    return img;
}

// Binary PPM (P6) / PGM (P5) support so probe inputs can come from ordinary
// image directories.
inline RawImage load_pnm(const std::filesystem::path& path) {
    auto data = read_file(path);
    size_t pos = 0;
    auto token = [&]() -> std::string {
        while (pos < data.size()) {
            if (data[pos] == '#') {
                while (pos < data.size() && data[pos] != '\n') ++pos;
            } else if (std::isspace(data[pos])) {
                ++pos;
            } else {
                break;
            }
        }
        size_t start = pos;
        while (pos < data.size() && !std::isspace(data[pos])) ++pos;
        if (start == pos) throw ParseError("unexpected end of PNM header in " + path.string());
        return std::string(data.begin() + start, data.begin() + pos);
    };
    std::string magic = token();
    int channels;
    if (magic == "P5") channels = 1;
    else if (magic == "P6") channels = 3;
    else throw ParseError("unsupported PNM magic '" + magic + "' in " + path.string());
    RawImage img;
    img.channels = channels;
    img.width = std::stoi(token());
    img.height = std::stoi(token());
    int maxval = std::stoi(token());
    if (maxval != 255) throw ParseError("only 8-bit PNM supported, maxval=" + std::to_string(maxval));
    ++pos;  // single whitespace after maxval
    size_t need = static_cast<size_t>(img.width) * img.height * channels;
    if (data.size() - pos < need) throw ParseError("truncated PNM payload in " + path.string());
    img.pixels.assign(data.begin() + pos, data.begin() + pos + need);
    img.validate();
    return img;
}

inline void save_pnm(const RawImage& img, const std::filesystem::path& path) {
    img.validate();
    std::string header = (img.channels == 3 ? "P6\n" : "P5\n") + std::to_string(img.width) + " " +
                         std::to_string(img.height) + "\n255\n";
    std::vector<uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.pixels.begin(), img.pixels.end());
    write_file(path, out);
}

}  // namespace sac
