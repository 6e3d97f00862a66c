#pragma once

// Baseline sequential JPEG compress/decompress cycle: BT.601 color
// conversion, 4:2:0 chroma subsampling, 8x8 DCT, and the standard
// quantization tables scaled by the libjpeg quality formula. The entropy
// coding stage is omitted because it is lossless and the byte stream is
// never retained; the pixel result is identical to a full encode/decode.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "sac/image.hpp"

namespace sac {

namespace jpeg_detail {

// ITU-T T.81 example quantization tables (luminance / chrominance).
inline constexpr int kLumaBase[64] = {
    16, 11, 10, 16, 24,  40,  51,  61,
    12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,
    14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,
    24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99};

inline constexpr int kChromaBase[64] = {
    17, 18, 24, 47, 99, 99, 99, 99,
    18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99,
    47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99};

// libjpeg quality scaling: 1..100 maps onto a multiplier for the base
// tables, entries clamped to [1, 255] (baseline range).
inline std::array<int, 64> scaled_table(const int* base, int quality) {
    int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
    std::array<int, 64> q{};
    for (int i = 0; i < 64; ++i) {
        int v = (base[i] * scale + 50) / 100;
        q[i] = std::clamp(v, 1, 255);
    }
    return q;
}

struct DctBasis {
    // M[u][x] = 0.5 * s(u) * cos((2x+1) u pi / 16); orthonormal, so the
    // inverse transform is the transpose.
    double m[8][8];
    DctBasis() {
        for (int u = 0; u < 8; ++u) {
            double su = u == 0 ? 1.0 / std::numbers::sqrt2 : 1.0;
            for (int x = 0; x < 8; ++x)
                m[u][x] = 0.5 * su * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
        }
    }
};

inline const DctBasis& basis() {
    static const DctBasis b;
    return b;
}

inline void fdct8x8(const double in[64], double out[64]) {
    const auto& M = basis().m;
    double tmp[64];
    for (int v = 0; v < 8; ++v)
        for (int x = 0; x < 8; ++x) {
            double acc = 0;
            for (int y = 0; y < 8; ++y) acc += M[v][y] * in[y * 8 + x];
            tmp[v * 8 + x] = acc;
        }
    for (int v = 0; v < 8; ++v)
        for (int u = 0; u < 8; ++u) {
            double acc = 0;
            for (int x = 0; x < 8; ++x) acc += tmp[v * 8 + x] * M[u][x];
            out[v * 8 + u] = acc;
        }
}

inline void idct8x8(const double in[64], double out[64]) {
    const auto& M = basis().m;
    double tmp[64];
    for (int v = 0; v < 8; ++v)
        for (int x = 0; x < 8; ++x) {
            double acc = 0;
            for (int u = 0; u < 8; ++u) acc += in[v * 8 + u] * M[u][x];
            tmp[v * 8 + x] = acc;
        }
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            double acc = 0;
            for (int v = 0; v < 8; ++v) acc += M[v][y] * tmp[v * 8 + x];
            out[y * 8 + x] = acc;
        }
}

inline uint8_t clamp_u8(long v) { return static_cast<uint8_t>(std::clamp(v, 0l, 255l)); }

// DCT + quantize + dequantize + inverse DCT over one sample plane,
// edge-replicated to a multiple of 8 and cropped back.
inline void process_plane(std::vector<uint8_t>& plane, int w, int h, const std::array<int, 64>& qtab) {
    int pw = (w + 7) & ~7;
    int ph = (h + 7) & ~7;
    std::vector<uint8_t> padded(static_cast<size_t>(pw) * ph);
    for (int y = 0; y < ph; ++y) {
        int sy = std::min(y, h - 1);
        for (int x = 0; x < pw; ++x) padded[static_cast<size_t>(y) * pw + x] = plane[static_cast<size_t>(sy) * w + std::min(x, w - 1)];
    }
    double block[64], coeff[64], recon[64];
    for (int by = 0; by < ph; by += 8) {
        for (int bx = 0; bx < pw; bx += 8) {
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x)
                    block[y * 8 + x] = static_cast<double>(padded[static_cast<size_t>(by + y) * pw + bx + x]) - 128.0;
            fdct8x8(block, coeff);
            for (int i = 0; i < 64; ++i) {
                long q = std::llround(coeff[i] / qtab[i]);
                coeff[i] = static_cast<double>(q) * qtab[i];
            }
            idct8x8(coeff, recon);
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x)
                    padded[static_cast<size_t>(by + y) * pw + bx + x] = clamp_u8(std::llround(recon[y * 8 + x]) + 128);
        }
    }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) plane[static_cast<size_t>(y) * w + x] = padded[static_cast<size_t>(y) * pw + x];
}

}  // namespace jpeg_detail

// Compress-decompress cycle at the given quality. Output has the same
// dimensions and channel count as the input; deterministic for equal inputs.
inline RawImage jpeg_roundtrip(const RawImage& image, int quality) {
    image.validate();
    if (quality < 1 || quality > 100)
        throw InvalidQuality("quality must be in [1, 100], got " + std::to_string(quality));

    using namespace jpeg_detail;
    auto luma_q = scaled_table(kLumaBase, quality);
    const int w = image.width, h = image.height;

    if (image.channels == 1) {
        RawImage out = image;
        process_plane(out.pixels, w, h, luma_q);
        return out;
    }

    auto chroma_q = scaled_table(kChromaBase, quality);
    // High-quality encoders drop chroma subsampling; 4:2:0 alone already
    // costs far more than the q=100 quantization budget.
    const bool subsample = quality < 95;

    // RGB -> YCbCr (BT.601 full range), rounded to 8-bit samples.
    std::vector<uint8_t> Y(static_cast<size_t>(w) * h), Cbf(Y.size()), Crf(Y.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double r = image.at(x, y, 0), g = image.at(x, y, 1), b = image.at(x, y, 2);
            size_t i = static_cast<size_t>(y) * w + x;
            Y[i] = clamp_u8(std::llround(0.299 * r + 0.587 * g + 0.114 * b));
            Cbf[i] = clamp_u8(std::llround(128.0 - 0.168735892 * r - 0.331264108 * g + 0.5 * b));
            Crf[i] = clamp_u8(std::llround(128.0 + 0.5 * r - 0.418687589 * g - 0.081312411 * b));
        }
    }

    // 4:2:0 subsampling: 2x2 box average with edge replication.
    int cw = subsample ? (w + 1) / 2 : w;
    int ch = subsample ? (h + 1) / 2 : h;
    std::vector<uint8_t> Cb, Cr;
    if (subsample) {
        Cb.resize(static_cast<size_t>(cw) * ch);
        Cr.resize(Cb.size());
        for (int y = 0; y < ch; ++y) {
            for (int x = 0; x < cw; ++x) {
                int x0 = 2 * x, y0 = 2 * y;
                int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
                auto box = [&](const std::vector<uint8_t>& p) {
                    int sum = p[static_cast<size_t>(y0) * w + x0] + p[static_cast<size_t>(y0) * w + x1] +
                              p[static_cast<size_t>(y1) * w + x0] + p[static_cast<size_t>(y1) * w + x1];
                    return static_cast<uint8_t>((sum + 2) >> 2);
                };
                Cb[static_cast<size_t>(y) * cw + x] = box(Cbf);
                Cr[static_cast<size_t>(y) * cw + x] = box(Crf);
            }
        }
    } else {
        Cb = std::move(Cbf);
        Cr = std::move(Crf);
    }

    process_plane(Y, w, h, luma_q);
    process_plane(Cb, cw, ch, chroma_q);
    process_plane(Cr, cw, ch, chroma_q);

    // Chroma upsampling by replication, then back to RGB.
    RawImage out = make_image(w, h, 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            size_t ci = subsample ? static_cast<size_t>(y / 2) * cw + x / 2 : static_cast<size_t>(y) * cw + x;
            double yy = Y[static_cast<size_t>(y) * w + x];
            double cb = Cb[ci] - 128.0;
            double cr = Cr[ci] - 128.0;
            out.at(x, y, 0) = clamp_u8(std::llround(yy + 1.402 * cr));
            out.at(x, y, 1) = clamp_u8(std::llround(yy - 0.344136286 * cb - 0.714136286 * cr));
            out.at(x, y, 2) = clamp_u8(std::llround(yy + 1.772 * cb));
        }
    }
    return out;
}

}  // namespace sac
