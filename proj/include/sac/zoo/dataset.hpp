#pragma once

// Desk-scale datasets for the model zoo: a seeded synthetic generator whose
// classes are distinct spatial-frequency patterns, plus a reader for the
// standard CIFAR-10 binary batch format. Defender and attacker splits are
// disjoint and stratified.

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "sac/image.hpp"
#include "sac/rng.hpp"
#include "sac/zoo/model.hpp"

namespace sac::zoo {

struct ZooDataset {
    std::vector<RawImage> images;
    std::vector<int> labels;
    int num_classes = 0;

    size_t size() const { return images.size(); }
};

namespace dataset_detail {

// Class structure: a shared low-frequency base (common knowledge), one
// oriented sinusoid pair per class, and per-sample cue competition. Every
// contested sample superimposes a second class's template at a strength
// drawn near the decision point, so the label depends on how a model
// weighs the two cues. That weighting is what a training run makes its
// own, what stolen copies inherit, and what label queries leak to
// extraction students. Pixel noise stays small so the competition, not
// high-dimensional interpolation, decides hard samples.
inline constexpr double kAmplitudeBase = 26.0;
inline constexpr double kAmplitudeMain = 30.0;
inline constexpr double kAmplitudeSecond = 15.0;
inline constexpr double kNoiseSigma = 20.0;
inline constexpr double kContestedFraction = 0.45;
inline constexpr double kContestedLow = 0.55;   // competitor strength range; > 1 outguns the true class
inline constexpr double kContestedHigh = 1.05;
inline constexpr double kCleanClutterHigh = 0.30;

inline double shared_base(int x, int y, int c, int size) {
    double u = (x * 0.9394 + y * 0.3429) / size;  // fixed oblique direction
    return kAmplitudeBase * std::sin(2.0 * std::numbers::pi * 1.0 * u + 2.0 * std::numbers::pi * 0.29 * c);
}

inline double class_template(int cls, int num_classes, int x, int y, int c, int size) {
    double theta = std::numbers::pi * cls / num_classes;
    double f1 = 2.0 + static_cast<double>(cls % 4);
    double f2 = 3.0 + static_cast<double>((cls * 2 + 1) % 5);
    double u = (x * std::cos(theta) + y * std::sin(theta)) / size;
    double v = (x * std::sin(theta) - y * std::cos(theta)) / size;
    double phase1 = 2.0 * std::numbers::pi * (0.17 * cls + 0.31 * c);
    double phase2 = 2.0 * std::numbers::pi * (0.07 * cls + 0.13 * c);
    return kAmplitudeMain * std::sin(2.0 * std::numbers::pi * f1 * u + phase1) +
           kAmplitudeSecond * std::sin(2.0 * std::numbers::pi * f2 * v + phase2);
}

}  // namespace dataset_detail

// Deterministic in (seed, K, per_class, size): each sample draws from its own
// stream keyed by (class, index), so datasets are reproducible element-wise.
// The shift jitter stays small relative to the template wavelengths so the
// classes remain linearly separable in pixel space.
// template_classes widens the template family beyond the labels actually
// generated and template_offset picks which family members the labels map
// to; a transfer task over later members of a larger family is the
// related-task analog of moving to fresh classes from the same domain.
inline ZooDataset gen_synthetic(uint64_t seed, int num_classes, int per_class, int size = 32,
                                int template_classes = 0, int template_offset = 0) {
    if (num_classes < 2) throw ParseError("synthetic dataset needs at least 2 classes");
    if (template_classes < template_offset + num_classes) template_classes = template_offset + num_classes;
    ZooDataset ds;
    ds.num_classes = num_classes;
    ds.images.reserve(static_cast<size_t>(num_classes) * per_class);
    const int jitter = std::max(2, size / 16 + 1);
    for (int cls = 0; cls < num_classes; ++cls) {
        for (int i = 0; i < per_class; ++i) {
            Rng rng(mix_seed(seed, (static_cast<uint64_t>(cls) << 32) | static_cast<uint64_t>(i)));
            int dx = static_cast<int>(rng.index(jitter));
            int dy = static_cast<int>(rng.index(jitter));
            bool contested = rng.real() < dataset_detail::kContestedFraction;
            int competitor = static_cast<int>((cls + 1 + rng.index(num_classes - 1)) % num_classes);
            double strength = contested
                                  ? rng.uniform(dataset_detail::kContestedLow, dataset_detail::kContestedHigh)
                                  : rng.uniform(0.0, dataset_detail::kCleanClutterHigh);
            int cls_t = cls + template_offset, competitor_t = competitor + template_offset;
            RawImage img = make_image(size, size, 3);
            for (int y = 0; y < size; ++y) {
                for (int x = 0; x < size; ++x) {
                    int sx = (x + dx) % size, sy = (y + dy) % size;
                    for (int c = 0; c < 3; ++c) {
                        double t = dataset_detail::class_template(cls_t, template_classes, sx, sy, c, size) +
                                   strength *
                                       dataset_detail::class_template(competitor_t, template_classes, sx, sy, c, size);
                        double v = 128.0 + dataset_detail::shared_base(sx, sy, c, size) + t +
                                   rng.normal(0.0, dataset_detail::kNoiseSigma);
                        img.at(x, y, c) = static_cast<uint8_t>(std::clamp(std::llround(v), 0ll, 255ll));
                    }
                }
            }
            ds.images.push_back(std::move(img));
            ds.labels.push_back(cls);
        }
    }
    return ds;
}

// Stratified disjoint halves; every class appears in both splits.
inline std::pair<ZooDataset, ZooDataset> split_defender_attacker(const ZooDataset& full, uint64_t seed) {
    ZooDataset defender, attacker;
    defender.num_classes = attacker.num_classes = full.num_classes;
    for (int cls = 0; cls < full.num_classes; ++cls) {
        std::vector<size_t> idx;
        for (size_t i = 0; i < full.size(); ++i)
            if (full.labels[i] == cls) idx.push_back(i);
        if (idx.size() < 2) throw ParseError("class " + std::to_string(cls) + " has fewer than 2 samples");
        Rng rng(mix_seed(seed, "split-class-" + std::to_string(cls)));
        rng.shuffle(idx);
        size_t half = idx.size() / 2;
        for (size_t k = 0; k < idx.size(); ++k) {
            auto& side = k < half ? defender : attacker;
            side.images.push_back(full.images[idx[k]]);
            side.labels.push_back(cls);
        }
    }
    return {std::move(defender), std::move(attacker)};
}

// CIFAR-10 binary batches: 3073-byte records, label byte then 32x32 planes
// in R, G, B order. Converted to interleaved RawImage.
inline ZooDataset load_cifar10_binary(const std::filesystem::path& path, size_t max_records = 0) {
    auto bytes = read_file(path);
    constexpr size_t kRecord = 3073;
    if (bytes.empty() || bytes.size() % kRecord != 0)
        throw ParseError("CIFAR-10 batch size " + std::to_string(bytes.size()) + " is not a multiple of 3073");
    size_t records = bytes.size() / kRecord;
    if (max_records > 0) records = std::min(records, max_records);
    ZooDataset ds;
    ds.num_classes = 10;
    for (size_t r = 0; r < records; ++r) {
        const uint8_t* rec = bytes.data() + r * kRecord;
        int label = rec[0];
        if (label > 9) throw ParseError("CIFAR-10 label out of range in record " + std::to_string(r));
        RawImage img = make_image(32, 32, 3);
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                for (int c = 0; c < 3; ++c)
                    img.at(x, y, c) = rec[1 + c * 1024 + y * 32 + x];
        ds.images.push_back(std::move(img));
        ds.labels.push_back(label);
    }
    return ds;
}

// Flattens images to [0,1] doubles, row-major interleaved, one row per image.
inline std::vector<double> normalize_images(const std::vector<RawImage>& images) {
    if (images.empty()) return {};
    size_t dim = images.front().pixels.size();
    std::vector<double> out;
    out.reserve(images.size() * dim);
    for (const auto& img : images) {
        if (img.pixels.size() != dim) throw ShapeMismatch("images in a batch must share dimensions");
        for (uint8_t p : img.pixels) out.push_back(normalize_pixel(p));
    }
    return out;
}

}  // namespace sac::zoo
