#pragma once

// Verification-model adapter for the zoo: wraps a classifier's penultimate
// embedding behind the binary same/different interface, with the decision
// threshold calibrated to the equal-error rate on held-out pairs.

#include <map>
#include <memory>

#include "sac/fri.hpp"
#include "sac/zoo/dataset.hpp"
#include "sac/zoo/model.hpp"

namespace sac::zoo {

namespace verifier_detail {

// Cosine with the degenerate-embedding convention: both zero -> same,
// one zero -> different. Mirrors the correlation-matrix fallback.
inline double embedding_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 && nb == 0.0) return 1.0;
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

}  // namespace verifier_detail

class EmbeddingVerifier : public Verifier {
public:
    EmbeddingVerifier(std::shared_ptr<const ZooModel> model, double tau)
        : model_(std::move(model)), tau_(tau) {}

    int verify(const RawImage& a, const RawImage& b) override {
        double sim = verifier_detail::embedding_similarity(embed(a), embed(b));
        return sim >= tau_ ? 1 : 0;
    }

    double tau() const { return tau_; }

private:
    const std::vector<double>& embed(const RawImage& img) {
        Digest d = img.digest();
        auto it = cache_.find(d);
        if (it != cache_.end()) return it->second;
        std::vector<double> x;
        x.reserve(img.pixels.size());
        for (uint8_t p : img.pixels) x.push_back(normalize_pixel(p));
        return cache_.emplace(d, model_->embed_one(x)).first->second;
    }

    std::shared_ptr<const ZooModel> model_;
    double tau_;
    std::map<Digest, std::vector<double>> cache_;
};

struct EerCalibration {
    double tau = 0.0;
    double far = 0.0;  // false-accept rate at tau (different pairs scoring >= tau)
    double frr = 0.0;  // false-reject rate at tau (same pairs scoring < tau)
};

// Sweeps candidate thresholds over the observed scores and picks the one
// closest to FAR == FRR (lowest tau on ties).
inline EerCalibration calibrate_eer(const std::vector<double>& same_scores, const std::vector<double>& diff_scores) {
    if (same_scores.empty() || diff_scores.empty())
        throw CalibrationError("EER calibration needs both same-identity and different-identity pairs");
    std::vector<double> candidates = same_scores;
    candidates.insert(candidates.end(), diff_scores.begin(), diff_scores.end());
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    EerCalibration best;
    double best_gap = std::numeric_limits<double>::infinity();
    for (double tau : candidates) {
        size_t fa = 0, fr = 0;
        for (double s : diff_scores)
            if (s >= tau) ++fa;
        for (double s : same_scores)
            if (s < tau) ++fr;
        double far = static_cast<double>(fa) / static_cast<double>(diff_scores.size());
        double frr = static_cast<double>(fr) / static_cast<double>(same_scores.size());
        double gap = std::abs(far - frr);
        if (gap < best_gap) {
            best_gap = gap;
            best = {tau, far, frr};
        }
    }
    return best;
}

// Builds same/different pairs from a labeled calibration set, scores them
// with the model's embedding, and calibrates tau at the EER point.
inline std::shared_ptr<EmbeddingVerifier> verifier_from(std::shared_ptr<const ZooModel> model,
                                                        const ZooDataset& calibration, uint64_t seed,
                                                        size_t pairs_per_side = 200,
                                                        EerCalibration* calibration_out = nullptr) {
    if (calibration.size() < 4) throw CalibrationError("calibration set too small");
    std::vector<double> inputs = normalize_images(calibration.images);
    size_t dim = calibration.images.front().pixels.size();

    std::vector<std::vector<size_t>> by_class(calibration.num_classes);
    for (size_t i = 0; i < calibration.size(); ++i) by_class[calibration.labels[i]].push_back(i);

    std::vector<std::vector<double>> embeds(calibration.size());
    for (size_t i = 0; i < calibration.size(); ++i)
        embeds[i] = model->embed_one({inputs.data() + i * dim, dim});

    Rng rng(mix_seed(seed, "verifier-calibration"));
    std::vector<double> same_scores, diff_scores;
    size_t guard = 0;
    while (same_scores.size() < pairs_per_side && guard++ < pairs_per_side * 50) {
        const auto& members = by_class[rng.index(by_class.size())];
        if (members.size() < 2) continue;
        size_t a = members[rng.index(members.size())];
        size_t b = members[rng.index(members.size())];
        if (a == b) continue;
        same_scores.push_back(verifier_detail::embedding_similarity(embeds[a], embeds[b]));
    }
    guard = 0;
    while (diff_scores.size() < pairs_per_side && guard++ < pairs_per_side * 50) {
        size_t a = rng.index(calibration.size());
        size_t b = rng.index(calibration.size());
        if (calibration.labels[a] == calibration.labels[b]) continue;
        diff_scores.push_back(verifier_detail::embedding_similarity(embeds[a], embeds[b]));
    }
    if (same_scores.empty() || diff_scores.empty())
        throw CalibrationError("could not assemble calibration pairs (degenerate label distribution)");

    EerCalibration cal = calibrate_eer(same_scores, diff_scores);
    if (calibration_out) *calibration_out = cal;
    return std::make_shared<EmbeddingVerifier>(std::move(model), cal.tau);
}

inline std::vector<double> embed_image(const ZooModel& model, const RawImage& img) {
    std::vector<double> x;
    x.reserve(img.pixels.size());
    for (uint8_t p : img.pixels) x.push_back(normalize_pixel(p));
    return model.embed_one(x);
}

// Calibration without a separate labeled set: same-identity pairs come from
// consecutive references within each group, different-identity pairs from
// references of neighbouring groups. Targets are excluded so the probe pairs
// themselves stay out of calibration.
inline std::shared_ptr<EmbeddingVerifier> verifier_from_groups(std::shared_ptr<const ZooModel> model,
                                                               const std::vector<IdentityGroup>& groups,
                                                               EerCalibration* calibration_out = nullptr) {
    std::vector<double> same_scores, diff_scores;
    for (const auto& g : groups)
        for (size_t i = 0; i + 1 < g.references.size(); i += 2)
            same_scores.push_back(verifier_detail::embedding_similarity(embed_image(*model, g.references[i]),
                                                                        embed_image(*model, g.references[i + 1])));
    for (size_t gi = 0; gi < groups.size(); ++gi) {
        const auto& a = groups[gi].references.front();
        const auto& b = groups[(gi + 1) % groups.size()].references.front();
        if (gi + 1 == groups.size() && groups.size() < 2) break;
        diff_scores.push_back(
            verifier_detail::embedding_similarity(embed_image(*model, a), embed_image(*model, b)));
    }
    if (groups.size() < 2) throw CalibrationError("need at least 2 identity groups to calibrate");
    EerCalibration cal = calibrate_eer(same_scores, diff_scores);
    if (calibration_out) *calibration_out = cal;
    return std::make_shared<EmbeddingVerifier>(std::move(model), cal.tau);
}

}  // namespace sac::zoo
