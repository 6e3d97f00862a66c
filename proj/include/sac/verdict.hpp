#pragma once

// Threshold selection from irrelevant-model pools and the stolen/irrelevant
// decision. One threshold serves all suspects within a task; ties at the
// threshold are decided Stolen.

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "sac/common.hpp"

namespace sac {

enum class ThresholdStrategy { worst_irrelevant, validation_mean };

inline std::string threshold_strategy_name(ThresholdStrategy s) {
    return s == ThresholdStrategy::worst_irrelevant ? "worst-irrelevant" : "validation-mean";
}

inline ThresholdStrategy threshold_strategy_from_name(const std::string& s) {
    if (s == "worst-irrelevant") return ThresholdStrategy::worst_irrelevant;
    if (s == "validation-mean") return ThresholdStrategy::validation_mean;
    throw ParseError("unknown threshold strategy '" + s + "'");
}

struct Threshold {
    double value = 0.0;
    ThresholdStrategy strategy = ThresholdStrategy::worst_irrelevant;
    std::vector<std::string> pool;  // names/digests of the fingerprints the value was derived from
};

inline void check_distances(const std::vector<double>& distances, const char* what) {
    if (distances.empty()) throw EmptyPool(std::string(what) + " pool is empty");
    for (double d : distances)
        if (!(d >= 0.0)) throw ParseError(std::string(what) + " pool contains a negative or NaN distance");
}

// Smallest distance observed over the irrelevant pool.
inline Threshold threshold_worst_irrelevant(const std::vector<double>& irrelevant_distances,
                                            std::vector<std::string> pool = {}) {
    check_distances(irrelevant_distances, "irrelevant");
    Threshold t;
    t.value = *std::min_element(irrelevant_distances.begin(), irrelevant_distances.end());
    t.strategy = ThresholdStrategy::worst_irrelevant;
    t.pool = std::move(pool);
    return t;
}

// Midpoint between the irrelevant-pool mean and the adversarial-extraction
// pool mean, the validation-set recipe.
inline Threshold threshold_validation_mean(const std::vector<double>& irrelevant_distances,
                                           const std::vector<double>& adv_extraction_distances,
                                           std::vector<std::string> pool = {}) {
    check_distances(irrelevant_distances, "irrelevant");
    check_distances(adv_extraction_distances, "adversarial-extraction");
    auto mean = [](const std::vector<double>& v) {
        return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    Threshold t;
    t.value = 0.5 * (mean(irrelevant_distances) + mean(adv_extraction_distances));
    t.strategy = ThresholdStrategy::validation_mean;
    t.pool = std::move(pool);
    return t;
}

enum class Decision { stolen, irrelevant };

inline std::string decision_name(Decision d) { return d == Decision::stolen ? "Stolen" : "Irrelevant"; }

struct Verdict {
    std::string suspect;
    double distance = 0.0;
    Threshold threshold;
    Decision decision = Decision::irrelevant;
};

inline Verdict decide(const std::string& suspect, double distance, const Threshold& threshold) {
    Verdict v;
    v.suspect = suspect;
    v.distance = distance;
    v.threshold = threshold;
    v.decision = distance <= threshold.value ? Decision::stolen : Decision::irrelevant;
    return v;
}

// Audit report: probe digest, kernel, threshold provenance, and one row per
// suspect. Replaying the recorded distances reproduces the verdicts.
inline nlohmann::json audit_report(const std::string& probe_digest_hex, const std::string& kernel_name,
                                   const Threshold& threshold, const std::vector<Verdict>& verdicts) {
    nlohmann::json j;
    j["probe_digest"] = probe_digest_hex;
    j["kernel"] = kernel_name;
    j["threshold"] = {{"value", threshold.value},
                      {"strategy", threshold_strategy_name(threshold.strategy)},
                      {"pool", threshold.pool}};
    auto& suspects = j["suspects"] = nlohmann::json::array();
    for (const auto& v : verdicts)
        suspects.push_back({{"name", v.suspect}, {"distance", v.distance}, {"decision", decision_name(v.decision)}});
    return j;
}

}  // namespace sac
