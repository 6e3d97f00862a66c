#pragma once

// Detection-quality metrics over a labeled pool of suspect scores: AUC-ROC
// (Mann-Whitney, low distance = stolen), the two-sided Welch t-test p-value,
// and F1 at a fixed threshold.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sac/common.hpp"

namespace sac {

enum class PoolLabel { stolen, irrelevant };

inline std::string pool_label_name(PoolLabel l) { return l == PoolLabel::stolen ? "stolen" : "irrelevant"; }

inline PoolLabel pool_label_from_name(const std::string& s) {
    if (s == "stolen") return PoolLabel::stolen;
    if (s == "irrelevant") return PoolLabel::irrelevant;
    throw ParseError("unknown label '" + s + "' (expected stolen|irrelevant)");
}

struct ScoredEntry {
    std::string name;
    double score = 0.0;
    PoolLabel label = PoolLabel::irrelevant;
};

struct ScoredPool {
    std::vector<ScoredEntry> entries;

    void check_finite() const {
        for (const auto& e : entries)
            if (!std::isfinite(e.score)) throw ParseError("score for '" + e.name + "' is not finite");
    }
};

// Probability that a random stolen entry scores strictly lower than a random
// irrelevant entry, ties counted half. Computed with average ranks; equals
// the pairwise count exactly since ranks are halves of integers.
inline double auc_roc(const ScoredPool& pool) {
    pool.check_finite();
    size_t n_stolen = 0, n_irrelevant = 0;
    for (const auto& e : pool.entries) (e.label == PoolLabel::stolen ? n_stolen : n_irrelevant)++;
    if (n_stolen == 0 || n_irrelevant == 0)
        throw SingleClass("AUC needs at least one stolen and one irrelevant entry");

    std::vector<size_t> order(pool.entries.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return pool.entries[a].score < pool.entries[b].score; });

    std::vector<double> rank(pool.entries.size());
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        while (j + 1 < order.size() && pool.entries[order[j + 1]].score == pool.entries[order[i]].score) ++j;
        double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        i = j + 1;
    }

    double rank_sum_stolen = 0;
    for (size_t k = 0; k < pool.entries.size(); ++k)
        if (pool.entries[k].label == PoolLabel::stolen) rank_sum_stolen += rank[k];

    double ns = static_cast<double>(n_stolen), ni = static_cast<double>(n_irrelevant);
    double u_greater = rank_sum_stolen - ns * (ns + 1.0) / 2.0;  // stolen-above-irrelevant pairs (+ half ties)
    return (ns * ni - u_greater) / (ns * ni);
}

namespace stats_detail {

// Regularized incomplete beta I_x(a, b) via the Lentz continued fraction.
inline double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 500;
    constexpr double kEps = 1e-15;
    constexpr double kTiny = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) return h;
    }
    return h;  // converged to working precision in practice well before kMaxIter
}

inline double betai(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    double bt = std::exp(ln_bt);
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

// Two-sided tail of the Student-t distribution, P(|T_df| >= t).
inline double student_t_two_sided(double t, double df) {
    return betai(0.5 * df, 0.5, df / (df + t * t));
}

struct SampleSummary {
    size_t n = 0;
    double mean = 0.0;
    double var = 0.0;  // unbiased (n-1 denominator)
};

inline SampleSummary summarize(const std::vector<double>& xs) {
    SampleSummary s;
    s.n = xs.size();
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(s.n);
    for (double x : xs) s.var += (x - s.mean) * (x - s.mean);
    s.var /= static_cast<double>(s.n - 1);
    return s;
}

}  // namespace stats_detail

// Welch's unequal-variance t-test, two-sided, with Welch-Satterthwaite
// degrees of freedom. Suspect group = stolen-labeled entries.
inline double welch_t_test_p(const std::vector<double>& suspect, const std::vector<double>& irrelevant) {
    if (suspect.size() < 2 || irrelevant.size() < 2)
        throw InsufficientSamples("Welch t-test needs at least 2 samples per group");
    auto s1 = stats_detail::summarize(suspect);
    auto s2 = stats_detail::summarize(irrelevant);
    double se2 = s1.var / static_cast<double>(s1.n) + s2.var / static_cast<double>(s2.n);
    if (se2 == 0.0) {
        // Both samples constant: equal means is the defined degenerate case.
        return s1.mean == s2.mean ? 1.0 : std::numeric_limits<double>::min();
    }
    double t = (s1.mean - s2.mean) / std::sqrt(se2);
    double r1 = s1.var / static_cast<double>(s1.n), r2 = s2.var / static_cast<double>(s2.n);
    double df = se2 * se2 /
                (r1 * r1 / static_cast<double>(s1.n - 1) + r2 * r2 / static_cast<double>(s2.n - 1));
    double p = stats_detail::student_t_two_sided(t, df);
    return std::clamp(p, std::numeric_limits<double>::min(), 1.0);
}

inline double t_test_p(const ScoredPool& pool) {
    pool.check_finite();
    std::vector<double> suspect, irrelevant;
    for (const auto& e : pool.entries)
        (e.label == PoolLabel::stolen ? suspect : irrelevant).push_back(e.score);
    return welch_t_test_p(suspect, irrelevant);
}

struct ConfusionCounts {
    size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

struct F1Result {
    double f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    ConfusionCounts counts;
};

// Positive class = stolen; predicted positive iff score <= threshold.
inline F1Result f1_at_threshold(const ScoredPool& pool, double threshold) {
    pool.check_finite();
    F1Result r;
    for (const auto& e : pool.entries) {
        bool predicted = e.score <= threshold;
        bool actual = e.label == PoolLabel::stolen;
        if (predicted && actual) ++r.counts.tp;
        else if (predicted && !actual) ++r.counts.fp;
        else if (!predicted && actual) ++r.counts.fn;
        else ++r.counts.tn;
    }
    r.precision = r.counts.tp + r.counts.fp == 0
                      ? 0.0
                      : static_cast<double>(r.counts.tp) / static_cast<double>(r.counts.tp + r.counts.fp);
    r.recall = r.counts.tp + r.counts.fn == 0
                   ? 0.0
                   : static_cast<double>(r.counts.tp) / static_cast<double>(r.counts.tp + r.counts.fn);
    r.f1 = r.precision + r.recall == 0.0 ? 0.0 : 2.0 * r.precision * r.recall / (r.precision + r.recall);
    return r;
}

struct EvalReport {
    double auc = 0.0;
    double p_value = 1.0;
    bool has_f1 = false;
    double f1 = 0.0;
    double threshold_used = 0.0;
    ConfusionCounts counts;

    nlohmann::json to_json() const {
        nlohmann::json j{{"auc", auc}, {"p_value", p_value}};
        if (has_f1) {
            j["f1"] = f1;
            j["threshold_used"] = threshold_used;
            j["counts"] = {{"tp", counts.tp}, {"fp", counts.fp}, {"tn", counts.tn}, {"fn", counts.fn}};
        }
        return j;
    }
};

inline EvalReport evaluate_pool(const ScoredPool& pool, const double* threshold = nullptr) {
    EvalReport r;
    r.auc = auc_roc(pool);
    r.p_value = t_test_p(pool);
    if (threshold) {
        auto f = f1_at_threshold(pool, *threshold);
        r.has_f1 = true;
        r.f1 = f.f1;
        r.threshold_used = *threshold;
        r.counts = f.counts;
    }
    return r;
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_scores_csv(const ScoredPool& pool, const std::filesystem::path& path) {
    std::string out = "name,score,label\n";
    for (const auto& e : pool.entries)
        out += e.name + "," + format_double(e.score) + "," + pool_label_name(e.label) + "\n";
    write_file(path, out);
}

inline ScoredPool read_scores_csv(const std::filesystem::path& path) {
    auto bytes = read_file(path);
    std::string text(bytes.begin(), bytes.end());
    std::istringstream in(text);
    ScoredPool pool;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (lineno == 1 && line == "name,score,label") continue;
        auto c1 = line.find(',');
        auto c2 = line.rfind(',');
        if (c1 == std::string::npos || c2 == c1)
            throw ParseError("bad scores row at line " + std::to_string(lineno));
        ScoredEntry e;
        e.name = line.substr(0, c1);
        try {
            e.score = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
        } catch (const std::exception&) {
            throw ParseError("bad score at line " + std::to_string(lineno));
        }
        e.label = pool_label_from_name(line.substr(c2 + 1));
        pool.entries.push_back(std::move(e));
    }
    return pool;
}

}  // namespace sac
