#pragma once

// Independent oracles used by the unit and acceptance suites. Everything
// here is written against the documented formulas, separately from the
// library code paths it checks: plain double loops for matrices and AUC,
// numerical quadrature for the Student-t tail, and central finite
// differences (with ReLU-kink exclusion) for gradients.

#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "sac/correlation.hpp"
#include "sac/metrics.hpp"
#include "sac/rng.hpp"
#include "sac/zoo/train.hpp"

namespace oracle {

// ---- correlation ------------------------------------------------------------

inline double cosine_plain(std::span<const double> a, std::span<const double> b) {
    double dot = 0, na = 0, nb = 0;
    for (size_t k = 0; k < a.size(); ++k) {
        dot += a[k] * b[k];
        na += a[k] * a[k];
        nb += b[k] * b[k];
    }
    if (na == 0.0 && nb == 0.0) return 1.0;
    if (na == 0.0 || nb == 0.0) return 0.0;
    double v = dot / (std::sqrt(na) * std::sqrt(nb));
    return v > 1.0 ? 1.0 : (v < -1.0 ? -1.0 : v);
}

inline double rbf_plain(std::span<const double> a, std::span<const double> b, double bandwidth) {
    double d2 = 0;
    for (size_t k = 0; k < a.size(); ++k) {
        double d = a[k] - b[k];
        d2 += d * d;
    }
    double v = std::exp(-d2 / (2.0 * bandwidth * bandwidth));
    return v < std::numeric_limits<double>::min() ? std::numeric_limits<double>::min() : v;
}

inline double median_bandwidth_plain(const sac::OutputMatrix& m) {
    std::vector<double> d;
    for (size_t i = 0; i < m.rows; ++i)
        for (size_t j = i + 1; j < m.rows; ++j) {
            double d2 = 0;
            for (size_t k = 0; k < m.dims; ++k) {
                double t = m.row(i)[k] - m.row(j)[k];
                d2 += t * t;
            }
            d.push_back(std::sqrt(d2));
        }
    std::sort(d.begin(), d.end());
    double med = d.size() % 2 == 1 ? d[d.size() / 2] : 0.5 * (d[d.size() / 2 - 1] + d[d.size() / 2]);
    return med == 0.0 ? 1.0 : med;
}

// Full double loop over every (i, j); diagonal handled like any other pair
// except for the self-correlation identity.
inline std::vector<double> brute_force_correlation(const sac::OutputMatrix& m, sac::Kernel kernel) {
    double bw = kernel.bandwidth;
    if (kernel.kind == sac::KernelKind::rbf && bw <= 0.0) bw = median_bandwidth_plain(m);
    std::vector<double> c(m.rows * m.rows);
    for (size_t i = 0; i < m.rows; ++i)
        for (size_t j = 0; j < m.rows; ++j) {
            double v;
            if (i == j) v = 1.0;
            else if (kernel.kind == sac::KernelKind::cosine) v = cosine_plain(m.row(i), m.row(j));
            else v = rbf_plain(m.row(i), m.row(j), bw);
            c[i * m.rows + j] = v;
        }
    return c;
}

inline double brute_force_l1_distance(const std::vector<double>& a, const std::vector<double>& b, size_t n) {
    double sum = 0;
    for (size_t i = 0; i < n * n; ++i) sum += std::abs(b[i] - a[i]);
    return sum / (static_cast<double>(n) * static_cast<double>(n));
}

// ---- metrics ----------------------------------------------------------------

inline double brute_force_auc(const sac::ScoredPool& pool) {
    double wins = 0;
    size_t pairs = 0;
    for (const auto& s : pool.entries) {
        if (s.label != sac::PoolLabel::stolen) continue;
        for (const auto& i : pool.entries) {
            if (i.label != sac::PoolLabel::irrelevant) continue;
            ++pairs;
            if (s.score < i.score) wins += 1.0;
            else if (s.score == i.score) wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

inline sac::ConfusionCounts brute_force_confusion(const sac::ScoredPool& pool, double threshold) {
    sac::ConfusionCounts c;
    for (const auto& e : pool.entries) {
        bool pred = e.score <= threshold;
        bool act = e.label == sac::PoolLabel::stolen;
        if (pred && act) ++c.tp;
        if (pred && !act) ++c.fp;
        if (!pred && act) ++c.fn;
        if (!pred && !act) ++c.tn;
    }
    return c;
}

// Student-t two-sided tail by adaptive Simpson quadrature of the density,
// independent of the incomplete-beta route used by the library.
namespace quad_detail {

inline double t_pdf(double x, double df) {
    double log_c = std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) -
                   0.5 * std::log(df * std::numbers::pi);
    return std::exp(log_c - 0.5 * (df + 1.0) * std::log1p(x * x / df));
}

inline double simpson(double a, double b, double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive(double a, double b, double fa, double fm, double fb, double whole, double df, double tol,
                       int depth) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = t_pdf(lm, df), frm = t_pdf(rm, df);
    double left = simpson(a, m, fa, flm, fm);
    double right = simpson(m, b, fm, frm, fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive(a, m, fa, flm, fm, left, df, tol / 2.0, depth - 1) +
           adaptive(m, b, fm, frm, fb, right, df, tol / 2.0, depth - 1);
}

}  // namespace quad_detail

inline double student_t_two_sided_quadrature(double t, double df) {
    double a = 0.0, b = std::abs(t);
    if (b == 0.0) return 1.0;
    double fa = quad_detail::t_pdf(a, df), fb = quad_detail::t_pdf(b, df);
    double fm = quad_detail::t_pdf(0.5 * (a + b), df);
    double body = quad_detail::adaptive(a, b, fa, fm, fb, quad_detail::simpson(a, b, fa, fm, fb), df, 1e-14, 48);
    double p = 1.0 - 2.0 * body;
    return p < 0.0 ? 0.0 : p;
}

inline double welch_p_quadrature(const std::vector<double>& a, const std::vector<double>& b) {
    auto mean = [](const std::vector<double>& v) {
        return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    auto var = [&](const std::vector<double>& v, double m) {
        double s = 0;
        for (double x : v) s += (x - m) * (x - m);
        return s / static_cast<double>(v.size() - 1);
    };
    double m1 = mean(a), m2 = mean(b);
    double v1 = var(a, m1), v2 = var(b, m2);
    double r1 = v1 / a.size(), r2 = v2 / b.size();
    double se2 = r1 + r2;
    double t = (m1 - m2) / std::sqrt(se2);
    double df = se2 * se2 / (r1 * r1 / (a.size() - 1) + r2 * r2 / (b.size() - 1));
    return student_t_two_sided_quadrature(t, df);
}

// ---- random instances -------------------------------------------------------

inline sac::OutputMatrix random_output_matrix(sac::Rng& rng, size_t rows, size_t dims, sac::OutputKind kind,
                                              bool allow_zero_rows = false) {
    sac::OutputMatrix m;
    m.rows = rows;
    m.dims = dims;
    m.kind = kind;
    m.values.resize(rows * dims);
    for (size_t i = 0; i < rows; ++i) {
        if (kind == sac::OutputKind::probability) {
            double sum = 0;
            for (size_t j = 0; j < dims; ++j) {
                double v = std::exp(rng.normal());
                m.values[i * dims + j] = v;
                sum += v;
            }
            for (size_t j = 0; j < dims; ++j) m.values[i * dims + j] /= sum;
        } else if (kind == sac::OutputKind::bitvector) {
            for (size_t j = 0; j < dims; ++j) m.values[i * dims + j] = rng.real() < 0.5 ? 0.0 : 1.0;
        } else {
            bool zero_row = allow_zero_rows && rng.real() < 0.1;
            for (size_t j = 0; j < dims; ++j) m.values[i * dims + j] = zero_row ? 0.0 : rng.normal();
        }
    }
    for (size_t i = 0; i < 32; ++i) m.probe_digest[i] = static_cast<uint8_t>(rng.next() & 0xFF);
    if (kind == sac::OutputKind::bitvector) {
        // guarantee at least one nonzero bit per matrix so validation stays honest
    }
    return m;
}

// ---- gradient checking ------------------------------------------------------

struct GradCheckStats {
    size_t checked = 0;
    size_t skipped = 0;  // coordinates whose FD stencil straddles a ReLU kink
    double max_rel_err = 0.0;
};

inline std::vector<uint8_t> relu_pattern(const sac::zoo::ZooModel& m, const std::vector<double>& x, size_t batch) {
    sac::zoo::ForwardTrace t;
    m.forward_batch(x.data(), batch, t);
    std::vector<uint8_t> pat;
    for (double v : t.conv_pre) pat.push_back(v > 0.0 ? 1 : 0);
    for (size_t li = 0; li + 1 < t.dense_pre.size(); ++li)
        for (double v : t.dense_pre[li]) pat.push_back(v > 0.0 ? 1 : 0);
    return pat;
}

inline double eval_loss(const sac::zoo::ZooModel& m, const std::vector<double>& x, size_t batch,
                        const sac::zoo::BatchLossFn& loss_fn) {
    sac::zoo::ForwardTrace t;
    m.forward_batch(x.data(), batch, t);
    std::vector<double> dl;
    std::vector<size_t> idx(batch);
    std::iota(idx.begin(), idx.end(), 0);
    return loss_fn(idx, t.logits(), batch, static_cast<size_t>(m.arch.num_classes), dl);
}

// Central differences over every weight coordinate, comparing against the
// analytic backward pass. rel = |a - n| / max(1, |a|, |n|).
inline GradCheckStats check_weight_gradients(sac::zoo::ZooModel model, const std::vector<double>& x, size_t batch,
                                             const sac::zoo::BatchLossFn& loss_fn, double h = 1e-5) {
    sac::zoo::ForwardTrace trace;
    model.forward_batch(x.data(), batch, trace);
    std::vector<double> dlogits;
    std::vector<size_t> idx(batch);
    std::iota(idx.begin(), idx.end(), 0);
    loss_fn(idx, trace.logits(), batch, static_cast<size_t>(model.arch.num_classes), dlogits);
    sac::zoo::Gradients g;
    model.backward_batch(trace, dlogits, g, false);

    std::vector<std::pair<std::vector<double>*, const std::vector<double>*>> tensors;
    if (model.stem) {
        tensors.push_back({&model.stem->w, &g.conv_w});
        tensors.push_back({&model.stem->b, &g.conv_b});
    }
    for (size_t li = 0; li < model.dense.size(); ++li) {
        tensors.push_back({&model.dense[li].w, &g.dense_w[li]});
        tensors.push_back({&model.dense[li].b, &g.dense_b[li]});
    }

    GradCheckStats stats;
    for (auto& [weights, grads] : tensors) {
        for (size_t c = 0; c < weights->size(); ++c) {
            double saved = (*weights)[c];
            (*weights)[c] = saved + h;
            double lp = eval_loss(model, x, batch, loss_fn);
            auto patp = relu_pattern(model, x, batch);
            (*weights)[c] = saved - h;
            double lm = eval_loss(model, x, batch, loss_fn);
            auto patm = relu_pattern(model, x, batch);
            (*weights)[c] = saved;
            if (patp != patm) {
                ++stats.skipped;
                continue;
            }
            double numeric = (lp - lm) / (2.0 * h);
            double analytic = (*grads)[c];
            double rel = std::abs(numeric - analytic) / std::max({1.0, std::abs(numeric), std::abs(analytic)});
            stats.max_rel_err = std::max(stats.max_rel_err, rel);
            ++stats.checked;
        }
    }
    return stats;
}

// Same idea for the input gradient that drives the FGSM sign step.
inline GradCheckStats check_input_gradients(const sac::zoo::ZooModel& model, std::vector<double> x, size_t batch,
                                            const std::vector<int>& labels, double h = 1e-5) {
    auto loss_fn = sac::zoo::cross_entropy_loss(labels);
    sac::zoo::ForwardTrace trace;
    model.forward_batch(x.data(), batch, trace);
    std::vector<double> dlogits;
    std::vector<size_t> idx(batch);
    std::iota(idx.begin(), idx.end(), 0);
    loss_fn(idx, trace.logits(), batch, static_cast<size_t>(model.arch.num_classes), dlogits);
    sac::zoo::Gradients g;
    model.backward_batch(trace, dlogits, g, true);

    GradCheckStats stats;
    for (size_t c = 0; c < x.size(); ++c) {
        double saved = x[c];
        x[c] = saved + h;
        double lp = eval_loss(model, x, batch, loss_fn);
        auto patp = relu_pattern(model, x, batch);
        x[c] = saved - h;
        double lm = eval_loss(model, x, batch, loss_fn);
        auto patm = relu_pattern(model, x, batch);
        x[c] = saved;
        if (patp != patm) {
            ++stats.skipped;
            continue;
        }
        double numeric = (lp - lm) / (2.0 * h);
        double analytic = g.input[c];
        double rel = std::abs(numeric - analytic) / std::max({1.0, std::abs(numeric), std::abs(analytic)});
        stats.max_rel_err = std::max(stats.max_rel_err, rel);
        ++stats.checked;
    }
    return stats;
}

}  // namespace oracle
