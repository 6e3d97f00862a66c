#pragma once

// Deterministic SGD training for zoo models: cross-entropy, the soft-label
// distillation objective, and FGSM-based adversarial fine-tuning. Fixed
// seeds give bit-identical weights; shuffles and init come from the
// toolkit's own RNG streams.

#include <functional>
#include <span>
#include <vector>

#include "sac/zoo/model.hpp"

namespace sac::zoo {

struct TrainConfig {
    int epochs = 15;
    int batch_size = 50;
    double learning_rate = 0.1;
    double momentum = 0.9;
    uint64_t seed = 0;

    void validate() const {
        if (epochs < 0 || batch_size < 1 || learning_rate < 0.0 || momentum < 0.0 || momentum >= 1.0)
            throw ParseError("bad training hyperparameters");
    }
};

enum class TrainScope { all, last };

namespace train_detail {

struct Velocity {
    std::vector<double> conv_w, conv_b;
    std::vector<std::vector<double>> dense_w, dense_b;

    explicit Velocity(const ZooModel& m) {
        if (m.stem) {
            conv_w.assign(m.stem->w.size(), 0.0);
            conv_b.assign(m.stem->b.size(), 0.0);
        }
        for (const auto& l : m.dense) {
            dense_w.emplace_back(l.w.size(), 0.0);
            dense_b.emplace_back(l.b.size(), 0.0);
        }
    }
};

inline void sgd_step(ZooModel& m, const Gradients& g, Velocity& vel, double lr, double mu, double inv_batch,
                     TrainScope scope) {
    auto apply = [&](std::vector<double>& w, const std::vector<double>& grad, std::vector<double>& v) {
        for (size_t i = 0; i < w.size(); ++i) {
            v[i] = mu * v[i] - lr * grad[i] * inv_batch;
            w[i] += v[i];
        }
    };
    size_t first = scope == TrainScope::last ? m.dense.size() - 1 : 0;
    if (scope == TrainScope::all && m.stem) {
        apply(m.stem->w, g.conv_w, vel.conv_w);
        apply(m.stem->b, g.conv_b, vel.conv_b);
    }
    for (size_t li = first; li < m.dense.size(); ++li) {
        apply(m.dense[li].w, g.dense_w[li], vel.dense_w[li]);
        apply(m.dense[li].b, g.dense_b[li], vel.dense_b[li]);
    }
}

}  // namespace train_detail

// Fills dlogits with d(summed batch loss)/d(logits) and returns the summed
// loss. `idx` holds the dataset row of each batch element.
using BatchLossFn = std::function<double(std::span<const size_t> idx, const std::vector<double>& logits,
                                         size_t batch, size_t classes, std::vector<double>& dlogits)>;

inline BatchLossFn cross_entropy_loss(const std::vector<int>& labels) {
    return [&labels](std::span<const size_t> idx, const std::vector<double>& logits, size_t batch, size_t classes,
                     std::vector<double>& dlogits) {
        dlogits.assign(batch * classes, 0.0);
        std::vector<double> p(classes);
        double loss = 0;
        for (size_t s = 0; s < batch; ++s) {
            std::span<const double> z(logits.data() + s * classes, classes);
            nn_detail::softmax_row(z, p);
            int y = labels[idx[s]];
            loss -= std::log(std::max(p[y], 1e-300));
            for (size_t j = 0; j < classes; ++j) dlogits[s * classes + j] = p[j] - (static_cast<int>(j) == y ? 1.0 : 0.0);
        }
        return loss;
    };
}

// Soft targets from a teacher, precomputed once: tempered probabilities
// softmax(z/T) and argmax labels.
struct SoftTargets {
    size_t classes = 0;
    double temperature = 1.0;
    std::vector<double> probs_t;  // n x classes, teacher softmax at T
    std::vector<int> labels;      // teacher argmax (T=1 argmax equals any-T argmax)
};

inline SoftTargets soft_targets_from(const ZooModel& teacher, const std::vector<double>& inputs, size_t count,
                                     double temperature) {
    size_t dim = static_cast<size_t>(teacher.arch.input_dim());
    size_t classes = static_cast<size_t>(teacher.arch.num_classes);
    SoftTargets t;
    t.classes = classes;
    t.temperature = temperature;
    t.probs_t.resize(count * classes);
    t.labels.resize(count);
    std::vector<double> scaled(classes);
    for (size_t i = 0; i < count; ++i) {
        auto z = teacher.logits_one({inputs.data() + i * dim, dim});
        t.labels[i] = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
        for (size_t j = 0; j < classes; ++j) scaled[j] = z[j] / temperature;
        nn_detail::softmax_row(scaled, {t.probs_t.data() + i * classes, classes});
    }
    return t;
}

// alpha * T^2 * KL(student_T || teacher_T) + (1 - alpha) * CE(student, teacher argmax).
// The T^2 factor is the standard distillation scaling that keeps the tempered
// gradient comparable to the CE term; without it the KL part vanishes at T=20.
inline BatchLossFn distillation_loss(const SoftTargets& targets, double alpha) {
    return [&targets, alpha](std::span<const size_t> idx, const std::vector<double>& logits, size_t batch,
                             size_t classes, std::vector<double>& dlogits) {
        double T = targets.temperature;
        dlogits.assign(batch * classes, 0.0);
        std::vector<double> ps(classes), ps_t(classes), scaled(classes), gap(classes);
        double loss = 0;
        for (size_t s = 0; s < batch; ++s) {
            std::span<const double> z(logits.data() + s * classes, classes);
            const double* pt = targets.probs_t.data() + idx[s] * classes;
            int y = targets.labels[idx[s]];

            for (size_t j = 0; j < classes; ++j) scaled[j] = z[j] / T;
            nn_detail::softmax_row(scaled, ps_t);
            double kl = 0;
            for (size_t j = 0; j < classes; ++j) {
                gap[j] = std::log(std::max(ps_t[j], 1e-300)) - std::log(std::max(pt[j], 1e-300));
                kl += ps_t[j] * gap[j];
            }

            nn_detail::softmax_row(z, ps);
            double ce = -std::log(std::max(ps[y], 1e-300));
            loss += alpha * T * T * kl + (1.0 - alpha) * ce;

            for (size_t j = 0; j < classes; ++j) {
                double d_kl = T * ps_t[j] * (gap[j] - kl);  // T^2 * (1/T) chain factor
                double d_ce = ps[j] - (static_cast<int>(j) == y ? 1.0 : 0.0);
                dlogits[s * classes + j] = alpha * d_kl + (1.0 - alpha) * d_ce;
            }
        }
        return loss;
    };
}

// One optimization pass over the dataset; returns the mean per-sample loss.
inline double train_epoch(ZooModel& m, const std::vector<double>& inputs, size_t count, const BatchLossFn& loss_fn,
                          const TrainConfig& cfg, Rng& shuffle_rng, train_detail::Velocity& vel, TrainScope scope) {
    size_t dim = static_cast<size_t>(m.arch.input_dim());
    size_t classes = static_cast<size_t>(m.arch.num_classes);
    std::vector<size_t> order(count);
    for (size_t i = 0; i < count; ++i) order[i] = i;
    shuffle_rng.shuffle(order);

    std::vector<double> batch_x;
    std::vector<double> dlogits;
    ForwardTrace trace;
    Gradients grads;
    double total_loss = 0;

    for (size_t start = 0; start < count; start += cfg.batch_size) {
        size_t b = std::min<size_t>(cfg.batch_size, count - start);
        std::span<const size_t> idx(order.data() + start, b);
        batch_x.resize(b * dim);
        for (size_t s = 0; s < b; ++s)
            std::copy_n(inputs.data() + idx[s] * dim, dim, batch_x.data() + s * dim);

        m.forward_batch(batch_x.data(), b, trace);
        double batch_loss = loss_fn(idx, trace.logits(), b, classes, dlogits);
        if (!std::isfinite(batch_loss)) throw TrainingDiverged("loss is not finite");
        total_loss += batch_loss;

        m.backward_batch(trace, dlogits, grads, false);
        train_detail::sgd_step(m, grads, vel, cfg.learning_rate, cfg.momentum, 1.0 / static_cast<double>(b), scope);
    }
    return total_loss / static_cast<double>(count);
}

inline double mean_loss(const ZooModel& m, const std::vector<double>& inputs, size_t count,
                        const BatchLossFn& loss_fn, size_t batch_size = 200) {
    size_t dim = static_cast<size_t>(m.arch.input_dim());
    size_t classes = static_cast<size_t>(m.arch.num_classes);
    std::vector<size_t> order(count);
    for (size_t i = 0; i < count; ++i) order[i] = i;
    ForwardTrace trace;
    std::vector<double> batch_x, dlogits;
    double total = 0;
    for (size_t start = 0; start < count; start += batch_size) {
        size_t b = std::min(batch_size, count - start);
        batch_x.assign(inputs.begin() + start * dim, inputs.begin() + (start + b) * dim);
        m.forward_batch(batch_x.data(), b, trace);
        total += loss_fn(std::span<const size_t>(order.data() + start, b), trace.logits(), b, classes, dlogits);
    }
    return total / static_cast<double>(count);
}

// Generic fit: repeated epochs with divergence checks. Loss history (mean
// loss per epoch, after the update pass) lands in `history` when given.
inline void fit(ZooModel& m, const std::vector<double>& inputs, size_t count, const BatchLossFn& loss_fn,
                const TrainConfig& cfg, TrainScope scope = TrainScope::all, std::vector<double>* history = nullptr) {
    cfg.validate();
    Rng shuffle_rng(mix_seed(cfg.seed, "epoch-shuffle"));
    train_detail::Velocity vel(m);
    for (int e = 0; e < cfg.epochs; ++e) {
        double loss = train_epoch(m, inputs, count, loss_fn, cfg, shuffle_rng, vel, scope);
        if (history) history->push_back(loss);
    }
    m.check_finite();
}

inline ZooModel train_classifier(const Arch& arch, const std::vector<double>& inputs, const std::vector<int>& labels,
                                 const TrainConfig& cfg, Lineage lineage,
                                 std::vector<double>* history = nullptr) {
    ZooModel m = init_model(arch, cfg.seed);
    m.lineage = std::move(lineage);
    fit(m, inputs, labels.size(), cross_entropy_loss(labels), cfg, TrainScope::all, history);
    return m;
}

inline double accuracy(const ZooModel& m, const std::vector<double>& inputs, const std::vector<int>& labels) {
    size_t dim = static_cast<size_t>(m.arch.input_dim());
    size_t classes = static_cast<size_t>(m.arch.num_classes);
    size_t correct = 0;
    constexpr size_t kBatch = 256;
    ForwardTrace trace;
    std::vector<double> batch_x;
    for (size_t start = 0; start < labels.size(); start += kBatch) {
        size_t b = std::min(kBatch, labels.size() - start);
        batch_x.assign(inputs.begin() + start * dim, inputs.begin() + (start + b) * dim);
        m.forward_batch(batch_x.data(), b, trace);
        const auto& z = trace.logits();
        for (size_t s = 0; s < b; ++s) {
            auto row = z.begin() + s * classes;
            size_t pred = std::max_element(row, row + classes) - row;
            if (static_cast<int>(pred) == labels[start + s]) ++correct;
        }
    }
    return labels.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(labels.size());
}

// FGSM: single sign step of size eps on the summed cross-entropy, clamped
// back to the valid input box; |delta|_inf <= eps by construction.
inline std::vector<double> fgsm_examples(const ZooModel& m, const std::vector<double>& batch_x, size_t batch,
                                         const std::vector<int>& batch_labels, double eps) {
    size_t dim = static_cast<size_t>(m.arch.input_dim());
    size_t classes = static_cast<size_t>(m.arch.num_classes);
    ForwardTrace trace;
    m.forward_batch(batch_x.data(), batch, trace);
    std::vector<double> dlogits(batch * classes, 0.0);
    std::vector<double> p(classes);
    for (size_t s = 0; s < batch; ++s) {
        std::span<const double> z(trace.logits().data() + s * classes, classes);
        nn_detail::softmax_row(z, p);
        for (size_t j = 0; j < classes; ++j)
            dlogits[s * classes + j] = p[j] - (static_cast<int>(j) == batch_labels[s] ? 1.0 : 0.0);
    }
    Gradients g;
    m.backward_batch(trace, dlogits, g, true);
    std::vector<double> adv(batch * dim);
    for (size_t i = 0; i < adv.size(); ++i) {
        double sign = g.input[i] > 0.0 ? 1.0 : (g.input[i] < 0.0 ? -1.0 : 0.0);
        adv[i] = std::clamp(batch_x[i] + eps * sign, kInputMin, kInputMax);
    }
    return adv;
}

// Adversarial fine-tuning: each step trains on FGSM examples crafted against
// the current weights, optionally blended 1:1 with the clean batch.
inline void adv_finetune(ZooModel& m, const std::vector<double>& inputs, const std::vector<int>& labels, double eps,
                         const TrainConfig& cfg, bool mix_clean, std::vector<double>* history = nullptr) {
    cfg.validate();
    size_t dim = static_cast<size_t>(m.arch.input_dim());
    size_t classes = static_cast<size_t>(m.arch.num_classes);
    size_t count = labels.size();
    Rng shuffle_rng(mix_seed(cfg.seed, "epoch-shuffle"));
    train_detail::Velocity vel(m);

    std::vector<size_t> order(count);
    ForwardTrace trace;
    Gradients grads;
    std::vector<double> batch_x, step_x, dlogits;
    std::vector<int> batch_y;

    for (int e = 0; e < cfg.epochs; ++e) {
        for (size_t i = 0; i < count; ++i) order[i] = i;
        shuffle_rng.shuffle(order);
        double total_loss = 0;
        for (size_t start = 0; start < count; start += cfg.batch_size) {
            size_t b = std::min<size_t>(cfg.batch_size, count - start);
            batch_x.resize(b * dim);
            batch_y.resize(b);
            for (size_t s = 0; s < b; ++s) {
                std::copy_n(inputs.data() + order[start + s] * dim, dim, batch_x.data() + s * dim);
                batch_y[s] = labels[order[start + s]];
            }
            std::vector<double> adv = fgsm_examples(m, batch_x, b, batch_y, eps);

            size_t step_n = mix_clean ? 2 * b : b;
            std::vector<int> step_y;
            if (mix_clean) {
                step_x = batch_x;
                step_x.insert(step_x.end(), adv.begin(), adv.end());
                step_y = batch_y;
                step_y.insert(step_y.end(), batch_y.begin(), batch_y.end());
            } else {
                step_x = std::move(adv);
                step_y = batch_y;
            }

            m.forward_batch(step_x.data(), step_n, trace);
            dlogits.assign(step_n * classes, 0.0);
            std::vector<double> p(classes);
            double loss = 0;
            for (size_t s = 0; s < step_n; ++s) {
                std::span<const double> z(trace.logits().data() + s * classes, classes);
                nn_detail::softmax_row(z, p);
                loss -= std::log(std::max(p[step_y[s]], 1e-300));
                for (size_t j = 0; j < classes; ++j)
                    dlogits[s * classes + j] = p[j] - (static_cast<int>(j) == step_y[s] ? 1.0 : 0.0);
            }
            if (!std::isfinite(loss)) throw TrainingDiverged("loss is not finite");
            total_loss += loss;
            m.backward_batch(trace, dlogits, grads, false);
            train_detail::sgd_step(m, grads, vel, cfg.learning_rate, cfg.momentum,
                                   1.0 / static_cast<double>(step_n), TrainScope::all);
        }
        if (history) history->push_back(total_loss / static_cast<double>(mix_clean ? 2 * count : count));
    }
    m.check_finite();
}

}  // namespace sac::zoo
