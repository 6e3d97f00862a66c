#pragma once

// The model-stealing attack families the zoo evaluates against: fine-tuning
// (all/last), activation-based pruning, label/probability/adversarial model
// extraction, adversarial training, distillation, and transfer to a new
// label space. Every attack records lineage and stays deterministic.

#include <algorithm>
#include <numeric>

#include "sac/zoo/train.hpp"

namespace sac::zoo {

inline ZooModel finetune(const ZooModel& source, const std::vector<double>& inputs, const std::vector<int>& labels,
                         TrainScope scope, const TrainConfig& cfg, std::vector<double>* history = nullptr) {
    ZooModel m = source;
    m.train_seed = cfg.seed;
    m.lineage.kind = scope == TrainScope::all ? "finetune_all" : "finetune_last";
    m.lineage.params = {{"epochs", cfg.epochs}, {"learning_rate", cfg.learning_rate}, {"seed", cfg.seed}};
    fit(m, inputs, labels.size(), cross_entropy_loss(labels), cfg, scope, history);
    return m;
}

namespace prune_detail {

struct UnitScore {
    double mean_abs = 0.0;
    size_t unit = 0;
};

// Lowest-k selection with stable index tie-breaking, so re-pruning an
// already pruned model picks the same units.
inline std::vector<size_t> lowest_units(std::vector<UnitScore>& scores, size_t k) {
    std::stable_sort(scores.begin(), scores.end(), [](const UnitScore& a, const UnitScore& b) {
        if (a.mean_abs != b.mean_abs) return a.mean_abs < b.mean_abs;
        return a.unit < b.unit;
    });
    std::vector<size_t> picked;
    for (size_t i = 0; i < k && i < scores.size(); ++i) picked.push_back(scores[i].unit);
    return picked;
}

}  // namespace prune_detail

// Fine-pruning: rank hidden units by mean absolute activation over the
// holdout set, then zero the incoming and outgoing weights of the lowest
// p fraction (per hidden layer, floored; conv channels count as units).
inline ZooModel prune(const ZooModel& source, const std::vector<double>& holdout_inputs, size_t holdout_count,
                      double p) {
    if (!(p > 0.0 && p < 1.0)) throw InvalidFraction("prune fraction must lie in (0,1), got " + std::to_string(p));
    ZooModel m = source;
    m.lineage.kind = "pruned";
    m.lineage.params = {{"p", p}};

    size_t dim = static_cast<size_t>(m.arch.input_dim());
    constexpr size_t kBatch = 128;

    // Accumulate mean |activation| for the conv stem channels and for every
    // hidden dense layer output.
    size_t stem_units = m.stem ? static_cast<size_t>(m.stem->out_c) : 0;
    std::vector<double> stem_acc(stem_units, 0.0);
    std::vector<std::vector<double>> dense_acc;
    for (size_t li = 0; li + 1 < m.dense.size(); ++li) dense_acc.emplace_back(m.dense[li].out, 0.0);

    ForwardTrace trace;
    std::vector<double> batch_x;
    for (size_t start = 0; start < holdout_count; start += kBatch) {
        size_t b = std::min(kBatch, holdout_count - start);
        batch_x.assign(holdout_inputs.begin() + start * dim, holdout_inputs.begin() + (start + b) * dim);
        m.forward_batch(batch_x.data(), b, trace);
        if (m.stem) {
            int spatial = m.stem->out_w() * m.stem->out_h();
            for (size_t s = 0; s < b; ++s)
                for (size_t f = 0; f < stem_units; ++f)
                    for (int i = 0; i < spatial; ++i) {
                        double v = trace.conv_pre[(s * stem_units + f) * spatial + i];
                        stem_acc[f] += std::abs(std::max(0.0, v)) / spatial;
                    }
        }
        for (size_t li = 0; li + 1 < m.dense.size(); ++li) {
            const auto& act = trace.dense_in[li + 1];  // post-ReLU output of layer li
            size_t width = m.dense[li].out;
            for (size_t s = 0; s < b; ++s)
                for (size_t j = 0; j < width; ++j) dense_acc[li][j] += std::abs(act[s * width + j]);
        }
    }

    auto zero_dense_unit = [&](size_t li, size_t unit) {
        DenseLayer& layer = m.dense[li];
        for (int i = 0; i < layer.in; ++i) layer.w[static_cast<size_t>(i) * layer.out + unit] = 0.0;
        layer.b[unit] = 0.0;
        DenseLayer& next = m.dense[li + 1];
        for (int j = 0; j < next.out; ++j) next.w[unit * static_cast<size_t>(next.out) + j] = 0.0;
    };

    for (size_t li = 0; li + 1 < m.dense.size(); ++li) {
        size_t width = m.dense[li].out;
        size_t k = static_cast<size_t>(p * static_cast<double>(width));
        if (k == 0) continue;
        std::vector<prune_detail::UnitScore> scores(width);
        for (size_t j = 0; j < width; ++j) scores[j] = {dense_acc[li][j], j};
        for (size_t u : prune_detail::lowest_units(scores, k)) zero_dense_unit(li, u);
    }

    if (m.stem) {
        size_t k = static_cast<size_t>(p * static_cast<double>(stem_units));
        if (k > 0) {
            std::vector<prune_detail::UnitScore> scores(stem_units);
            for (size_t f = 0; f < stem_units; ++f) scores[f] = {stem_acc[f], f};
            int spatial = m.stem->out_w() * m.stem->out_h();
            for (size_t f : prune_detail::lowest_units(scores, k)) {
                std::fill_n(m.stem->w.begin() + f * m.stem->in_c * 9, m.stem->in_c * 9, 0.0);
                m.stem->b[f] = 0.0;
                DenseLayer& next = m.dense.front();
                for (int i = 0; i < spatial; ++i)
                    for (int j = 0; j < next.out; ++j)
                        next.w[(f * spatial + i) * static_cast<size_t>(next.out) + j] = 0.0;
            }
        }
    }
    return m;
}

enum class ExtractMode { label, prob, adv };

struct ExtractParams {
    ExtractMode mode = ExtractMode::label;
    double alpha = 0.9;        // prob mode: weight of the tempered KL term
    double temperature = 20.0; // prob mode
    double epsilon = 8.0 / 255.0;  // adv mode FGSM bound, pixel/255 scale
    int adv_epochs = 4;            // adv mode fine-tuning epochs
    double adv_learning_rate = 0.02;  // gentler than extraction so accuracy survives
};

// Model extraction: train a student from scratch against the source model's
// outputs on the attacker's (unlabeled) data. Label mode uses argmax labels;
// prob mode the tempered-KL + CE blend; adv mode runs label extraction and
// then FGSM fine-tuning against source-predicted labels.
inline ZooModel extract(const ZooModel& source, const std::vector<double>& attacker_inputs, size_t count,
                        const Arch& student_arch, const ExtractParams& params, const TrainConfig& cfg,
                        std::vector<double>* history = nullptr) {
    if (student_arch.num_classes != source.arch.num_classes)
        throw ShapeMismatch("student and source must share the output label space");
    SoftTargets targets = soft_targets_from(source, attacker_inputs, count,
                                            params.mode == ExtractMode::prob ? params.temperature : 1.0);

    ZooModel student = init_model(student_arch, cfg.seed);
    if (params.mode == ExtractMode::prob) {
        student.lineage.kind = "extract_prob";
        student.lineage.params = {{"alpha", params.alpha}, {"temperature", params.temperature}, {"seed", cfg.seed}};
        fit(student, attacker_inputs, count, distillation_loss(targets, params.alpha), cfg, TrainScope::all, history);
        return student;
    }

    student.lineage.kind = params.mode == ExtractMode::label ? "extract_label" : "extract_adv";
    student.lineage.params = {{"seed", cfg.seed}};
    fit(student, attacker_inputs, count, cross_entropy_loss(targets.labels), cfg, TrainScope::all, history);

    if (params.mode == ExtractMode::adv) {
        student.lineage.params["epsilon"] = params.epsilon;
        student.lineage.params["adv_epochs"] = params.adv_epochs;
        TrainConfig adv_cfg = cfg;
        adv_cfg.epochs = params.adv_epochs;
        adv_cfg.learning_rate = params.adv_learning_rate;
        adv_cfg.seed = mix_seed(cfg.seed, "extract-adv");
        adv_finetune(student, attacker_inputs, targets.labels, params.epsilon, adv_cfg, /*mix_clean=*/false, history);
    }
    return student;
}

// Adversarial training of a stolen copy: clean and FGSM examples blended 1:1
// against the attacker's ground-truth labels, starting from the source weights.
inline ZooModel adv_train(const ZooModel& source, const std::vector<double>& inputs, const std::vector<int>& labels,
                          double epsilon, const TrainConfig& cfg, std::vector<double>* history = nullptr) {
    ZooModel m = source;
    m.train_seed = cfg.seed;
    m.lineage.kind = "adv_trained";
    m.lineage.params = {{"epsilon", epsilon}, {"epochs", cfg.epochs}, {"seed", cfg.seed}};
    adv_finetune(m, inputs, labels, epsilon, cfg, /*mix_clean=*/true, history);
    return m;
}

// White-box knowledge distillation: the student trains purely on the
// teacher's tempered probabilities over the defender data.
inline ZooModel distill(const ZooModel& teacher, const Arch& student_arch, const std::vector<double>& inputs,
                        size_t count, double temperature, const TrainConfig& cfg,
                        std::vector<double>* history = nullptr) {
    if (student_arch.num_classes != teacher.arch.num_classes)
        throw ShapeMismatch("student and teacher must share the output label space");
    SoftTargets targets = soft_targets_from(teacher, inputs, count, temperature);
    ZooModel student = init_model(student_arch, cfg.seed);
    student.lineage.kind = "distilled";
    student.lineage.params = {{"temperature", temperature}, {"seed", cfg.seed}};
    fit(student, inputs, count, distillation_loss(targets, 1.0), cfg, TrainScope::all, history);
    return student;
}

// Transfer learning: swap in a fresh head for the new label space, then
// fine-tune per scope. Correlation fingerprints are dimension-agnostic, so
// the pipeline still applies to the transferred model.
inline ZooModel transfer(const ZooModel& source, const std::vector<double>& inputs, const std::vector<int>& labels,
                         int new_classes, TrainScope scope, const TrainConfig& cfg,
                         std::vector<double>* history = nullptr) {
    ZooModel m = source;
    m.train_seed = cfg.seed;
    m.lineage.kind = "transferred";
    m.lineage.params = {{"new_classes", new_classes}, {"scope", scope == TrainScope::all ? "all" : "last"},
                        {"epochs", cfg.epochs}, {"seed", cfg.seed}};
    DenseLayer head;
    head.in = m.head().in;
    head.out = new_classes;
    head.w.resize(static_cast<size_t>(head.in) * head.out);
    head.b.assign(head.out, 0.0);
    Rng rng(mix_seed(cfg.seed, "transfer-head"));
    double scale = std::sqrt(2.0 / head.in);
    for (auto& v : head.w) v = rng.normal(0.0, scale);
    m.dense.back() = std::move(head);
    m.arch.num_classes = new_classes;
    if (cfg.epochs > 0) fit(m, inputs, labels.size(), cross_entropy_loss(labels), cfg, scope, history);
    return m;
}

}  // namespace sac::zoo
