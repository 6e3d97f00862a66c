#pragma once

// End-to-end experiment harness: trains a source model, a pool of irrelevant
// models, and one pool per attack family, fingerprints everything over
// JPEG-compressed, clean, and reduced-count probe sets, and writes models,
// output matrices, fingerprints, scores.csv and report.json in one pass.
// Independent model trainings run in parallel; everything is keyed off one
// master seed.

#include <atomic>
#include <filesystem>
#include <mutex>
#include <thread>

#include "sac/correlation.hpp"
#include "sac/metrics.hpp"
#include "sac/probe.hpp"
#include "sac/verdict.hpp"
#include "sac/zoo/attacks.hpp"
#include "sac/zoo/dataset.hpp"
#include "sac/zoo/verifier.hpp"

namespace sac::zoo {

struct ExperimentConfig {
    uint64_t seed = 42;

    // dataset
    std::string generator = "synthetic";  // synthetic | cifar10
    std::string cifar_path;
    int classes = 10;
    int per_class = 500;
    int image_size = 32;

    // probes
    int probe_count = 50;
    int probe_small_count = 25;
    int quality = 10;

    Kernel kernel = Kernel::cosine();
    ThresholdStrategy strategy = ThresholdStrategy::worst_irrelevant;
    int threshold_pool_size = 4;

    // base training (source, irrelevant models)
    TrainConfig train{/*epochs=*/10, /*batch_size=*/50, /*learning_rate=*/0.1, /*momentum=*/0.9, /*seed=*/0};

    int irrelevant_count = 5;

    int finetune_count = 3;  // per scope (all / last)
    int finetune_epochs = 4;
    double finetune_lr = 0.01;

    std::vector<double> prune_fractions = {0.1, 0.2, 0.25};

    int extract_count = 3;  // per mode (label / prob / adv)
    int extract_epochs = 20;
    double extract_prob_lr = 0.03;  // tempered-KL gradients run hot; see distillation_loss
    double extract_alpha = 0.9;
    double extract_temperature = 20.0;
    // Desk-scale FGSM bound: the synthetic class signal is ~32 intensity
    // levels, so 2/255 keeps the perturbation-to-signal ratio near the
    // natural-image setting the 8/255 convention comes from.
    double epsilon = 2.0 / 255.0;
    int extract_adv_epochs = 2;
    double adv_lr = 0.003;

    int adv_train_count = 3;
    int adv_train_epochs = 2;

    int transfer_count = 3;
    int transfer_classes = 10;       // same-size label space, fresh-draw domain
    int transfer_template_offset = 0;
    int transfer_per_class = 250;
    int transfer_epochs = 4;

    int distill_count = 0;
    double distill_temperature = 20.0;

    int workers = 0;  // 0 = hardware concurrency

    nlohmann::json to_json() const {
        return {
            {"seed", seed},
            {"dataset",
             {{"generator", generator}, {"cifar_path", cifar_path}, {"classes", classes},
              {"per_class", per_class}, {"size", image_size}}},
            {"probes", {{"count", probe_count}, {"small_count", probe_small_count}, {"quality", quality}}},
            {"kernel", {{"name", kernel.name()}, {"bandwidth", kernel.bandwidth}}},
            {"threshold", {{"strategy", threshold_strategy_name(strategy)}, {"pool_size", threshold_pool_size}}},
            {"train",
             {{"epochs", train.epochs}, {"batch_size", train.batch_size},
              {"learning_rate", train.learning_rate}, {"momentum", train.momentum}}},
            {"irrelevant", {{"count", irrelevant_count}}},
            {"attacks",
             {{"finetune", {{"count", finetune_count}, {"epochs", finetune_epochs}, {"learning_rate", finetune_lr}}},
              {"prune", {{"fractions", prune_fractions}}},
              {"extract",
               {{"count", extract_count}, {"epochs", extract_epochs}, {"prob_learning_rate", extract_prob_lr},
                {"alpha", extract_alpha}, {"temperature", extract_temperature}, {"epsilon", epsilon},
                {"adv_epochs", extract_adv_epochs}, {"adv_learning_rate", adv_lr}}},
              {"adv_train",
               {{"count", adv_train_count}, {"epochs", adv_train_epochs}, {"learning_rate", adv_lr},
                {"epsilon", epsilon}}},
              {"transfer",
               {{"count", transfer_count}, {"classes", transfer_classes}, {"per_class", transfer_per_class},
                {"epochs", transfer_epochs}, {"template_offset", transfer_template_offset}}},
              {"distill", {{"count", distill_count}, {"temperature", distill_temperature}}}}},
            {"workers", workers}};
    }

    static ExperimentConfig from_json(const nlohmann::json& j) {
        ExperimentConfig c;
        try {
            c.seed = j.value("seed", c.seed);
            if (j.contains("dataset")) {
                const auto& d = j.at("dataset");
                c.generator = d.value("generator", c.generator);
                c.cifar_path = d.value("cifar_path", c.cifar_path);
                c.classes = d.value("classes", c.classes);
                c.per_class = d.value("per_class", c.per_class);
                c.image_size = d.value("size", c.image_size);
            }
            if (j.contains("probes")) {
                const auto& p = j.at("probes");
                c.probe_count = p.value("count", c.probe_count);
                c.probe_small_count = p.value("small_count", c.probe_small_count);
                c.quality = p.value("quality", c.quality);
            }
            if (j.contains("kernel")) {
                const auto& k = j.at("kernel");
                c.kernel = kernel_from_name(k.value("name", std::string("cosine")), k.value("bandwidth", 0.0));
            }
            if (j.contains("threshold")) {
                const auto& t = j.at("threshold");
                c.strategy = threshold_strategy_from_name(t.value("strategy", std::string("worst-irrelevant")));
                c.threshold_pool_size = t.value("pool_size", c.threshold_pool_size);
            }
            if (j.contains("train")) {
                const auto& t = j.at("train");
                c.train.epochs = t.value("epochs", c.train.epochs);
                c.train.batch_size = t.value("batch_size", c.train.batch_size);
                c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
                c.train.momentum = t.value("momentum", c.train.momentum);
            }
            if (j.contains("irrelevant")) c.irrelevant_count = j.at("irrelevant").value("count", c.irrelevant_count);
            if (j.contains("attacks")) {
                const auto& a = j.at("attacks");
                if (a.contains("finetune")) {
                    c.finetune_count = a.at("finetune").value("count", c.finetune_count);
                    c.finetune_epochs = a.at("finetune").value("epochs", c.finetune_epochs);
                    c.finetune_lr = a.at("finetune").value("learning_rate", c.finetune_lr);
                }
                if (a.contains("prune"))
                    c.prune_fractions = a.at("prune").value("fractions", c.prune_fractions);
                if (a.contains("extract")) {
                    const auto& e = a.at("extract");
                    c.extract_count = e.value("count", c.extract_count);
                    c.extract_epochs = e.value("epochs", c.extract_epochs);
                    c.extract_prob_lr = e.value("prob_learning_rate", c.extract_prob_lr);
                    c.extract_alpha = e.value("alpha", c.extract_alpha);
                    c.extract_temperature = e.value("temperature", c.extract_temperature);
                    c.epsilon = e.value("epsilon", c.epsilon);
                    c.extract_adv_epochs = e.value("adv_epochs", c.extract_adv_epochs);
                    c.adv_lr = e.value("adv_learning_rate", c.adv_lr);
                }
                if (a.contains("adv_train")) {
                    c.adv_train_count = a.at("adv_train").value("count", c.adv_train_count);
                    c.adv_train_epochs = a.at("adv_train").value("epochs", c.adv_train_epochs);
                    c.adv_lr = a.at("adv_train").value("learning_rate", c.adv_lr);
                    c.epsilon = a.at("adv_train").value("epsilon", c.epsilon);
                }
                if (a.contains("transfer")) {
                    const auto& t = a.at("transfer");
                    c.transfer_count = t.value("count", c.transfer_count);
                    c.transfer_classes = t.value("classes", c.transfer_classes);
                    c.transfer_per_class = t.value("per_class", c.transfer_per_class);
                    c.transfer_epochs = t.value("epochs", c.transfer_epochs);
                    c.transfer_template_offset = t.value("template_offset", c.transfer_template_offset);
                }
                if (a.contains("distill")) {
                    c.distill_count = a.at("distill").value("count", c.distill_count);
                    c.distill_temperature = a.at("distill").value("temperature", c.distill_temperature);
                }
            }
            c.workers = j.value("workers", c.workers);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("bad experiment config: ") + e.what());
        }
        return c;
    }
};

inline Arch experiment_arch(ArchKind kind, int num_classes, int image_size) {
    Arch a = kind == ArchKind::mlp ? Arch::mlp(num_classes) : Arch::conv(num_classes);
    a.input_width = image_size;
    a.input_height = image_size;
    a.input_channels = 3;
    return a;
}

// Probability-output matrix of a classifier over a probe set; rows follow
// probe ids, digest chains to the probe manifest.
inline OutputMatrix model_output_matrix(const ZooModel& m, const ProbeSet& probes) {
    OutputMatrix out;
    out.rows = probes.size();
    out.dims = static_cast<size_t>(m.arch.num_classes);
    out.kind = OutputKind::probability;
    out.probe_digest = probes.manifest_digest;
    out.values.reserve(out.rows * out.dims);
    std::vector<RawImage> imgs;
    imgs.reserve(probes.size());
    for (const auto& p : probes.probes) imgs.push_back(p.image);
    std::vector<double> x = normalize_images(imgs);
    size_t dim = static_cast<size_t>(m.arch.input_dim());
    ForwardTrace trace;
    m.forward_batch(x.data(), probes.size(), trace);
    std::vector<double> p(out.dims);
    for (size_t i = 0; i < out.rows; ++i) {
        std::span<const double> z(trace.logits().data() + i * out.dims, out.dims);
        nn_detail::softmax_row(z, p);
        out.values.insert(out.values.end(), p.begin(), p.end());
    }
    out.validate();
    return out;
}

inline std::vector<int> argmax_rows(const OutputMatrix& m) {
    std::vector<int> labels(m.rows);
    for (size_t i = 0; i < m.rows; ++i) {
        auto r = m.row(i);
        labels[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
    }
    return labels;
}

namespace experiment_detail {

inline void parallel_tasks(size_t n, int workers, const std::function<void(size_t)>& task) {
    if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
    workers = std::min<int>(workers, static_cast<int>(n));
    if (workers <= 1) {
        for (size_t i = 0; i < n; ++i) task(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto body = [&] {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                task(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

struct SuspectRow {
    std::string name;
    std::string family;       // pool key: finetune_all, prune, extract_label, ...
    PoolLabel label = PoolLabel::stolen;
    double distance = 0.0;        // JPEG probes, full count
    double distance_clean = 0.0;  // uncompressed probes
    double distance_small = 0.0;  // JPEG probes, reduced count
    double pointwise = 0.0;       // 1 - label agreement with source on JPEG probes
    double accuracy = 0.0;
    Decision decision = Decision::irrelevant;
};

struct PoolMetrics {
    size_t count = 0;
    double auc = 0.0, auc_clean = 0.0, auc_small = 0.0, auc_pointwise = 0.0;
    bool has_p = false;
    double p_value = 1.0;
    double f1 = 0.0;

    nlohmann::json to_json() const {
        nlohmann::json j{{"count", count},         {"auc", auc},      {"auc_clean", auc_clean},
                         {"auc_small", auc_small}, {"auc_pointwise", auc_pointwise},
                         {"f1", f1}};
        if (has_p) j["p_value"] = p_value;
        else j["p_value"] = nullptr;  // pool too small for a two-sample test
        return j;
    }
};

inline PoolMetrics pool_metrics(const std::vector<SuspectRow>& rows, const std::string& family, double threshold) {
    auto make_pool = [&](auto score_of) {
        ScoredPool pool;
        for (const auto& r : rows) {
            bool in = r.label == PoolLabel::irrelevant || r.family == family || family == "all" ||
                      (family == "finetune" && r.family.starts_with("finetune")) ||
                      (family == "extraction" && r.family.starts_with("extract"));
            if (!in) continue;
            pool.entries.push_back({r.name, score_of(r), r.label});
        }
        return pool;
    };
    ScoredPool jc = make_pool([](const SuspectRow& r) { return r.distance; });
    PoolMetrics m;
    m.count = jc.entries.size();
    m.auc = auc_roc(jc);
    m.auc_clean = auc_roc(make_pool([](const SuspectRow& r) { return r.distance_clean; }));
    m.auc_small = auc_roc(make_pool([](const SuspectRow& r) { return r.distance_small; }));
    m.auc_pointwise = auc_roc(make_pool([](const SuspectRow& r) { return r.pointwise; }));
    size_t stolen = 0, irrelevant = 0;
    for (const auto& e : jc.entries) (e.label == PoolLabel::stolen ? stolen : irrelevant)++;
    if (stolen >= 2 && irrelevant >= 2) {
        m.p_value = t_test_p(jc);
        m.has_p = true;
    }
    m.f1 = f1_at_threshold(jc, threshold).f1;
    return m;
}

}  // namespace experiment_detail

struct ExperimentResult {
    nlohmann::json report;
    std::filesystem::path report_path;
};

inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    using namespace experiment_detail;
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    fs::create_directories(out_dir / "models");
    fs::create_directories(out_dir / "outputs");
    fs::create_directories(out_dir / "fingerprints");

    write_file(out_dir / "resolved_config.json", cfg.to_json().dump(2) + "\n");

    // ---- data ----
    ZooDataset full = cfg.generator == "cifar10"
                          ? load_cifar10_binary(cfg.cifar_path,
                                                static_cast<size_t>(cfg.classes) * cfg.per_class)
                          : gen_synthetic(mix_seed(cfg.seed, "dataset"), cfg.classes, cfg.per_class, cfg.image_size);
    auto [defender, attacker] = split_defender_attacker(full, mix_seed(cfg.seed, "split"));
    for (const auto& img : defender.images)
        if (img.width != cfg.image_size || img.height != cfg.image_size || img.channels != 3)
            throw ShapeMismatch("dataset images do not match the configured size " +
                                std::to_string(cfg.image_size));
    std::vector<double> defender_x = normalize_images(defender.images);
    std::vector<double> attacker_x = normalize_images(attacker.images);

    ZooDataset transfer_full = gen_synthetic(mix_seed(cfg.seed, "transfer-data"), cfg.transfer_classes,
                                             cfg.transfer_per_class, cfg.image_size,
                                             cfg.transfer_template_offset + cfg.transfer_classes,
                                             cfg.transfer_template_offset);
    auto [transfer_train, transfer_test] = split_defender_attacker(transfer_full, mix_seed(cfg.seed, "transfer-split"));
    std::vector<double> transfer_x = normalize_images(transfer_train.images);
    std::vector<double> transfer_test_x = normalize_images(transfer_test.images);

    // ---- probes ----
    ProbeSet probes_jc = build_probe_set(defender.images, cfg.probe_count, cfg.quality,
                                         mix_seed(cfg.seed, "probes"), Compression::jpeg);
    ProbeSet probes_clean = build_probe_set(defender.images, cfg.probe_count, cfg.quality,
                                            mix_seed(cfg.seed, "probes"), Compression::none);
    ProbeSet probes_small = build_probe_set(defender.images, cfg.probe_small_count, cfg.quality,
                                            mix_seed(cfg.seed, "probes"), Compression::jpeg);
    save_probe_set(probes_jc, out_dir / "probes_jc");
    save_probe_set(probes_clean, out_dir / "probes_clean");
    save_probe_set(probes_small, out_dir / "probes_small");

    // ---- source ----
    TrainConfig source_cfg = cfg.train;
    source_cfg.seed = mix_seed(cfg.seed, "source");
    ZooModel source = train_classifier(experiment_arch(ArchKind::mlp, cfg.classes, cfg.image_size),
                                       defender_x, defender.labels, source_cfg,
                                       Lineage{"source", {{"seed", source_cfg.seed}}});
    double source_acc = accuracy(source, attacker_x, attacker.labels);
    save_model(source, out_dir / "models" / "source.sacm");

    OutputMatrix source_out_jc = model_output_matrix(source, probes_jc);
    OutputMatrix source_out_clean = model_output_matrix(source, probes_clean);
    OutputMatrix source_out_small = model_output_matrix(source, probes_small);
    save_output_matrix(source_out_jc, out_dir / "outputs" / "source.saco");
    CorrelationMatrix source_fp_jc = correlation_matrix(source_out_jc, cfg.kernel);
    CorrelationMatrix source_fp_clean = correlation_matrix(source_out_clean, cfg.kernel);
    CorrelationMatrix source_fp_small = correlation_matrix(source_out_small, cfg.kernel);
    save_correlation_matrix(source_fp_jc, out_dir / "fingerprints" / "source.sacc");
    std::vector<int> source_probe_labels = argmax_rows(source_out_jc);

    // Teacher outputs over the attacker split, shared by all extraction tasks.
    SoftTargets extract_soft = soft_targets_from(source, attacker_x, attacker.labels.size(), cfg.extract_temperature);

    // ---- suspect/irrelevant tasks ----
    struct Task {
        std::string name;
        std::string family;
        PoolLabel label;
        std::function<ZooModel(uint64_t)> build;  // argument: task seed
    };
    std::vector<Task> tasks;

    for (int i = 0; i < cfg.irrelevant_count; ++i) {
        Arch arch = experiment_arch(i % 2 == 0 ? ArchKind::mlp : ArchKind::conv, cfg.classes, cfg.image_size);
        // independent third parties train on their own (attacker-side) data
        tasks.push_back({"irrelevant_" + std::to_string(i), "irrelevant", PoolLabel::irrelevant,
                         [&, arch](uint64_t seed) {
                             TrainConfig tc = cfg.train;
                             tc.seed = seed;
                             return train_classifier(arch, attacker_x, attacker.labels, tc,
                                                     Lineage{"irrelevant", {{"seed", seed}}});
                         }});
    }
    for (int scope_i = 0; scope_i < 2; ++scope_i) {
        TrainScope scope = scope_i == 0 ? TrainScope::all : TrainScope::last;
        std::string fam = scope_i == 0 ? "finetune_all" : "finetune_last";
        for (int i = 0; i < cfg.finetune_count; ++i)
            tasks.push_back({fam + "_" + std::to_string(i), fam, PoolLabel::stolen, [&, scope](uint64_t seed) {
                                 TrainConfig tc = cfg.train;
                                 tc.seed = seed;
                                 tc.epochs = cfg.finetune_epochs;
                                 tc.learning_rate = cfg.finetune_lr;
                                 return finetune(source, attacker_x, attacker.labels, scope, tc);
                             }});
    }
    for (size_t i = 0; i < cfg.prune_fractions.size(); ++i) {
        double p = cfg.prune_fractions[i];
        tasks.push_back({"prune_" + std::to_string(i), "prune", PoolLabel::stolen, [&, p](uint64_t) {
                             return prune(source, defender_x, defender.labels.size(), p);
                         }});
    }
    auto student_arch = [&](int i) {
        return experiment_arch(i % 2 == 0 ? ArchKind::mlp : ArchKind::conv, cfg.classes, cfg.image_size);
    };
    struct ModeSpec { ExtractMode mode; const char* fam; };
    for (ModeSpec ms : {ModeSpec{ExtractMode::label, "extract_label"}, ModeSpec{ExtractMode::prob, "extract_prob"},
                        ModeSpec{ExtractMode::adv, "extract_adv"}}) {
        for (int i = 0; i < cfg.extract_count; ++i) {
            Arch arch = student_arch(i);
            ExtractMode mode = ms.mode;
            tasks.push_back({std::string(ms.fam) + "_" + std::to_string(i), ms.fam, PoolLabel::stolen,
                             [&, arch, mode](uint64_t seed) {
                                 TrainConfig tc = cfg.train;
                                 tc.seed = seed;
                                 tc.epochs = cfg.extract_epochs;
                                 if (mode == ExtractMode::prob) tc.learning_rate = cfg.extract_prob_lr;
                                 ExtractParams params;
                                 params.mode = mode;
                                 params.alpha = cfg.extract_alpha;
                                 params.temperature = cfg.extract_temperature;
                                 params.epsilon = cfg.epsilon;
                                 params.adv_epochs = cfg.extract_adv_epochs;
                                 params.adv_learning_rate = cfg.adv_lr;
                                 return extract(source, attacker_x, attacker.labels.size(), arch, params, tc);
                             }});
        }
    }
    for (int i = 0; i < cfg.adv_train_count; ++i)
        tasks.push_back({"adv_train_" + std::to_string(i), "adv_train", PoolLabel::stolen, [&](uint64_t seed) {
                             TrainConfig tc = cfg.train;
                             tc.seed = seed;
                             tc.epochs = cfg.adv_train_epochs;
                             tc.learning_rate = cfg.adv_lr;
                             return adv_train(source, attacker_x, attacker.labels, cfg.epsilon, tc);
                         }});
    for (int i = 0; i < cfg.transfer_count; ++i) {
        TrainScope scope = i % 2 == 0 ? TrainScope::all : TrainScope::last;
        tasks.push_back({"transfer_" + std::to_string(i), "transfer", PoolLabel::stolen, [&, scope](uint64_t seed) {
                             TrainConfig tc = cfg.train;
                             tc.seed = seed;
                             tc.epochs = cfg.transfer_epochs;
                             tc.learning_rate = cfg.finetune_lr;
                             return transfer(source, transfer_x, transfer_train.labels, cfg.transfer_classes, scope,
                                             tc);
                         }});
    }
    for (int i = 0; i < cfg.distill_count; ++i) {
        Arch arch = student_arch(i);
        tasks.push_back({"distilled_" + std::to_string(i), "distilled", PoolLabel::stolen, [&, arch](uint64_t seed) {
                             TrainConfig tc = cfg.train;
                             tc.seed = seed;
                             return distill(source, arch, defender_x, defender.labels.size(),
                                            cfg.distill_temperature, tc);
                         }});
    }

    // ---- run tasks; fingerprint and score each model as it finishes ----
    std::vector<SuspectRow> rows(tasks.size());
    parallel_tasks(tasks.size(), cfg.workers, [&](size_t ti) {
        const Task& task = tasks[ti];
        ZooModel m = task.build(mix_seed(cfg.seed, "task-" + task.name));
        save_model(m, out_dir / "models" / (task.name + ".sacm"));

        OutputMatrix out_jc = model_output_matrix(m, probes_jc);
        OutputMatrix out_clean = model_output_matrix(m, probes_clean);
        OutputMatrix out_small = model_output_matrix(m, probes_small);
        save_output_matrix(out_jc, out_dir / "outputs" / (task.name + ".saco"));

        CorrelationMatrix fp_jc = correlation_matrix(out_jc, cfg.kernel);
        save_correlation_matrix(fp_jc, out_dir / "fingerprints" / (task.name + ".sacc"));

        SuspectRow row;
        row.name = task.name;
        row.family = task.family;
        row.label = task.label;
        row.distance = fingerprint_distance(source_fp_jc, fp_jc).value;
        row.distance_clean = fingerprint_distance(source_fp_clean, correlation_matrix(out_clean, cfg.kernel)).value;
        row.distance_small = fingerprint_distance(source_fp_small, correlation_matrix(out_small, cfg.kernel)).value;

        std::vector<int> labels = argmax_rows(out_jc);
        size_t agree = 0;
        for (size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == source_probe_labels[i]) ++agree;
        row.pointwise = 1.0 - static_cast<double>(agree) / static_cast<double>(labels.size());

        row.accuracy = task.family == "transfer" ? accuracy(m, transfer_test_x, transfer_test.labels)
                                                 : accuracy(m, attacker_x, attacker.labels);
        rows[ti] = std::move(row);
    });

    // ---- threshold + verdicts ----
    std::vector<double> irrelevant_distances;
    std::vector<std::string> threshold_pool_names;
    for (const auto& r : rows)
        if (r.label == PoolLabel::irrelevant &&
            irrelevant_distances.size() < static_cast<size_t>(cfg.threshold_pool_size)) {
            irrelevant_distances.push_back(r.distance);
            threshold_pool_names.push_back(r.name);
        }
    Threshold threshold;
    if (cfg.strategy == ThresholdStrategy::worst_irrelevant) {
        threshold = threshold_worst_irrelevant(irrelevant_distances, threshold_pool_names);
    } else {
        std::vector<double> adv_distances;
        for (const auto& r : rows)
            if (r.family == "extract_adv") adv_distances.push_back(r.distance);
        threshold = threshold_validation_mean(irrelevant_distances, adv_distances, threshold_pool_names);
    }
    for (auto& r : rows) r.decision = decide(r.name, r.distance, threshold).decision;

    // ---- metrics + artifacts ----
    ScoredPool scores;
    for (const auto& r : rows) scores.entries.push_back({r.name, r.distance, r.label});
    write_scores_csv(scores, out_dir / "scores.csv");

    std::vector<std::string> families = {"finetune_all", "finetune_last", "finetune", "prune",
                                         "extract_label", "extract_prob", "extract_adv", "extraction",
                                         "adv_train", "transfer", "all"};
    if (cfg.distill_count > 0) families.push_back("distilled");
    nlohmann::json pools_json;
    for (const auto& fam : families) {
        bool present = fam == "all";
        for (const auto& r : rows)
            present |= r.family == fam || (fam == "finetune" && r.family.starts_with("finetune")) ||
                       (fam == "extraction" && r.family.starts_with("extract"));
        if (present) pools_json[fam] = pool_metrics(rows, fam, threshold.value).to_json();
    }

    nlohmann::json report;
    report["config"] = cfg.to_json();
    report["dataset"] = {{"classes", full.num_classes}, {"defender_size", defender.size()},
                         {"attacker_size", attacker.size()}, {"source_test_accuracy", source_acc}};
    report["probes"] = {
        {"jc", {{"digest", to_hex(probes_jc.manifest_digest)}, {"n", probes_jc.size()}, {"quality", cfg.quality}}},
        {"clean", {{"digest", to_hex(probes_clean.manifest_digest)}, {"n", probes_clean.size()}}},
        {"jc_small",
         {{"digest", to_hex(probes_small.manifest_digest)}, {"n", probes_small.size()}, {"quality", cfg.quality}}}};
    report["kernel"] = cfg.kernel.name();
    report["threshold"] = {{"value", threshold.value},
                           {"strategy", threshold_strategy_name(threshold.strategy)},
                           {"pool", threshold.pool}};
    auto& suspects = report["suspects"] = nlohmann::json::array();
    for (const auto& r : rows)
        suspects.push_back({{"name", r.name}, {"family", r.family}, {"label", pool_label_name(r.label)},
                            {"distance", r.distance}, {"distance_clean", r.distance_clean},
                            {"distance_small", r.distance_small}, {"pointwise", r.pointwise},
                            {"accuracy", r.accuracy}, {"decision", decision_name(r.decision)}});
    report["pools"] = pools_json;

    ExperimentResult result;
    result.report = report;
    result.report_path = out_dir / "report.json";
    write_file(result.report_path, report.dump(2) + "\n");
    return result;
}

// ---- FRI verifier experiment ----------------------------------------------

struct FriExperimentConfig {
    uint64_t seed = 7;
    int train_identities = 20;
    int train_per_identity = 24;
    int calib_per_identity = 8;
    int num_targets = 50;     // identity groups per trial
    int num_references = 50;  // references per group
    int independent_count = 3;
    int trials = 10;
    int quality = 10;
    TrainConfig train{/*epochs=*/12, /*batch_size=*/32, /*learning_rate=*/0.1, /*momentum=*/0.9, /*seed=*/0};
    int finetune_epochs = 4;
    double finetune_lr = 0.02;
};

struct FriTrial {
    double derived_distance = 0.0;
    std::vector<double> independent_distances;
    double exact_copy_distance = 0.0;
    bool exact_copy_stolen = false;
    bool derived_wins = false;  // strictly below every independent distance
};

struct FriExperimentResult {
    std::vector<FriTrial> trials;
    int wins = 0;
    double win_rate = 0.0;
    nlohmann::json to_json() const {
        nlohmann::json t = nlohmann::json::array();
        for (const auto& tr : trials)
            t.push_back({{"derived", tr.derived_distance}, {"independent", tr.independent_distances},
                         {"exact_copy", tr.exact_copy_distance}, {"exact_copy_stolen", tr.exact_copy_stolen},
                         {"derived_wins", tr.derived_wins}});
        return {{"trials", t}, {"wins", wins}, {"win_rate", win_rate}};
    }
};

inline std::vector<IdentityGroup> synthetic_identity_groups(uint64_t seed, int num_identities, int num_references,
                                                            int image_size = 32) {
    ZooDataset ds = gen_synthetic(seed, num_identities, num_references + 1, image_size);
    std::vector<IdentityGroup> groups(num_identities);
    for (int id = 0; id < num_identities; ++id) {
        IdentityGroup& g = groups[id];
        g.identity_id = "identity_" + std::to_string(id);
        for (size_t i = 0; i < ds.size(); ++i) {
            if (ds.labels[i] != id) continue;
            if (g.target.pixels.empty()) g.target = ds.images[i];
            else g.references.push_back(ds.images[i]);
        }
        g.validate();
    }
    return groups;
}

inline FriExperimentResult run_fri_experiment(const FriExperimentConfig& cfg) {
    ZooDataset identities = gen_synthetic(mix_seed(cfg.seed, "fri-train"), cfg.train_identities,
                                          cfg.train_per_identity);
    auto [defender, attacker] = split_defender_attacker(identities, mix_seed(cfg.seed, "fri-split"));
    std::vector<double> defender_x = normalize_images(defender.images);
    std::vector<double> attacker_x = normalize_images(attacker.images);
    ZooDataset calib = gen_synthetic(mix_seed(cfg.seed, "fri-calib"), cfg.train_identities, cfg.calib_per_identity);

    TrainConfig tc = cfg.train;
    tc.seed = mix_seed(cfg.seed, "fri-source");
    auto source = std::make_shared<ZooModel>(train_classifier(
        experiment_arch(ArchKind::mlp, cfg.train_identities, 32), defender_x, defender.labels, tc,
        Lineage{"source", {}}));

    TrainConfig ft = cfg.train;
    ft.seed = mix_seed(cfg.seed, "fri-derived");
    ft.epochs = cfg.finetune_epochs;
    ft.learning_rate = cfg.finetune_lr;
    auto derived = std::make_shared<ZooModel>(finetune(*source, attacker_x, attacker.labels, TrainScope::all, ft));

    std::vector<std::shared_ptr<ZooModel>> independents;
    for (int i = 0; i < cfg.independent_count; ++i) {
        TrainConfig ic = cfg.train;
        ic.seed = mix_seed(cfg.seed, "fri-independent-" + std::to_string(i));
        Arch arch = experiment_arch(i % 2 == 0 ? ArchKind::mlp : ArchKind::conv, cfg.train_identities, 32);
        independents.push_back(std::make_shared<ZooModel>(
            train_classifier(arch, defender_x, defender.labels, ic, Lineage{"irrelevant", {{"seed", ic.seed}}})));
    }

    uint64_t calib_seed = mix_seed(cfg.seed, "fri-tau");
    auto source_verifier = verifier_from(source, calib, calib_seed);
    auto derived_verifier = verifier_from(derived, calib, calib_seed);
    std::vector<std::shared_ptr<EmbeddingVerifier>> independent_verifiers;
    for (auto& m : independents) independent_verifiers.push_back(verifier_from(m, calib, calib_seed));
    // Exact copy: the same model and threshold as the registered source verifier.
    auto copy_verifier = std::make_shared<EmbeddingVerifier>(source, source_verifier->tau());

    FriExperimentResult result;
    for (int t = 0; t < cfg.trials; ++t) {
        auto groups = synthetic_identity_groups(mix_seed(cfg.seed, "fri-trial-" + std::to_string(t)),
                                                cfg.num_targets, cfg.num_references);
        auto fingerprint_of = [&](Verifier& v) {
            OutputMatrix m = fri_output_matrix(groups, v, cfg.quality);
            return correlation_matrix(m, Kernel::cosine());
        };
        CorrelationMatrix source_fp = fingerprint_of(*source_verifier);

        FriTrial trial;
        trial.derived_distance = fingerprint_distance(source_fp, fingerprint_of(*derived_verifier)).value;
        for (auto& v : independent_verifiers)
            trial.independent_distances.push_back(fingerprint_distance(source_fp, fingerprint_of(*v)).value);
        trial.exact_copy_distance = fingerprint_distance(source_fp, fingerprint_of(*copy_verifier)).value;

        Threshold th = threshold_worst_irrelevant(trial.independent_distances);
        trial.exact_copy_stolen = decide("exact_copy", trial.exact_copy_distance, th).decision == Decision::stolen;
        trial.derived_wins = trial.derived_distance <
                             *std::min_element(trial.independent_distances.begin(), trial.independent_distances.end());
        if (trial.derived_wins) ++result.wins;
        result.trials.push_back(std::move(trial));
    }
    result.win_rate = static_cast<double>(result.wins) / static_cast<double>(cfg.trials);
    return result;
}

}  // namespace sac::zoo
