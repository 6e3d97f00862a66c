// sac: black-box model fingerprinting over JPEG-compressed probes.
//
// Subcommands cover the full pipeline: probe-gen, outputs, fingerprint,
// compare, fri, verdict, eval, zoo run. Exit codes: 0 success, 1 error,
// 2 when an audit produced at least one Stolen verdict (CI gate).

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "sac/sac.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitStolen = 2;

uint64_t seed_with_env_override(uint64_t seed) {
    if (const char* env = std::getenv("SAC_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw sac::ParseError(std::string("SAC_SEED is not a valid integer: ") + env);
        }
    }
    return seed;
}

std::vector<sac::RawImage> load_input_images(const std::string& input, uint64_t seed, int classes, int per_class,
                                             int size) {
    if (input == "synthetic") {
        auto ds = sac::zoo::gen_synthetic(sac::mix_seed(seed, "probe-source"), classes, per_class, size);
        return std::move(ds.images);
    }
    std::vector<sac::RawImage> images;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(input)) {
        auto ext = entry.path().extension().string();
        if (ext == ".ppm" || ext == ".pgm") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) images.push_back(sac::load_pnm(f));
    if (images.empty()) throw sac::InsufficientImages("no .ppm/.pgm images found in " + input);
    return images;
}

int cmd_probe_gen(const std::string& input, int count, int quality, uint64_t seed, const std::string& out,
                  bool clean, int classes, int per_class, int size) {
    seed = seed_with_env_override(seed);
    auto images = load_input_images(input, seed, classes, per_class, size);
    auto set = sac::build_probe_set(images, static_cast<size_t>(count), quality, seed,
                                    clean ? sac::Compression::none : sac::Compression::jpeg);
    sac::save_probe_set(set, out);
    std::cout << nlohmann::json{{"probe_dir", out},
                                {"n", set.size()},
                                {"quality", quality},
                                {"compression", sac::compression_name(set.compression)},
                                {"digest", sac::to_hex(set.manifest_digest)}}
                     .dump(2)
              << "\n";
    return kExitOk;
}

int cmd_outputs(const std::string& model_path, const std::string& probes_dir, const std::string& out) {
    auto model = sac::zoo::load_model(model_path);
    auto probes = sac::load_probe_set(probes_dir);
    auto matrix = sac::zoo::model_output_matrix(model, probes);
    sac::save_output_matrix(matrix, out);
    std::cout << nlohmann::json{{"outputs", out}, {"rows", matrix.rows}, {"dims", matrix.dims},
                                {"probe_digest", sac::to_hex(matrix.probe_digest)}}
                     .dump(2)
              << "\n";
    return kExitOk;
}

int cmd_fingerprint(const std::string& outputs_path, const std::string& kernel_name, double bandwidth,
                    const std::string& out) {
    auto outputs = sac::load_output_matrix(outputs_path);
    auto fp = sac::correlation_matrix(outputs, sac::kernel_from_name(kernel_name, bandwidth));
    sac::save_correlation_matrix(fp, out);
    std::cout << nlohmann::json{{"fingerprint", out}, {"n", fp.n}, {"kernel", fp.kernel.name()},
                                {"bandwidth", fp.kernel.bandwidth},
                                {"probe_digest", sac::to_hex(fp.probe_digest)}}
                     .dump(2)
              << "\n";
    return kExitOk;
}

int cmd_compare(const std::string& source_path, const std::string& suspect_path) {
    auto source = sac::load_correlation_matrix(source_path);
    auto suspect = sac::load_correlation_matrix(suspect_path);
    auto d = sac::fingerprint_distance(source, suspect);
    std::cout << nlohmann::json{{"distance", d.value},
                                {"source", sac::to_hex(d.source_digest)},
                                {"suspect", sac::to_hex(d.suspect_digest)},
                                {"probe_digest", sac::to_hex(source.probe_digest)}}
                     .dump(2)
              << "\n";
    return kExitOk;
}

int cmd_fri(const std::string& groups_dir, const std::string& verifier_path, int quality, double tau,
            const std::string& out) {
    auto groups = sac::load_identity_groups(groups_dir);
    sac::OutputMatrix matrix;
    if (verifier_path.size() > 4 && verifier_path.substr(verifier_path.size() - 4) == ".csv") {
        auto answers = sac::read_answers_csv(verifier_path);
        matrix = sac::fri_output_matrix_from_answers(groups, answers, quality);
    } else {
        auto model = std::make_shared<sac::zoo::ZooModel>(sac::zoo::load_model(verifier_path));
        std::shared_ptr<sac::zoo::EmbeddingVerifier> verifier;
        if (tau > -1.0) {
            verifier = std::make_shared<sac::zoo::EmbeddingVerifier>(model, tau);
        } else {
            sac::zoo::EerCalibration cal;
            verifier = sac::zoo::verifier_from_groups(model, groups, &cal);
            std::cerr << "calibrated tau=" << cal.tau << " (FAR=" << cal.far << ", FRR=" << cal.frr << ")\n";
        }
        sac::CachedVerifier cached(verifier);
        matrix = sac::fri_output_matrix(groups, cached, quality);
    }
    sac::save_output_matrix(matrix, out);
    std::cout << nlohmann::json{{"outputs", out}, {"rows", matrix.rows}, {"dims", matrix.dims},
                                {"kind", sac::output_kind_name(matrix.kind)},
                                {"probe_digest", sac::to_hex(matrix.probe_digest)}}
                     .dump(2)
              << "\n";
    return kExitOk;
}

int cmd_verdict(const std::string& source_fp, const std::vector<std::string>& suspect_fps,
                const std::vector<std::string>& irrelevant_fps, const std::vector<std::string>& adv_fps,
                const std::string& strategy_name, const std::string& out) {
    auto source = sac::load_correlation_matrix(source_fp);
    auto strategy = sac::threshold_strategy_from_name(strategy_name);

    std::vector<double> irrelevant_distances;
    std::vector<std::string> pool_names;
    for (const auto& path : irrelevant_fps) {
        auto fp = sac::load_correlation_matrix(path);
        irrelevant_distances.push_back(sac::fingerprint_distance(source, fp).value);
        pool_names.push_back(std::filesystem::path(path).filename().string());
    }
    sac::Threshold threshold;
    if (strategy == sac::ThresholdStrategy::worst_irrelevant) {
        threshold = sac::threshold_worst_irrelevant(irrelevant_distances, pool_names);
    } else {
        std::vector<double> adv_distances;
        for (const auto& path : adv_fps) {
            auto fp = sac::load_correlation_matrix(path);
            adv_distances.push_back(sac::fingerprint_distance(source, fp).value);
            pool_names.push_back(std::filesystem::path(path).filename().string());
        }
        threshold = sac::threshold_validation_mean(irrelevant_distances, adv_distances, pool_names);
    }

    std::vector<sac::Verdict> verdicts;
    bool any_stolen = false;
    for (const auto& path : suspect_fps) {
        auto fp = sac::load_correlation_matrix(path);
        double distance = sac::fingerprint_distance(source, fp).value;
        auto v = sac::decide(std::filesystem::path(path).filename().string(), distance, threshold);
        any_stolen = any_stolen || v.decision == sac::Decision::stolen;
        verdicts.push_back(std::move(v));
    }

    auto report = sac::audit_report(sac::to_hex(source.probe_digest), source.kernel.name(), threshold, verdicts);
    if (!out.empty()) sac::write_file(out, report.dump(2) + "\n");
    std::cout << report.dump(2) << "\n";
    return any_stolen ? kExitStolen : kExitOk;
}

int cmd_eval(const std::string& scores_path, bool has_threshold, double threshold, const std::string& out) {
    auto pool = sac::read_scores_csv(scores_path);
    auto report = sac::evaluate_pool(pool, has_threshold ? &threshold : nullptr);
    auto j = report.to_json();
    if (!out.empty()) sac::write_file(out, j.dump(2) + "\n");
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

int cmd_zoo_run(const std::string& config_path, const std::string& out_dir) {
    nlohmann::json config_json;
    try {
        auto bytes = sac::read_file(config_path);
        config_json = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
        throw sac::ParseError(std::string("bad experiment config: ") + e.what());
    }
    auto cfg = sac::zoo::ExperimentConfig::from_json(config_json);
    cfg.seed = seed_with_env_override(cfg.seed);
    auto result = sac::zoo::run_experiment(cfg, out_dir);
    std::cout << nlohmann::json{{"report", result.report_path.string()},
                                {"threshold", result.report["threshold"]["value"]},
                                {"pools", result.report["pools"]}}
                     .dump(2)
              << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sample-correlation model fingerprinting over JPEG-compressed probes"};
    app.require_subcommand(1);
    std::string workdir;
    app.add_option("--workdir", workdir, "directory all relative paths resolve against");

    // probe-gen
    auto* probe_gen = app.add_subcommand("probe-gen", "build a reproducible probe set");
    std::string pg_input = "synthetic", pg_out;
    int pg_count = 50, pg_quality = 10, pg_classes = 10, pg_per_class = 20, pg_size = 32;
    uint64_t pg_seed = 42;
    bool pg_clean = false;
    probe_gen->add_option("--input", pg_input, "image directory (.ppm/.pgm) or 'synthetic'");
    probe_gen->add_option("--count", pg_count, "number of probes")->check(CLI::PositiveNumber);
    probe_gen->add_option("--quality", pg_quality, "JPEG quality 1..100");
    probe_gen->add_option("--seed", pg_seed, "sampling seed");
    probe_gen->add_option("--out", pg_out, "output directory")->required();
    probe_gen->add_flag("--clean", pg_clean, "skip compression (ablation probes)");
    probe_gen->add_option("--synthetic-classes", pg_classes, "synthetic input: class count");
    probe_gen->add_option("--synthetic-per-class", pg_per_class, "synthetic input: images per class");
    probe_gen->add_option("--synthetic-size", pg_size, "synthetic input: image side length");

    // outputs
    auto* outputs = app.add_subcommand("outputs", "run a model over a probe set");
    std::string o_model, o_probes, o_out;
    outputs->add_option("--model", o_model, "model file (.sacm)")->required();
    outputs->add_option("--probes", o_probes, "probe directory")->required();
    outputs->add_option("--out", o_out, "output matrix file (.saco)")->required();

    // fingerprint
    auto* fingerprint = app.add_subcommand("fingerprint", "correlation matrix from an output matrix");
    std::string f_outputs, f_kernel = "cosine", f_out;
    double f_bandwidth = 0.0;
    fingerprint->add_option("--outputs", f_outputs, "output matrix file (.saco)")->required();
    fingerprint->add_option("--kernel", f_kernel, "cosine|rbf");
    fingerprint->add_option("--bandwidth", f_bandwidth, "rbf bandwidth (default: median heuristic)");
    fingerprint->add_option("--out", f_out, "fingerprint file (.sacc)")->required();

    // compare
    auto* compare = app.add_subcommand("compare", "distance between two fingerprints");
    std::string c_source, c_suspect;
    compare->add_option("--source", c_source, "source fingerprint")->required();
    compare->add_option("--suspect", c_suspect, "suspect fingerprint")->required();

    // fri
    auto* fri = app.add_subcommand("fri", "binary features for a verification model");
    std::string fr_groups, fr_verifier, fr_out;
    int fr_quality = 10;
    double fr_tau = -2.0;
    fri->add_option("--groups", fr_groups, "identity-group directory")->required();
    fri->add_option("--verifier", fr_verifier, "zoo model (.sacm) or recorded answers (.csv)")->required();
    fri->add_option("--quality", fr_quality, "JPEG quality for target images");
    fri->add_option("--tau", fr_tau, "verification threshold (default: EER calibration on references)");
    fri->add_option("--out", fr_out, "output matrix file (.saco)")->required();

    // verdict
    auto* verdict = app.add_subcommand("verdict", "threshold from irrelevant fingerprints, then decide suspects");
    std::string v_source, v_strategy = "worst-irrelevant", v_out;
    std::vector<std::string> v_suspects, v_irrelevant, v_adv;
    verdict->add_option("--source-fp", v_source, "source fingerprint")->required();
    verdict->add_option("--suspect-fp", v_suspects, "suspect fingerprints");
    verdict->add_option("--irrelevant-fp", v_irrelevant, "irrelevant-model fingerprints")->required();
    verdict->add_option("--adv-fp", v_adv, "adversarial-extraction fingerprints (validation-mean strategy)");
    verdict->add_option("--strategy", v_strategy, "worst-irrelevant|validation-mean");
    verdict->add_option("--out", v_out, "report path (report.json)");

    // eval
    auto* eval = app.add_subcommand("eval", "AUC / p-value / F1 over a labeled score pool");
    std::string e_scores, e_out;
    double e_threshold = 0.0;
    eval->add_option("--scores", e_scores, "scores.csv (name,score,label)")->required();
    auto* e_thr_opt = eval->add_option("--threshold", e_threshold, "decision threshold for F1");
    eval->add_option("--out", e_out, "eval report path");

    // zoo run
    auto* zoo = app.add_subcommand("zoo", "model-zoo experiments");
    auto* zoo_run = zoo->add_subcommand("run", "train the zoo and fingerprint every model");
    std::string z_config, z_out;
    zoo_run->add_option("--config", z_config, "experiment config (exp.json)")->required();
    zoo_run->add_option("--out", z_out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (!workdir.empty()) std::filesystem::current_path(workdir);
        if (app.got_subcommand(probe_gen))
            return cmd_probe_gen(pg_input, pg_count, pg_quality, pg_seed, pg_out, pg_clean, pg_classes,
                                 pg_per_class, pg_size);
        if (app.got_subcommand(outputs)) return cmd_outputs(o_model, o_probes, o_out);
        if (app.got_subcommand(fingerprint)) return cmd_fingerprint(f_outputs, f_kernel, f_bandwidth, f_out);
        if (app.got_subcommand(compare)) return cmd_compare(c_source, c_suspect);
        if (app.got_subcommand(fri)) return cmd_fri(fr_groups, fr_verifier, fr_quality, fr_tau, fr_out);
        if (app.got_subcommand(verdict))
            return cmd_verdict(v_source, v_suspects, v_irrelevant, v_adv, v_strategy, v_out);
        if (app.got_subcommand(eval)) return cmd_eval(e_scores, e_thr_opt->count() > 0, e_threshold, e_out);
        if (app.got_subcommand(zoo)) {
            if (zoo->got_subcommand(zoo_run)) return cmd_zoo_run(z_config, z_out);
            std::cerr << "zoo requires a subcommand (run)\n";
            return kExitError;
        }
    } catch (const sac::Error& e) {
        std::cerr << nlohmann::json{{"error", e.kind()}, {"message", e.what()}}.dump() << "\n";
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", "Unexpected"}, {"message", e.what()}}.dump() << "\n";
        return kExitError;
    }
    return kExitError;
}
