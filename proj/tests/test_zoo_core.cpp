#include <doctest.h>

#include <set>

#include "oracles.hpp"
#include "sac/zoo/dataset.hpp"
#include "sac/zoo/model.hpp"
#include "sac/zoo/train.hpp"

using namespace sac;
using namespace sac::zoo;

namespace {

// tiny quickly-trainable setup shared by the unit tests
struct TinyZoo {
    ZooDataset data = gen_synthetic(901, 4, 30, 16);
    Arch arch = [] {
        Arch a = Arch::mlp(4, {24, 12});
        a.input_width = 16;
        a.input_height = 16;
        return a;
    }();
    std::vector<double> x = normalize_images(data.images);
};

TrainConfig tiny_config(uint64_t seed, int epochs = 4) {
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.batch_size = 16;
    cfg.learning_rate = 0.1;
    cfg.momentum = 0.9;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("gen_synthetic is deterministic and classes are balanced") {
    ZooDataset a = gen_synthetic(5, 3, 10, 16);
    ZooDataset b = gen_synthetic(5, 3, 10, 16);
    REQUIRE(a.size() == 30);
    CHECK(a.images == b.images);
    CHECK(a.labels == b.labels);
    ZooDataset c = gen_synthetic(6, 3, 10, 16);
    CHECK(a.images != c.images);
    for (const auto& img : a.images) img.validate();
}

TEST_CASE("defender/attacker splits are disjoint and stratified") {
    ZooDataset full = gen_synthetic(17, 5, 12, 16);
    auto [defender, attacker] = split_defender_attacker(full, 3);
    CHECK(defender.size() + attacker.size() == full.size());
    std::set<std::string> seen;
    for (const auto& img : defender.images) seen.insert(to_hex(img.digest()));
    for (const auto& img : attacker.images) CHECK(seen.count(to_hex(img.digest())) == 0);
    for (int cls = 0; cls < 5; ++cls) {
        CHECK(std::count(defender.labels.begin(), defender.labels.end(), cls) > 0);
        CHECK(std::count(attacker.labels.begin(), attacker.labels.end(), cls) > 0);
    }
}

TEST_CASE("cifar10 binary reader parses records and rejects bad sizes") {
    // fabricate two records
    std::vector<uint8_t> bytes(2 * 3073, 0);
    bytes[0] = 7;                    // label
    bytes[1] = 200;                  // R plane, pixel (0,0)
    bytes[1 + 1024] = 100;           // G plane
    bytes[1 + 2048] = 50;            // B plane
    bytes[3073] = 2;
    auto path = std::filesystem::temp_directory_path() / "sac_cifar_test.bin";
    write_file(path, bytes);
    ZooDataset ds = load_cifar10_binary(path);
    REQUIRE(ds.size() == 2);
    CHECK(ds.labels[0] == 7);
    CHECK(ds.images[0].at(0, 0, 0) == 200);
    CHECK(ds.images[0].at(0, 0, 1) == 100);
    CHECK(ds.images[0].at(0, 0, 2) == 50);

    bytes.pop_back();
    write_file(path, bytes);
    CHECK_THROWS_AS(load_cifar10_binary(path), ParseError);
    std::filesystem::remove(path);
}

TEST_CASE("model init and SACM round trip") {
    Arch arch = Arch::conv(6, 4, {10});
    arch.input_width = 16;
    arch.input_height = 16;
    ZooModel m = init_model(arch, 77);
    m.lineage.kind = "irrelevant";
    m.lineage.params = {{"seed", 77}};
    auto path = std::filesystem::temp_directory_path() / "sac_model_test.sacm";
    save_model(m, path);
    ZooModel back = load_model(path);
    CHECK(back.arch == m.arch);
    CHECK(back.train_seed == m.train_seed);
    CHECK(back.lineage.kind == "irrelevant");
    REQUIRE(back.stem.has_value());
    CHECK(back.stem->w == m.stem->w);
    for (size_t i = 0; i < m.dense.size(); ++i) {
        CHECK(back.dense[i].w == m.dense[i].w);
        CHECK(back.dense[i].b == m.dense[i].b);
    }

    auto bytes = read_file(path);
    bytes.resize(bytes.size() - 9);
    write_file(path, bytes);
    CHECK_THROWS_AS(load_model(path), ParseError);
    std::filesystem::remove(path);
}

TEST_CASE("training is bit-deterministic in the seed") {
    TinyZoo z;
    ZooModel a = train_classifier(z.arch, z.x, z.data.labels, tiny_config(42), Lineage{"source", {}});
    ZooModel b = train_classifier(z.arch, z.x, z.data.labels, tiny_config(42), Lineage{"source", {}});
    for (size_t i = 0; i < a.dense.size(); ++i) {
        CHECK(a.dense[i].w == b.dense[i].w);
        CHECK(a.dense[i].b == b.dense[i].b);
    }
    ZooModel c = train_classifier(z.arch, z.x, z.data.labels, tiny_config(43), Lineage{"source", {}});
    CHECK(a.dense[0].w != c.dense[0].w);
}

TEST_CASE("training reduces the loss on a learnable task") {
    TinyZoo z;
    auto loss_fn = cross_entropy_loss(z.data.labels);
    ZooModel m = init_model(z.arch, 42);
    double initial = mean_loss(m, z.x, z.data.labels.size(), loss_fn);
    std::vector<double> history;
    fit(m, z.x, z.data.labels.size(), loss_fn, tiny_config(42, 2), TrainScope::all, &history);
    REQUIRE(history.size() == 2);
    CHECK(history[0] < initial);
    CHECK(accuracy(m, z.x, z.data.labels) > 0.5);
}

TEST_CASE("non-finite loss raises TrainingDiverged") {
    TinyZoo z;
    std::vector<double> poisoned = z.x;
    poisoned[7] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(train_classifier(z.arch, poisoned, z.data.labels, tiny_config(42, 1), Lineage{"source", {}}),
                    TrainingDiverged);
}

TEST_CASE("conv arch trains too and embeds at the declared width") {
    TinyZoo z;
    Arch conv = Arch::conv(4, 4, {12});
    conv.input_width = 16;
    conv.input_height = 16;
    std::vector<double> history;
    ZooModel m = train_classifier(conv, z.x, z.data.labels, tiny_config(9, 3), Lineage{"irrelevant", {}}, &history);
    CHECK(history.back() < history.front());
    auto e = m.embed_one({z.x.data(), static_cast<size_t>(conv.input_dim())});
    CHECK(e.size() == 12);
}

TEST_CASE("softmax at T=1 equals plain softmax; tempered rows sum to 1") {
    TinyZoo z;
    ZooModel m = init_model(z.arch, 3);
    SoftTargets t1 = soft_targets_from(m, z.x, 10, 1.0);
    SoftTargets t20 = soft_targets_from(m, z.x, 10, 20.0);
    for (size_t i = 0; i < 10; ++i) {
        auto p = m.probabilities_one({z.x.data() + i * z.arch.input_dim(), static_cast<size_t>(z.arch.input_dim())});
        double sum20 = 0;
        for (size_t j = 0; j < 4; ++j) {
            CHECK(t1.probs_t[i * 4 + j] == doctest::Approx(p[j]).epsilon(1e-15));
            sum20 += t20.probs_t[i * 4 + j];
        }
        CHECK(sum20 == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(t1.labels[i] == t20.labels[i]);  // argmax is temperature-free
    }
}

TEST_CASE("gradient spot check: CE, KD and input gradients match finite differences") {
    Rng rng(2718);
    for (int trial = 0; trial < 4; ++trial) {
        Arch arch;
        if (trial % 2 == 0) {
            arch = Arch::mlp(3, {9, 6});
            arch.input_width = 2; arch.input_height = 2; arch.input_channels = 3;
        } else {
            arch = Arch::conv(3, 3, {7});
            arch.input_width = 4; arch.input_height = 4; arch.input_channels = 3;
        }
        ZooModel m = init_model(arch, 100 + trial);
        size_t batch = 3, dim = arch.input_dim();
        std::vector<double> x(batch * dim);
        for (auto& v : x) v = rng.real();
        std::vector<int> y(batch);
        for (auto& v : y) v = static_cast<int>(rng.index(3));

        auto ce_stats = oracle::check_weight_gradients(m, x, batch, cross_entropy_loss(y));
        CHECK(ce_stats.checked > 0);
        CHECK(ce_stats.max_rel_err <= 1e-5);

        ZooModel teacher = init_model(arch, 500 + trial);
        SoftTargets targets = soft_targets_from(teacher, x, batch, 20.0);
        auto kd_stats = oracle::check_weight_gradients(m, x, batch, distillation_loss(targets, 0.9));
        CHECK(kd_stats.checked > 0);
        CHECK(kd_stats.max_rel_err <= 1e-5);

        auto in_stats = oracle::check_input_gradients(m, x, batch, y);
        CHECK(in_stats.checked > 0);
        CHECK(in_stats.max_rel_err <= 1e-5);
    }
}

TEST_CASE("finetune with scope=last only updates the head") {
    TinyZoo z;
    ZooModel m = train_classifier(z.arch, z.x, z.data.labels, tiny_config(11, 2), Lineage{"source", {}});
    ZooModel before = m;
    fit(m, z.x, z.data.labels.size(), cross_entropy_loss(z.data.labels), tiny_config(12, 2), TrainScope::last);
    CHECK(m.dense[0].w == before.dense[0].w);
    CHECK(m.dense[1].w == before.dense[1].w);
    CHECK(m.dense[2].w != before.dense[2].w);
}
