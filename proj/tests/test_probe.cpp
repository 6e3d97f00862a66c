#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "sac/probe.hpp"
#include "sac/zoo/dataset.hpp"

using namespace sac;
namespace fs = std::filesystem;

namespace {

std::vector<RawImage> pool_images(size_t n, uint64_t seed = 404) {
    Rng rng(seed);
    std::vector<RawImage> imgs;
    for (size_t i = 0; i < n; ++i) {
        RawImage img = make_image(16, 16, 3);
        for (auto& p : img.pixels) p = static_cast<uint8_t>(rng.index(256));
        imgs.push_back(std::move(img));
    }
    return imgs;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("sac_test_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static size_t& counter() {
        static size_t c = 0;
        return c;
    }
};

}  // namespace

TEST_CASE("build_probe_set is reproducible and ordered") {
    auto imgs = pool_images(80);
    ProbeSet a = build_probe_set(imgs, 50, 10, 7);
    ProbeSet b = build_probe_set(imgs, 50, 10, 7);
    CHECK(a == b);
    CHECK(a.manifest_digest == b.manifest_digest);
    REQUIRE(a.size() == 50);
    for (size_t i = 0; i < a.size(); ++i) CHECK(a.probes[i].id == i);
    CHECK(a.manifest_digest == a.compute_digest());
}

TEST_CASE("25-probe set is a prefix of the 50-probe set at the same seed") {
    auto imgs = pool_images(80);
    ProbeSet big = build_probe_set(imgs, 50, 10, 7);
    ProbeSet small = build_probe_set(imgs, 25, 10, 7);
    REQUIRE(small.size() == 25);
    for (size_t i = 0; i < 25; ++i) CHECK(small.probes[i].source_digest == big.probes[i].source_digest);
    CHECK(small.manifest_digest != big.manifest_digest);
}

TEST_CASE("different seeds select different sources") {
    auto imgs = pool_images(80);
    ProbeSet a = build_probe_set(imgs, 25, 10, 1);
    ProbeSet b = build_probe_set(imgs, 25, 10, 2);
    bool any_diff = false;
    for (size_t i = 0; i < 25; ++i) any_diff |= a.probes[i].source_digest != b.probes[i].source_digest;
    CHECK(any_diff);
}

TEST_CASE("probe errors") {
    auto imgs = pool_images(10);
    CHECK_THROWS_AS(build_probe_set(imgs, 11, 10, 0), InsufficientImages);
    CHECK_THROWS_AS(build_probe_set(imgs, 0, 10, 0), InsufficientImages);
    CHECK_THROWS_AS(build_probe_set(imgs, 5, 0, 0), InvalidQuality);
}

TEST_CASE("uncompressed probe sets keep the raw pixels") {
    auto imgs = pool_images(12);
    ProbeSet clean = build_probe_set(imgs, 4, 10, 3, Compression::none);
    ProbeSet jc = build_probe_set(imgs, 4, 10, 3, Compression::jpeg);
    for (size_t i = 0; i < 4; ++i) {
        CHECK(clean.probes[i].source_digest == jc.probes[i].source_digest);
        CHECK(clean.probes[i].image.digest() == clean.probes[i].source_digest);
    }
    CHECK(clean.manifest_digest != jc.manifest_digest);
}

TEST_CASE("save/load round trip preserves everything") {
    TempDir dir;
    auto imgs = pool_images(60);
    ProbeSet set = build_probe_set(imgs, 50, 10, 11);
    save_probe_set(set, dir.path);
    ProbeSet loaded = load_probe_set(dir.path);
    CHECK(loaded == set);
    CHECK(loaded.manifest_digest == set.manifest_digest);
}

TEST_CASE("tampered manifest fails with IntegrityError") {
    TempDir dir;
    auto imgs = pool_images(20);
    ProbeSet set = build_probe_set(imgs, 5, 10, 11);
    save_probe_set(set, dir.path);
    // flip one pixel byte on disk
    auto file = dir.path / probe_pixel_filename(2);
    auto bytes = read_file(file);
    bytes[0] ^= 0xFF;
    write_file(file, bytes);
    CHECK_THROWS_AS(load_probe_set(dir.path), IntegrityError);
}

TEST_CASE("truncated pixel file fails with ParseError, not a partial set") {
    TempDir dir;
    auto imgs = pool_images(20);
    ProbeSet set = build_probe_set(imgs, 5, 10, 11);
    save_probe_set(set, dir.path);
    auto file = dir.path / probe_pixel_filename(1);
    auto bytes = read_file(file);
    bytes.resize(bytes.size() / 2);
    write_file(file, bytes);
    CHECK_THROWS_AS(load_probe_set(dir.path), ParseError);
}

TEST_CASE("corrupted manifest json fails with ParseError") {
    TempDir dir;
    auto imgs = pool_images(20);
    save_probe_set(build_probe_set(imgs, 3, 10, 1), dir.path);
    write_file(dir.path / "manifest.json", std::string("{not json"));
    CHECK_THROWS_AS(load_probe_set(dir.path), ParseError);
}

TEST_CASE("pnm image round trip") {
    TempDir dir;
    auto imgs = pool_images(1);
    save_pnm(imgs[0], dir.path / "img.ppm");
    RawImage back = load_pnm(dir.path / "img.ppm");
    CHECK(back == imgs[0]);
}
