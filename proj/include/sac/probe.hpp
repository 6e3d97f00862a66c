#pragma once

// Probe-set construction and the on-disk probe manifest. A probe set is a
// content-addressed, reproducible collection of compressed sample images:
// fixed (images, count, quality, seed) always yields byte-identical probes
// and the same manifest digest.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "sac/image.hpp"
#include "sac/jpeg.hpp"
#include "sac/rng.hpp"

namespace sac {

enum class Compression { jpeg, none };

inline std::string compression_name(Compression c) { return c == Compression::jpeg ? "jpeg" : "none"; }

inline Compression compression_from_name(const std::string& s) {
    if (s == "jpeg") return Compression::jpeg;
    if (s == "none") return Compression::none;
    throw ParseError("unknown compression '" + s + "'");
}

struct ProbeImage {
    uint32_t id = 0;
    RawImage image;
    int quality = 0;
    Digest source_digest{};

    bool operator==(const ProbeImage&) const = default;
};

struct ProbeSet {
    std::vector<ProbeImage> probes;
    uint64_t seed = 0;
    int quality = 0;
    Compression compression = Compression::jpeg;
    Digest manifest_digest{};

    size_t size() const { return probes.size(); }

    // SHA-256 over all probe pixel bytes in id order, then the canonical
    // metadata block. Recomputable from contents alone.
    Digest compute_digest() const {
        Sha256 h;
        for (const auto& p : probes) h.update(p.image.pixels);
        std::string meta = "sac-probe-manifest-v1\n";
        meta += "seed=" + std::to_string(seed) + "\n";
        meta += "quality=" + std::to_string(quality) + "\n";
        meta += "compression=" + compression_name(compression) + "\n";
        meta += "n=" + std::to_string(probes.size()) + "\n";
        for (const auto& p : probes) {
            meta += "probe id=" + std::to_string(p.id) + " w=" + std::to_string(p.image.width) +
                    " h=" + std::to_string(p.image.height) + " c=" + std::to_string(p.image.channels) +
                    " source=" + to_hex(p.source_digest) + "\n";
        }
        h.update(meta);
        return h.finalize();
    }

    void refresh_digest() { manifest_digest = compute_digest(); }

    bool operator==(const ProbeSet&) const = default;
};

// Samples `count` images without replacement (seeded partial Fisher-Yates,
// so smaller counts are prefixes of larger ones at the same seed), runs each
// through the JPEG cycle, and assigns ids in sampling order.
inline ProbeSet build_probe_set(const std::vector<RawImage>& images, size_t count, int quality, uint64_t seed,
                                Compression compression = Compression::jpeg) {
    if (count < 1)
        throw InsufficientImages("probe count must be at least 1");
    if (count > images.size())
        throw InsufficientImages("requested " + std::to_string(count) + " probes from " +
                                 std::to_string(images.size()) + " images");
    if (quality < 1 || quality > 100)
        throw InvalidQuality("quality must be in [1, 100], got " + std::to_string(quality));

    Rng rng(seed);
    auto picks = rng.sample_without_replacement(images.size(), count);

    ProbeSet set;
    set.seed = seed;
    set.quality = quality;
    set.compression = compression;
    set.probes.reserve(count);
    for (size_t i = 0; i < picks.size(); ++i) {
        const RawImage& raw = images[picks[i]];
        raw.validate();
        ProbeImage p;
        p.id = static_cast<uint32_t>(i);
        p.quality = quality;
        p.source_digest = raw.digest();
        p.image = compression == Compression::jpeg ? jpeg_roundtrip(raw, quality) : raw;
        set.probes.push_back(std::move(p));
    }
    set.refresh_digest();
    return set;
}

inline std::string probe_pixel_filename(uint32_t id) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "probe_%04u.raw", id);
    return buf;
}

// Writes manifest.json plus one raw pixel file per probe.
inline void save_probe_set(const ProbeSet& set, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["version"] = 1;
    manifest["seed"] = set.seed;
    manifest["quality"] = set.quality;
    manifest["compression"] = compression_name(set.compression);
    manifest["n"] = set.probes.size();
    manifest["digest"] = to_hex(set.manifest_digest);
    auto& probes = manifest["probes"] = nlohmann::json::array();
    for (const auto& p : set.probes) {
        std::string file = probe_pixel_filename(p.id);
        probes.push_back({{"id", p.id},
                          {"width", p.image.width},
                          {"height", p.image.height},
                          {"channels", p.image.channels},
                          {"source_digest", to_hex(p.source_digest)},
                          {"pixel_file", file}});
        write_file(dir / file, p.image.pixels);
    }
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

inline ProbeSet load_probe_set(const std::filesystem::path& dir) {
    nlohmann::json manifest;
    try {
        auto bytes = read_file(dir / "manifest.json");
        manifest = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad probe manifest: ") + e.what());
    }

    ProbeSet set;
    try {
        if (manifest.at("version").get<int>() != 1)
            throw ParseError("unsupported probe manifest version");
        set.seed = manifest.at("seed").get<uint64_t>();
        set.quality = manifest.at("quality").get<int>();
        set.compression = compression_from_name(manifest.value("compression", "jpeg"));
        Digest recorded = digest_from_hex(manifest.at("digest").get<std::string>());
        size_t n = manifest.at("n").get<size_t>();
        const auto& probes = manifest.at("probes");
        if (probes.size() != n) throw ParseError("probe count does not match manifest n");
        for (const auto& entry : probes) {
            ProbeImage p;
            p.id = entry.at("id").get<uint32_t>();
            p.quality = set.quality;
            p.source_digest = digest_from_hex(entry.at("source_digest").get<std::string>());
            p.image.width = entry.at("width").get<int>();
            p.image.height = entry.at("height").get<int>();
            p.image.channels = entry.at("channels").get<int>();
            auto pixels = read_file(dir / entry.at("pixel_file").get<std::string>());
            size_t expected = static_cast<size_t>(p.image.width) * p.image.height * p.image.channels;
            if (pixels.size() != expected)
                throw ParseError("pixel file for probe " + std::to_string(p.id) + " has " +
                                 std::to_string(pixels.size()) + " bytes, expected " + std::to_string(expected));
            p.image.pixels = std::move(pixels);
            set.probes.push_back(std::move(p));
        }
        for (size_t i = 0; i < set.probes.size(); ++i)
            if (set.probes[i].id != i) throw ParseError("probe ids must be 0..n-1 in order");
        set.manifest_digest = set.compute_digest();
        if (set.manifest_digest != recorded)
            throw IntegrityError("probe manifest digest mismatch: recorded " + to_hex(recorded) +
                                 ", recomputed " + to_hex(set.manifest_digest));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad probe manifest: ") + e.what());
    }
    return set;
}

}  // namespace sac
