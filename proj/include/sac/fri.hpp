#pragma once

// Feature-from-reference-images for verification models. A verifier only
// answers same/different, so each target image gets a binary feature vector:
// the JPEG-compressed target paired against n same-identity references. The
// bitvector rows then feed the ordinary correlation pipeline.

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "sac/image.hpp"
#include "sac/jpeg.hpp"
#include "sac/output_matrix.hpp"

namespace sac {

struct IdentityGroup {
    std::string identity_id;
    RawImage target;
    std::vector<RawImage> references;

    void validate() const {
        if (references.empty()) throw ShapeMismatch("identity group '" + identity_id + "' has no references");
        target.validate();
        Digest t = target.digest();
        for (const auto& r : references) {
            r.validate();
            if (r.digest() == t)
                throw InvalidImage("target of group '" + identity_id + "' appears among its references");
        }
    }
};

struct FriFeature {
    std::string identity_id;
    std::vector<uint8_t> bits;  // 0/1 per reference, in reference order
};

// Abstract verification model: verify(a, b) in {0, 1}, deterministic for
// fixed inputs within one audit run.
class Verifier {
public:
    virtual ~Verifier() = default;
    virtual int verify(const RawImage& a, const RawImage& b) = 0;
};

class FunctionVerifier : public Verifier {
public:
    explicit FunctionVerifier(std::function<int(const RawImage&, const RawImage&)> fn) : fn_(std::move(fn)) {}
    int verify(const RawImage& a, const RawImage& b) override { return fn_(a, b); }

private:
    std::function<int(const RawImage&, const RawImage&)> fn_;
};

// Memoizes answers per (target digest, reference digest) so repeated pairs
// cost one query. Serializes calls; the underlying verifier may be anything.
class CachedVerifier : public Verifier {
public:
    explicit CachedVerifier(std::shared_ptr<Verifier> inner) : inner_(std::move(inner)) {}

    int verify(const RawImage& a, const RawImage& b) override {
        auto key = std::make_pair(a.digest(), b.digest());
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        int bit = inner_->verify(a, b);
        cache_.emplace(key, bit);
        return bit;
    }

    size_t cache_size() const { return cache_.size(); }

private:
    std::shared_ptr<Verifier> inner_;
    std::map<std::pair<Digest, Digest>, int> cache_;
};

inline FriFeature fri_feature(const IdentityGroup& group, Verifier& verifier, int quality) {
    group.validate();
    RawImage compressed = jpeg_roundtrip(group.target, quality);
    FriFeature f;
    f.identity_id = group.identity_id;
    f.bits.reserve(group.references.size());
    for (const auto& ref : group.references) {
        int bit = verifier.verify(compressed, ref);
        if (bit != 0 && bit != 1)
            throw ProtocolViolation("verifier returned " + std::to_string(bit) + " for group '" +
                                    group.identity_id + "' (expected 0 or 1)");
        f.bits.push_back(static_cast<uint8_t>(bit));
    }
    return f;
}

// Content digest of an identity-group collection; plays the probe-digest
// role for FRI output matrices.
inline Digest identity_groups_digest(const std::vector<IdentityGroup>& groups, int quality) {
    Sha256 h;
    for (const auto& g : groups) {
        h.update(g.target.pixels);
        for (const auto& r : g.references) h.update(r.pixels);
    }
    std::string meta = "sac-fri-groups-v1\nquality=" + std::to_string(quality) + "\n";
    for (const auto& g : groups) {
        meta += "identity " + g.identity_id + " refs=" + std::to_string(g.references.size()) + " target=" +
                to_hex(g.target.digest()) + "\n";
    }
    h.update(meta);
    return h.finalize();
}

// One row per identity group, one column per reference; kind=bitvector.
inline OutputMatrix fri_output_matrix(const std::vector<IdentityGroup>& groups, Verifier& verifier, int quality) {
    if (groups.size() < 2) throw InsufficientRows("FRI needs at least 2 identity groups");
    size_t n_refs = groups.front().references.size();
    for (const auto& g : groups)
        if (g.references.size() != n_refs)
            throw ShapeMismatch("group '" + g.identity_id + "' has " + std::to_string(g.references.size()) +
                                " references, expected " + std::to_string(n_refs));
    OutputMatrix m;
    m.rows = groups.size();
    m.dims = n_refs;
    m.kind = OutputKind::bitvector;
    m.probe_digest = identity_groups_digest(groups, quality);
    m.values.reserve(m.rows * m.dims);
    for (const auto& g : groups) {
        FriFeature f = fri_feature(g, verifier, quality);
        for (uint8_t b : f.bits) m.values.push_back(static_cast<double>(b));
    }
    m.validate();
    return m;
}

// ---- on-disk identity-group manifest -------------------------------------

inline void save_identity_groups(const std::vector<IdentityGroup>& groups, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json j;
    j["version"] = 1;
    auto& ids = j["identities"] = nlohmann::json::array();
    size_t file_no = 0;
    auto dump_image = [&](const RawImage& img) {
        char name[32];
        std::snprintf(name, sizeof(name), "img_%05zu.raw", file_no++);
        write_file(dir / name, img.pixels);
        return nlohmann::json{{"width", img.width}, {"height", img.height}, {"channels", img.channels},
                              {"file", std::string(name)}};
    };
    for (const auto& g : groups) {
        nlohmann::json entry;
        entry["id"] = g.identity_id;
        entry["target"] = dump_image(g.target);
        auto& refs = entry["references"] = nlohmann::json::array();
        for (const auto& r : g.references) refs.push_back(dump_image(r));
        ids.push_back(std::move(entry));
    }
    write_file(dir / "groups.json", j.dump(2) + "\n");
}

inline std::vector<IdentityGroup> load_identity_groups(const std::filesystem::path& dir) {
    nlohmann::json j;
    try {
        auto bytes = read_file(dir / "groups.json");
        j = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad groups manifest: ") + e.what());
    }
    std::vector<IdentityGroup> groups;
    try {
        auto load_image = [&](const nlohmann::json& entry) {
            RawImage img;
            img.width = entry.at("width").get<int>();
            img.height = entry.at("height").get<int>();
            img.channels = entry.at("channels").get<int>();
            auto pixels = read_file(dir / entry.at("file").get<std::string>());
            size_t expected = static_cast<size_t>(img.width) * img.height * img.channels;
            if (pixels.size() != expected) throw ParseError("group pixel file has unexpected size");
            img.pixels = std::move(pixels);
            return img;
        };
        for (const auto& entry : j.at("identities")) {
            IdentityGroup g;
            g.identity_id = entry.at("id").get<std::string>();
            g.target = load_image(entry.at("target"));
            for (const auto& r : entry.at("references")) g.references.push_back(load_image(r));
            g.validate();
            groups.push_back(std::move(g));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad groups manifest: ") + e.what());
    }
    return groups;
}

// ---- recorded answer tables ----------------------------------------------

// answers.csv rows: identity_id, ref_index, bit. A table recorded from one
// run reproduces the FRI matrix exactly; rows depend only on answers.
using AnswerTable = std::map<std::pair<std::string, size_t>, int>;

inline AnswerTable read_answers_csv(const std::filesystem::path& path) {
    auto bytes = read_file(path);
    std::string text(bytes.begin(), bytes.end());
    std::istringstream in(text);
    AnswerTable table;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (lineno == 1 && line == "identity_id,ref_index,bit") continue;
        auto c1 = line.find(',');
        auto c2 = line.rfind(',');
        if (c1 == std::string::npos || c2 == c1) throw ParseError("bad answers row at line " + std::to_string(lineno));
        try {
            std::string id = line.substr(0, c1);
            size_t ref = std::stoul(line.substr(c1 + 1, c2 - c1 - 1));
            int bit = std::stoi(line.substr(c2 + 1));
            if (bit != 0 && bit != 1) throw ParseError("answer bit must be 0 or 1 at line " + std::to_string(lineno));
            table[{id, ref}] = bit;
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception&) {
            throw ParseError("bad answers row at line " + std::to_string(lineno));
        }
    }
    return table;
}

inline void write_answers_csv(const AnswerTable& table, const std::filesystem::path& path) {
    std::string out = "identity_id,ref_index,bit\n";
    for (const auto& [key, bit] : table)
        out += key.first + "," + std::to_string(key.second) + "," + std::to_string(bit) + "\n";
    write_file(path, out);
}

inline OutputMatrix fri_output_matrix_from_answers(const std::vector<IdentityGroup>& groups,
                                                   const AnswerTable& answers, int quality) {
    if (groups.size() < 2) throw InsufficientRows("FRI needs at least 2 identity groups");
    size_t n_refs = groups.front().references.size();
    OutputMatrix m;
    m.rows = groups.size();
    m.dims = n_refs;
    m.kind = OutputKind::bitvector;
    m.probe_digest = identity_groups_digest(groups, quality);
    for (const auto& g : groups) {
        if (g.references.size() != n_refs)
            throw ShapeMismatch("group '" + g.identity_id + "' has inconsistent reference count");
        for (size_t k = 0; k < n_refs; ++k) {
            auto it = answers.find({g.identity_id, k});
            if (it == answers.end())
                throw ParseError("answer table is missing (" + g.identity_id + ", " + std::to_string(k) + ")");
            m.values.push_back(static_cast<double>(it->second));
        }
    }
    m.validate();
    return m;
}

}  // namespace sac
