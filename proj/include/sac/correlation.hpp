#pragma once

// Sample-correlation fingerprints: pairwise kernel matrices over a model's
// probe outputs, and the normalized L1 distance between two such matrices.
// The distance between a source and a suspect matrix is the theft indicator.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <span>
#include <vector>

#include "sac/output_matrix.hpp"
#include "sac/sha256.hpp"

namespace sac {

enum class KernelKind : uint8_t { cosine = 0, rbf = 1 };

// Kernel descriptor. For RBF a non-positive bandwidth means "resolve from
// the data with the median heuristic when the matrix is built".
struct Kernel {
    KernelKind kind = KernelKind::cosine;
    double bandwidth = 0.0;

    static Kernel cosine() { return {KernelKind::cosine, 0.0}; }
    static Kernel rbf(double bandwidth = 0.0) { return {KernelKind::rbf, bandwidth}; }

    bool operator==(const Kernel&) const = default;

    std::string name() const { return kind == KernelKind::cosine ? "cosine" : "rbf"; }
};

inline Kernel kernel_from_name(const std::string& name, double bandwidth = 0.0) {
    if (name == "cosine") return Kernel::cosine();
    if (name == "rbf") return Kernel::rbf(bandwidth);
    throw ParseError("unknown kernel '" + name + "'");
}

inline double cosine_corr(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw ShapeMismatch("cosine of vectors with dims " + std::to_string(a.size()) + " and " +
                            std::to_string(b.size()));
    double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw DegenerateVector("cosine of a zero vector is undefined");
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

inline double rbf_corr(std::span<const double> a, std::span<const double> b, double bandwidth) {
    if (a.size() != b.size())
        throw ShapeMismatch("rbf of vectors with dims " + std::to_string(a.size()) + " and " +
                            std::to_string(b.size()));
    if (bandwidth <= 0.0) throw InvalidBandwidth("bandwidth must be positive, got " + std::to_string(bandwidth));
    double d2 = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        d2 += d * d;
    }
    double v = std::exp(-d2 / (2.0 * bandwidth * bandwidth));
    return std::max(v, std::numeric_limits<double>::min());  // keep the documented (0,1] range
}

// Median of all pairwise Euclidean distances between rows; 1.0 when the
// median is zero (all rows identical). The even-count median is the mean of
// the two middle values.
inline double median_bandwidth(const OutputMatrix& outputs) {
    if (outputs.rows < 2) throw InsufficientRows("median bandwidth needs at least 2 rows");
    std::vector<double> dists;
    dists.reserve(outputs.rows * (outputs.rows - 1) / 2);
    for (size_t i = 0; i < outputs.rows; ++i) {
        for (size_t j = i + 1; j < outputs.rows; ++j) {
            double d2 = 0;
            auto a = outputs.row(i), b = outputs.row(j);
            for (size_t k = 0; k < outputs.dims; ++k) {
                double d = a[k] - b[k];
                d2 += d * d;
            }
            dists.push_back(std::sqrt(d2));
        }
    }
    std::sort(dists.begin(), dists.end());
    size_t m = dists.size();
    double median = m % 2 == 1 ? dists[m / 2] : 0.5 * (dists[m / 2 - 1] + dists[m / 2]);
    return median == 0.0 ? 1.0 : median;
}

struct CorrelationMatrix {
    size_t n = 0;
    Kernel kernel;
    Digest probe_digest{};
    std::vector<double> entries;  // n x n, row-major, symmetric

    double at(size_t i, size_t j) const { return entries[i * n + j]; }
    double& at(size_t i, size_t j) { return entries[i * n + j]; }

    bool operator==(const CorrelationMatrix&) const = default;

    Digest digest() const;
};

namespace correlation_detail {

// Matrix-level cosine with the zero-row fallback: corr(0, x) = 0 and
// corr(0, 0) = 1. Probability rows can never be zero; this only fires for
// logit or bitvector inputs and is reported once per matrix build.
inline double cosine_with_fallback(std::span<const double> a, std::span<const double> b, size_t& degenerate_pairs) {
    double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 && nb == 0.0) {
        ++degenerate_pairs;
        return 1.0;
    }
    if (na == 0.0 || nb == 0.0) {
        ++degenerate_pairs;
        return 0.0;
    }
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

}  // namespace correlation_detail

// Builds the n x n correlation matrix C with C[i][j] = kernel(row_i, row_j).
// Entries below the diagonal mirror the upper triangle; both kernels are
// exactly symmetric in their arguments so this matches a full double loop
// bit for bit.
inline CorrelationMatrix correlation_matrix(const OutputMatrix& outputs, Kernel kernel) {
    if (outputs.rows < 2) throw InsufficientRows("correlation matrix needs at least 2 rows");
    Kernel resolved = kernel;
    if (kernel.kind == KernelKind::rbf && kernel.bandwidth <= 0.0)
        resolved.bandwidth = median_bandwidth(outputs);

    CorrelationMatrix c;
    c.n = outputs.rows;
    c.kernel = resolved;
    c.probe_digest = outputs.probe_digest;
    c.entries.resize(c.n * c.n);

    size_t degenerate_pairs = 0;
    for (size_t i = 0; i < c.n; ++i) {
        c.at(i, i) = 1.0;  // self-correlation, exact for both kernels
        for (size_t j = i + 1; j < c.n; ++j) {
            double v = resolved.kind == KernelKind::cosine
                           ? correlation_detail::cosine_with_fallback(outputs.row(i), outputs.row(j), degenerate_pairs)
                           : rbf_corr(outputs.row(i), outputs.row(j), resolved.bandwidth);
            c.at(i, j) = v;
            c.at(j, i) = v;
        }
    }
    if (degenerate_pairs > 0)
        std::cerr << "warning: cosine fallback applied to " << degenerate_pairs << " zero-vector pairs\n";
    return c;
}

struct FingerprintDistance {
    double value = 0.0;
    Digest source_digest{};   // digest of the source fingerprint file
    Digest suspect_digest{};  // digest of the suspect fingerprint file
};

// Normalized L1 distance: sum of |suspect - source| over all entries,
// divided by n^2. Summation runs row-major for reproducible rounding.
inline FingerprintDistance fingerprint_distance(const CorrelationMatrix& source, const CorrelationMatrix& suspect) {
    if (source.probe_digest != suspect.probe_digest)
        throw ProbeSetMismatch("fingerprints were computed on different probe sets");
    if (source.n != suspect.n)
        throw ShapeMismatch("fingerprint sizes differ: " + std::to_string(source.n) + " vs " +
                            std::to_string(suspect.n));
    if (!(source.kernel == suspect.kernel))
        throw KernelMismatch("fingerprints use different kernels (" + source.kernel.name() + " vs " +
                             suspect.kernel.name() + ")");
    double sum = 0;
    for (size_t i = 0; i < source.entries.size(); ++i) sum += std::abs(suspect.entries[i] - source.entries[i]);
    FingerprintDistance d;
    d.value = sum / (static_cast<double>(source.n) * static_cast<double>(source.n));
    d.source_digest = source.digest();
    d.suspect_digest = suspect.digest();
    return d;
}

inline constexpr char kSaccMagic[4] = {'S', 'A', 'C', 'C'};
inline constexpr uint16_t kSaccVersion = 1;

inline std::vector<uint8_t> serialize_correlation_matrix(const CorrelationMatrix& c) {
    ByteWriter w;
    w.bytes(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(kSaccMagic), 4));
    w.u16(kSaccVersion);
    w.u8(static_cast<uint8_t>(c.kernel.kind));
    w.f64(c.kernel.bandwidth);
    w.u64(c.n);
    w.bytes(c.probe_digest);
    for (double v : c.entries) w.f64(v);
    return w.data();
}

inline CorrelationMatrix deserialize_correlation_matrix(std::span<const uint8_t> bytes) {
    ByteReader r(bytes);
    auto magic = r.raw(4);
    if (std::memcmp(magic.data(), kSaccMagic, 4) != 0) throw ParseError("not a SACC file (bad magic)");
    if (r.u16() != kSaccVersion) throw ParseError("unsupported SACC version");
    CorrelationMatrix c;
    uint8_t kind = r.u8();
    if (kind > 1) throw ParseError("bad SACC kernel tag " + std::to_string(kind));
    c.kernel.kind = static_cast<KernelKind>(kind);
    c.kernel.bandwidth = r.f64();
    c.n = r.u64();
    auto dig = r.raw(32);
    std::copy(dig.begin(), dig.end(), c.probe_digest.begin());
    if (c.n > (1ull << 16)) throw ParseError("SACC dimension implausibly large");
    c.entries.resize(c.n * c.n);
    for (auto& v : c.entries) {
        v = r.f64();
        if (!std::isfinite(v)) throw ParseError("SACC entry is non-finite");
    }
    if (!r.done()) throw ParseError("trailing bytes after SACC payload");
    return c;
}

inline Digest CorrelationMatrix::digest() const { return sha256(serialize_correlation_matrix(*this)); }

inline void save_correlation_matrix(const CorrelationMatrix& c, const std::filesystem::path& path) {
    write_file(path, serialize_correlation_matrix(c));
}

inline CorrelationMatrix load_correlation_matrix(const std::filesystem::path& path) {
    auto bytes = read_file(path);
    return deserialize_correlation_matrix(bytes);
}

}  // namespace sac
