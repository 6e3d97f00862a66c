#pragma once

// A model's outputs over a probe set, one row per probe in id order, plus
// the SACO binary format that carries the probe digest downstream.

#include <cmath>
#include <filesystem>
#include <span>
#include <vector>

#include "sac/common.hpp"

namespace sac {

enum class OutputKind : uint8_t { probability = 0, logit = 1, bitvector = 2 };

inline std::string output_kind_name(OutputKind k) {
    switch (k) {
        case OutputKind::probability: return "probability";
        case OutputKind::logit: return "logit";
        case OutputKind::bitvector: return "bitvector";
    }
    throw ParseError("unknown output kind");
}

struct OutputMatrix {
    size_t rows = 0;
    size_t dims = 0;
    OutputKind kind = OutputKind::probability;
    Digest probe_digest{};
    std::vector<double> values;  // rows x dims, row-major

    std::span<const double> row(size_t i) const { return {values.data() + i * dims, dims}; }
    double& at(size_t i, size_t j) { return values[i * dims + j]; }
    double at(size_t i, size_t j) const { return values[i * dims + j]; }

    void validate() const {
        if (values.size() != rows * dims)
            throw ShapeMismatch("output matrix holds " + std::to_string(values.size()) + " values, expected " +
                                std::to_string(rows * dims));
        for (double v : values)
            if (!std::isfinite(v)) throw ParseError("output matrix contains a non-finite value");
        if (kind == OutputKind::probability) {
            for (size_t i = 0; i < rows; ++i) {
                double sum = 0;
                for (double v : row(i)) {
                    if (v < 0) throw ParseError("probability row " + std::to_string(i) + " has a negative entry");
                    sum += v;
                }
                if (std::abs(sum - 1.0) > 1e-9)
                    throw ParseError("probability row " + std::to_string(i) + " sums to " + std::to_string(sum));
            }
        } else if (kind == OutputKind::bitvector) {
            for (double v : values)
                if (v != 0.0 && v != 1.0) throw ParseError("bitvector entry must be 0 or 1");
        }
    }
};

inline constexpr char kSacoMagic[4] = {'S', 'A', 'C', 'O'};
inline constexpr uint16_t kSacoVersion = 1;

inline std::vector<uint8_t> serialize_output_matrix(const OutputMatrix& m) {
    m.validate();
    ByteWriter w;
    w.bytes(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(kSacoMagic), 4));
    w.u16(kSacoVersion);
    w.u8(static_cast<uint8_t>(m.kind));
    w.u64(m.rows);
    w.u64(m.dims);
    w.bytes(m.probe_digest);
    for (double v : m.values) w.f64(v);
    return w.data();
}

inline OutputMatrix deserialize_output_matrix(std::span<const uint8_t> bytes) {
    ByteReader r(bytes);
    auto magic = r.raw(4);
    if (std::memcmp(magic.data(), kSacoMagic, 4) != 0) throw ParseError("not a SACO file (bad magic)");
    if (r.u16() != kSacoVersion) throw ParseError("unsupported SACO version");
    OutputMatrix m;
    uint8_t kind = r.u8();
    if (kind > 2) throw ParseError("bad SACO output kind " + std::to_string(kind));
    m.kind = static_cast<OutputKind>(kind);
    m.rows = r.u64();
    m.dims = r.u64();
    auto dig = r.raw(32);
    std::copy(dig.begin(), dig.end(), m.probe_digest.begin());
    if (m.rows != 0 && m.dims > (1ull << 32) / m.rows) throw ParseError("SACO dimensions implausibly large");
    m.values.resize(m.rows * m.dims);
    for (auto& v : m.values) v = r.f64();
    if (!r.done()) throw ParseError("trailing bytes after SACO payload");
    m.validate();
    return m;
}

inline void save_output_matrix(const OutputMatrix& m, const std::filesystem::path& path) {
    write_file(path, serialize_output_matrix(m));
}

inline OutputMatrix load_output_matrix(const std::filesystem::path& path) {
    auto bytes = read_file(path);
    return deserialize_output_matrix(bytes);
}

}  // namespace sac
