#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sac {

// Base class for every error the toolkit raises. Subclasses carry the
// contract name so CLI error reports can be matched mechanically.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& msg)
        : std::runtime_error(kind + ": " + msg), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define SAC_DEFINE_ERROR(NAME)                                            \
    class NAME : public Error {                                           \
    public:                                                               \
        explicit NAME(const std::string& msg) : Error(#NAME, msg) {}      \
    }

SAC_DEFINE_ERROR(InvalidImage);
SAC_DEFINE_ERROR(InvalidQuality);
SAC_DEFINE_ERROR(InsufficientImages);
SAC_DEFINE_ERROR(IntegrityError);
SAC_DEFINE_ERROR(ParseError);
SAC_DEFINE_ERROR(IoError);
SAC_DEFINE_ERROR(DegenerateVector);
SAC_DEFINE_ERROR(InvalidBandwidth);
SAC_DEFINE_ERROR(InsufficientRows);
SAC_DEFINE_ERROR(ProbeSetMismatch);
SAC_DEFINE_ERROR(ShapeMismatch);
SAC_DEFINE_ERROR(KernelMismatch);
SAC_DEFINE_ERROR(EmptyPool);
SAC_DEFINE_ERROR(SingleClass);
SAC_DEFINE_ERROR(InsufficientSamples);
SAC_DEFINE_ERROR(InvalidFraction);
SAC_DEFINE_ERROR(TrainingDiverged);
SAC_DEFINE_ERROR(ProtocolViolation);
SAC_DEFINE_ERROR(CalibrationError);

#undef SAC_DEFINE_ERROR

using Digest = std::array<uint8_t, 32>;

inline std::string to_hex(std::span<const uint8_t> bytes) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (uint8_t b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xF]);
    }
    return out;
}

inline std::string to_hex(const Digest& d) {
    return to_hex(std::span<const uint8_t>(d.data(), d.size()));
}

inline Digest digest_from_hex(const std::string& hex) {
    if (hex.size() != 64) throw ParseError("digest hex must be 64 chars, got " + std::to_string(hex.size()));
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        throw ParseError(std::string("bad hex char '") + c + "'");
    };
    Digest d{};
    for (size_t i = 0; i < 32; ++i)
        d[i] = static_cast<uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
    return d;
}

// Little-endian byte stream helpers for the fixed binary formats.
class ByteWriter {
public:
    void u8(uint8_t v) { buf_.push_back(v); }
    void u16(uint16_t v) {
        for (int i = 0; i < 2; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void f64(double v) {
        uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void bytes(std::span<const uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
    void str(const std::string& s) {
        u64(s.size());
        buf_.insert(buf_.end(), s.begin(), s.end());
    }
    const std::vector<uint8_t>& data() const { return buf_; }

private:
    std::vector<uint8_t> buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const uint8_t> data) : data_(data) {}
    uint8_t u8() { return take(1)[0]; }
    uint16_t u16() {
        auto b = take(2);
        return static_cast<uint16_t>(b[0] | b[1] << 8);
    }
    uint32_t u32() {
        auto b = take(4);
        return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
               static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
    }
    uint64_t u64() {
        uint64_t v = 0;
        auto b = take(8);
        for (int i = 7; i >= 0; --i) v = v << 8 | b[i];
        return v;
    }
    double f64() {
        uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::span<const uint8_t> raw(size_t n) { return take(n); }
    std::string str() {
        uint64_t n = u64();
        auto b = take(n);
        return std::string(b.begin(), b.end());
    }
    size_t remaining() const { return data_.size() - pos_; }
    bool done() const { return pos_ == data_.size(); }

private:
    std::span<const uint8_t> take(size_t n) {
        if (pos_ + n > data_.size())
            throw ParseError("truncated input: need " + std::to_string(n) + " bytes, have " +
                             std::to_string(data_.size() - pos_));
        auto s = data_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    std::span<const uint8_t> data_;
    size_t pos_ = 0;
};

inline std::vector<uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed on " + path.string());
    return buf;
}

inline void write_file(const std::filesystem::path& path, std::span<const uint8_t> data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + path.string());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw IoError("write failed on " + path.string());
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    write_file(path, std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(text.data()), text.size()));
}

}  // namespace sac
