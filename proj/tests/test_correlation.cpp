#include <doctest.h>

#include "oracles.hpp"
#include "sac/correlation.hpp"

using namespace sac;

namespace {
std::vector<double> vec(std::initializer_list<double> v) { return v; }
}

TEST_CASE("cosine_corr examples") {
    CHECK(cosine_corr(vec({0.2, 0.8}), vec({0.2, 0.8})) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cosine_corr(vec({1, 0}), vec({0, 1})) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(cosine_corr(vec({1, 0}), vec({1, 1})) == doctest::Approx(0.70710678).epsilon(1e-9));
    CHECK_THROWS_AS(cosine_corr(vec({0, 0}), vec({1, 0})), DegenerateVector);
    CHECK_THROWS_AS(cosine_corr(vec({1, 0}), vec({1, 0, 0})), ShapeMismatch);
}

TEST_CASE("rbf_corr examples") {
    CHECK(rbf_corr(vec({0.3, 0.4}), vec({0.3, 0.4}), 2.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rbf_corr(vec({0, 0}), vec({1, 0}), 1.0) == doctest::Approx(0.60653066).epsilon(1e-9));
    CHECK_THROWS_AS(rbf_corr(vec({1}), vec({1}), 0.0), InvalidBandwidth);
    CHECK_THROWS_AS(rbf_corr(vec({1}), vec({1}), -1.0), InvalidBandwidth);
    // monotone approach to 1 as bandwidth grows
    double prev = 0;
    for (double bw : {0.5, 1.0, 2.0, 4.0, 8.0, 1000.0}) {
        double v = rbf_corr(vec({0, 0}), vec({3, 4}), bw);
        CHECK(v >= prev);
        prev = v;
    }
    CHECK(prev == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("median_bandwidth examples") {
    OutputMatrix two;
    two.rows = 2; two.dims = 2; two.kind = OutputKind::logit;
    two.values = {0, 0, 3, 4};
    CHECK(median_bandwidth(two) == doctest::Approx(5.0).epsilon(1e-12));

    OutputMatrix same;
    same.rows = 3; same.dims = 2; same.kind = OutputKind::logit;
    same.values = {1, 1, 1, 1, 1, 1};
    CHECK(median_bandwidth(same) == 1.0);

    OutputMatrix line;
    line.rows = 3; line.dims = 2; line.kind = OutputKind::logit;
    line.values = {0, 0, 1, 0, 2, 0};
    CHECK(median_bandwidth(line) == doctest::Approx(1.0).epsilon(1e-12));

    OutputMatrix one;
    one.rows = 1; one.dims = 2; one.kind = OutputKind::logit;
    one.values = {1, 2};
    CHECK_THROWS_AS(median_bandwidth(one), InsufficientRows);
}

TEST_CASE("correlation_matrix on the documented 3-row instance") {
    OutputMatrix m;
    m.rows = 3; m.dims = 2; m.kind = OutputKind::logit;
    m.values = {1, 0, 0, 1, 1, 1};
    CorrelationMatrix c = correlation_matrix(m, Kernel::cosine());
    REQUIRE(c.n == 3);
    double r = 0.7071067811865476;
    CHECK(c.at(0, 0) == 1.0);
    CHECK(c.at(1, 1) == 1.0);
    CHECK(c.at(2, 2) == 1.0);
    CHECK(c.at(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(c.at(0, 2) == doctest::Approx(r).epsilon(1e-9));
    CHECK(c.at(1, 2) == doctest::Approx(r).epsilon(1e-9));
    for (size_t i = 0; i < 3; ++i)
        for (size_t j = 0; j < 3; ++j) CHECK(c.at(i, j) == c.at(j, i));
}

TEST_CASE("identical rows give the all-ones cosine matrix") {
    OutputMatrix m;
    m.rows = 2; m.dims = 2; m.kind = OutputKind::probability;
    m.values = {0.3, 0.7, 0.3, 0.7};
    CorrelationMatrix c = correlation_matrix(m, Kernel::cosine());
    for (double v : c.entries) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("zero-row cosine fallback: corr(0,x)=0, corr(0,0)=1") {
    OutputMatrix m;
    m.rows = 3; m.dims = 2; m.kind = OutputKind::bitvector;
    m.values = {0, 0, 1, 0, 0, 0};
    CorrelationMatrix c = correlation_matrix(m, Kernel::cosine());
    CHECK(c.at(0, 1) == 0.0);
    CHECK(c.at(0, 2) == 1.0);
    CHECK(c.at(0, 0) == 1.0);
    CHECK(c.at(2, 2) == 1.0);
}

TEST_CASE("rbf matrix resolves the median bandwidth when unset") {
    Rng rng(606);
    OutputMatrix m = oracle::random_output_matrix(rng, 8, 4, OutputKind::probability);
    CorrelationMatrix c = correlation_matrix(m, Kernel::rbf());
    CHECK(c.kernel.bandwidth == doctest::Approx(oracle::median_bandwidth_plain(m)).epsilon(1e-15));
    for (size_t i = 0; i < c.n; ++i) CHECK(c.at(i, i) == 1.0);
    for (double v : c.entries) {
        CHECK(v > 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("fingerprint_distance examples and errors") {
    OutputMatrix m;
    m.rows = 2; m.dims = 2; m.kind = OutputKind::probability;
    m.values = {0.5, 0.5, 0.1, 0.9};
    CorrelationMatrix a = correlation_matrix(m, Kernel::cosine());

    CHECK(fingerprint_distance(a, a).value == 0.0);

    CorrelationMatrix b = a;
    b.entries = {1, 1, 1, 1};
    CorrelationMatrix id = a;
    id.entries = {1, 0, 0, 1};
    CHECK(fingerprint_distance(id, b).value == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(fingerprint_distance(b, id).value == fingerprint_distance(id, b).value);

    CorrelationMatrix other_probe = a;
    other_probe.probe_digest[0] ^= 1;
    CHECK_THROWS_AS(fingerprint_distance(a, other_probe), ProbeSetMismatch);

    CorrelationMatrix other_kernel = a;
    other_kernel.kernel = Kernel::rbf(1.0);
    CHECK_THROWS_AS(fingerprint_distance(a, other_kernel), KernelMismatch);

    OutputMatrix m3;
    m3.rows = 3; m3.dims = 2; m3.kind = OutputKind::probability;
    m3.values = {0.5, 0.5, 0.1, 0.9, 0.8, 0.2};
    m3.probe_digest = m.probe_digest;
    CorrelationMatrix c3 = correlation_matrix(m3, Kernel::cosine());
    CHECK_THROWS_AS(fingerprint_distance(a, c3), ShapeMismatch);
}

TEST_CASE("property: cosine matrices are scale invariant, rbf translation invariant") {
    Rng rng(777);
    for (int trial = 0; trial < 30; ++trial) {
        size_t n = 3 + rng.index(8), d = 2 + rng.index(6);
        OutputMatrix m = oracle::random_output_matrix(rng, n, d, OutputKind::logit);
        OutputMatrix scaled = m;
        for (size_t i = 0; i < n; ++i) {
            double c = 0.1 + 9.9 * rng.real();
            for (size_t j = 0; j < d; ++j) scaled.values[i * d + j] *= c;
        }
        CorrelationMatrix base = correlation_matrix(m, Kernel::cosine());
        CorrelationMatrix after = correlation_matrix(scaled, Kernel::cosine());
        for (size_t k = 0; k < base.entries.size(); ++k)
            CHECK(std::abs(base.entries[k] - after.entries[k]) <= 1e-9);

        OutputMatrix shifted = m;
        std::vector<double> offset(d);
        for (auto& v : offset) v = rng.normal(0, 3);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < d; ++j) shifted.values[i * d + j] += offset[j];
        Kernel rbf = Kernel::rbf(1.7);
        CorrelationMatrix rb = correlation_matrix(m, rbf);
        CorrelationMatrix ra = correlation_matrix(shifted, rbf);
        for (size_t k = 0; k < rb.entries.size(); ++k)
            CHECK(std::abs(rb.entries[k] - ra.entries[k]) <= 1e-9);
    }
}

TEST_CASE("property: distance is a scaled L1 metric (symmetry + triangle)") {
    Rng rng(888);
    for (int trial = 0; trial < 25; ++trial) {
        size_t n = 2 + rng.index(6);
        auto mk = [&](Digest dig) {
            OutputMatrix m = oracle::random_output_matrix(rng, n, 4, OutputKind::probability);
            m.probe_digest = dig;
            return correlation_matrix(m, Kernel::cosine());
        };
        Digest dig{};
        CorrelationMatrix a = mk(dig), b = mk(dig), c = mk(dig);
        double ab = fingerprint_distance(a, b).value;
        double ba = fingerprint_distance(b, a).value;
        double ac = fingerprint_distance(a, c).value;
        double cb = fingerprint_distance(c, b).value;
        CHECK(ab == ba);
        CHECK(ab <= ac + cb + 1e-15);
        CHECK(ab >= 0.0);
    }
}

TEST_CASE("brute-force oracle equivalence (spot check)") {
    Rng rng(999);
    for (int trial = 0; trial < 20; ++trial) {
        size_t n = 2 + rng.index(10), d = 1 + rng.index(6);
        OutputKind kind = trial % 2 == 0 ? OutputKind::probability : OutputKind::logit;
        OutputMatrix m = oracle::random_output_matrix(rng, n, d, kind, true);
        Kernel k = trial % 3 == 0 ? Kernel::rbf() : Kernel::cosine();
        CorrelationMatrix impl = correlation_matrix(m, k);
        auto ref = oracle::brute_force_correlation(m, k);
        for (size_t i = 0; i < impl.entries.size(); ++i)
            CHECK(std::abs(impl.entries[i] - ref[i]) <= 1e-12);
    }
}

TEST_CASE("SACC round trip and corruption detection") {
    Rng rng(123);
    OutputMatrix m = oracle::random_output_matrix(rng, 5, 3, OutputKind::probability);
    CorrelationMatrix c = correlation_matrix(m, Kernel::rbf(0.9));
    auto bytes = serialize_correlation_matrix(c);
    CorrelationMatrix back = deserialize_correlation_matrix(bytes);
    CHECK(back == c);
    CHECK(back.digest() == c.digest());

    auto truncated = bytes;
    truncated.resize(bytes.size() - 5);
    CHECK_THROWS_AS(deserialize_correlation_matrix(truncated), ParseError);
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(deserialize_correlation_matrix(bad_magic), ParseError);
}

TEST_CASE("SACO round trip and validation") {
    Rng rng(321);
    OutputMatrix m = oracle::random_output_matrix(rng, 4, 6, OutputKind::probability);
    auto bytes = serialize_output_matrix(m);
    OutputMatrix back = deserialize_output_matrix(bytes);
    CHECK(back.values == m.values);
    CHECK(back.kind == m.kind);
    CHECK(back.probe_digest == m.probe_digest);

    OutputMatrix bad = m;
    bad.values[0] += 0.5;  // breaks the row-sum invariant
    CHECK_THROWS_AS(serialize_output_matrix(bad), ParseError);

    auto truncated = bytes;
    truncated.resize(truncated.size() - 1);
    CHECK_THROWS_AS(deserialize_output_matrix(truncated), ParseError);
}
