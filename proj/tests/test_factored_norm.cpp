#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "dorafactor/factored_norm.hpp"
#include "dorafactor/reference.hpp"

using namespace dorafactor;

namespace {

AdapterPair random_adapter(index_t d_out, index_t d_in, index_t r, double s, std::uint64_t seed,
                           const DTypeSpec& dt = DTypeSpec::fp32()) {
    return AdapterPair{seeded_fixture(FixtureKind::Gaussian, r, d_in, derive_seed(seed, 1), dt),
                       seeded_fixture(FixtureKind::Gaussian, d_out, r, derive_seed(seed, 2), dt), s};
}

double max_rel_err(const std::vector<double>& got, const std::vector<double>& want) {
    double peak = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        peak = std::max(peak, std::fabs(got[i] - want[i]) / std::max(std::fabs(want[i]), 1e-30));
    }
    return peak;
}

}  // namespace

TEST_CASE("zero-scale fast path on the identity") {
    RealMatrix w(4, 4, DTypeSpec::fp32());
    for (index_t i = 0; i < 4; ++i) w.set(i, i, 1.0);
    AdapterPair adapter = random_adapter(4, 4, 2, 0.0, 3);
    const ChunkPlan plan = plan_chunks(4, 4);
    const std::vector<double> norm = factored_row_norm(w, adapter, plan);
    for (const double v : norm) CHECK(v == 1.0);
}

TEST_CASE("rank-1 norm of a zero base weight") {
    RealMatrix w(2, 2, DTypeSpec::fp32());
    RealMatrix a(1, 2, DTypeSpec::fp32());
    a.set(0, 0, 3.0);
    a.set(0, 1, 4.0);
    RealMatrix b(2, 1, DTypeSpec::fp32());
    b.set(0, 0, 1.0);
    b.set(1, 0, 2.0);
    const AdapterPair adapter{a, b, 1.0};
    const std::vector<double> norm = factored_row_norm(w, adapter, plan_chunks(2, 2));
    CHECK(norm[0] == doctest::Approx(5.0).epsilon(1e-6));
    CHECK(norm[1] == doctest::Approx(10.0).epsilon(1e-6));
}

TEST_CASE("factored norm matches the dense fp64 oracle") {
    const index_t d_out = 64, d_in = 96, r = 8;
    const RealMatrix w = seeded_fixture(FixtureKind::Gaussian, d_out, d_in, 100);
    const AdapterPair adapter = random_adapter(d_out, d_in, r, 2.0 / std::sqrt(8.0), 101);
    const std::vector<double> got = factored_row_norm(w, adapter, plan_chunks(d_out, d_in));
    const std::vector<double> want = dense_row_norm_f64(w, adapter);
    CHECK(max_rel_err(got, want) <= 1e-6);
}

TEST_CASE("oracle equivalence across the shape grid") {
    const index_t dims[] = {3, 17, 64, 96, 257};
    const index_t ranks[] = {1, 2, 8, 33};
    std::uint64_t seed = 4000;
    for (index_t d_out : dims) {
        for (index_t d_in : dims) {
            const index_t r = ranks[(d_out + d_in) % 4];
            const double s = (d_out % 2) ? 1.0 : 2.0 / std::sqrt(static_cast<double>(r));
            const RealMatrix w = seeded_fixture(FixtureKind::Gaussian, d_out, d_in, ++seed);
            const AdapterPair adapter = random_adapter(d_out, d_in, r, s, ++seed);
            const std::vector<double> got = factored_row_norm(w, adapter, plan_chunks(d_out, d_in));
            CHECK(max_rel_err(got, dense_row_norm_f64(w, adapter)) <= 1e-5);
        }
    }
}

TEST_CASE("bf16 weights widen per chunk and stay within the loose tolerance") {
    const index_t d_out = 64, d_in = 96, r = 8;
    const DTypeSpec& bf16 = DTypeSpec::bf16e();
    const RealMatrix w = seeded_fixture(FixtureKind::Gaussian, d_out, d_in, 200, bf16);
    const AdapterPair adapter = random_adapter(d_out, d_in, r, 1.0, 201, bf16);
    const std::vector<double> got = factored_row_norm(w, adapter, plan_chunks(d_out, d_in));
    const std::vector<double> want = dense_row_norm_f64(w, adapter);
    CHECK(max_rel_err(got, want) <= 1e-2);
    for (const double v : got) CHECK(round_to_dtype(v, bf16) == v);
}

TEST_CASE("chunk invariance") {
    const index_t d_out = 32, d_in = 257, r = 4;
    const RealMatrix w = seeded_fixture(FixtureKind::Gaussian, d_out, d_in, 300);
    const AdapterPair adapter = random_adapter(d_out, d_in, r, 0.7, 301);

    SUBCASE("same boundaries give identical bits") {
        const ChunkPlan p1 = plan_chunks(d_out, d_in, 64ULL << 20);
        const ChunkPlan p2 = plan_chunks(d_out, d_in, 96ULL << 20);
        REQUIRE(p1.chunk_size == p2.chunk_size);
        CHECK(factored_row_norm(w, adapter, p1) == factored_row_norm(w, adapter, p2));
    }
    SUBCASE("different chunk counts stay within 2 ulp") {
        // budgets tuned to cs = 64, 128 and 256
        const std::uint64_t budgets[] = {64ULL * d_out * 4, 128ULL * d_out * 4, 256ULL * d_out * 4};
        const std::vector<double> wide = factored_row_norm(w, adapter, plan_chunks(d_out, d_in));
        for (const std::uint64_t budget : budgets) {
            const ChunkPlan p = plan_chunks(d_out, d_in, budget);
            const std::vector<double> got = factored_row_norm(w, adapter, p);
            for (index_t j = 0; j < d_out; ++j) {
                const float a = static_cast<float>(got[j]);
                const float b = static_cast<float>(wide[j]);
                const float ulp = std::ldexp(1.0f, std::ilogb(b) - 23);
                CHECK(std::fabs(a - b) <= 2.0f * ulp);
            }
        }
    }
}

TEST_CASE("scale-zero path equals the bare base norm exactly") {
    const index_t d_out = 16, d_in = 48;  // single chunk
    const RealMatrix w = seeded_fixture(FixtureKind::Gaussian, d_out, d_in, 400);
    const AdapterPair adapter = random_adapter(d_out, d_in, 5, 0.0, 401);
    const std::vector<double> got = factored_row_norm(w, adapter, plan_chunks(d_out, d_in));
    for (index_t i = 0; i < d_out; ++i) {
        float acc = 0.0f;
        for (index_t k = 0; k < d_in; ++k) {
            const float v = static_cast<float>(w(i, k));
            acc += v * v;
        }
        const float expect = correctly_rounded_sqrt_f32(nan_preserving_clamp_min(acc, 0.0f));
        CHECK(got[i] == static_cast<double>(expect));
    }
}

TEST_CASE("base term is bitwise rank-independent") {
    const index_t d_out = 24, d_in = 80;
    const RealMatrix w = seeded_fixture(FixtureKind::Gaussian, d_out, d_in, 500);
    const ChunkPlan plan = plan_chunks(d_out, d_in);
    const NormTerms t1 = factored_norm_terms(w, random_adapter(d_out, d_in, 1, 1.0, 501), plan);
    const NormTerms t2 = factored_norm_terms(w, random_adapter(d_out, d_in, 768, 1.0, 502), plan);
    CHECK(std::memcmp(t1.base_sq.data(), t2.base_sq.data(), d_out * sizeof(float)) == 0);
}

TEST_CASE("assemble_norm stage semantics") {
    NormTerms t;
    t.base_sq = {1.0f};
    t.cross = {0.0f};
    t.ba_sq = {0.0f};
    t.two_s = 2.0;
    t.s2 = 1.0;
    CHECK(assemble_norm(t)[0] == 1.0f);

    t.base_sq = {0.0f};
    t.cross = {-1.0f};
    t.ba_sq = {0.0f};
    CHECK(assemble_norm(t)[0] == 0.0f);  // negative radicand clamps at 0

    t.base_sq = {std::numeric_limits<float>::quiet_NaN()};
    t.cross = {0.0f};
    CHECK(std::isnan(assemble_norm(t)[0]));

    t.base_sq = {1.0f, 2.0f};
    CHECK_THROWS(assemble_norm(t));
}

TEST_CASE("magnitude scale") {
    const DTypeSpec& fp32 = DTypeSpec::fp32();
    SUBCASE("m equal to the norm gives exactly one") {
        const std::vector<double> wn = {0.5, 3.25, 100.0};
        const Magnitude m{wn, fp32};
        for (const double g : magnitude_scale(m, wn, fp32)) CHECK(g == 1.0);
    }
    SUBCASE("epsilon floor") {
        const Magnitude m{{1.0}, fp32};
        const std::vector<double> g = magnitude_scale(m, {0.0}, fp32);
        CHECK(g[0] == static_cast<double>(1.0f / 1e-12f));
        CHECK(g[0] == doctest::Approx(1e12).epsilon(1e-6));
    }
    SUBCASE("plain division") {
        const Magnitude m{{2.0}, fp32};
        CHECK(magnitude_scale(m, {4.0}, fp32)[0] == 0.5);
    }
    SUBCASE("bf16 working dtype rounds the quotient") {
        const DTypeSpec& bf16 = DTypeSpec::bf16e();
        const Magnitude m{{1.0}, bf16};
        const std::vector<double> g = magnitude_scale(m, {3.0}, bf16);
        CHECK(round_to_dtype(g[0], bf16) == g[0]);
        CHECK(g[0] == doctest::Approx(1.0 / 3.0).epsilon(0.01));
    }
    SUBCASE("length mismatch") {
        const Magnitude m{{1.0, 2.0}, fp32};
        CHECK_THROWS(magnitude_scale(m, {1.0}, fp32));
    }
}

TEST_CASE("non-finite weights propagate without throwing") {
    RealMatrix w(2, 4, DTypeSpec::fp32());
    w.set(0, 0, std::numeric_limits<double>::infinity());
    w.set(1, 1, 1.0);
    const AdapterPair adapter = random_adapter(2, 4, 1, 1.0, 600);
    const std::vector<double> norm = factored_row_norm(w, adapter, plan_chunks(2, 4));
    CHECK(std::isinf(norm[0]));
    CHECK(std::isfinite(norm[1]));
}

TEST_CASE("shape and plan validation") {
    const RealMatrix w = seeded_fixture(FixtureKind::Gaussian, 8, 16, 700);
    AdapterPair bad = random_adapter(8, 12, 2, 1.0, 701);  // wrong d_in
    CHECK_THROWS(factored_row_norm(w, bad, plan_chunks(8, 16)));
    AdapterPair ok = random_adapter(8, 16, 2, 1.0, 702);
    CHECK_THROWS(factored_row_norm(w, ok, plan_chunks(8, 4096)));  // plan for another shape
}

TEST_CASE("fp64 weights take the all-fp64 path") {
    const RealMatrix w = seeded_fixture(FixtureKind::Gaussian, 12, 20, 800, DTypeSpec::fp64());
    const AdapterPair adapter = random_adapter(12, 20, 3, 0.9, 801, DTypeSpec::fp64());
    const std::vector<double> got = factored_row_norm(w, adapter, plan_chunks(12, 20));
    CHECK(max_rel_err(got, dense_row_norm_f64(w, adapter)) <= 1e-13);
    CHECK_THROWS(factored_norm_terms(w, adapter, plan_chunks(12, 20)));
}

TEST_CASE("degenerate over-complete rank is permitted") {
    const index_t d_out = 6, d_in = 10, r = 33;  // r > min(d_out, d_in)
    const RealMatrix w = seeded_fixture(FixtureKind::Gaussian, d_out, d_in, 900);
    const AdapterPair adapter = random_adapter(d_out, d_in, r, 0.5, 901);
    const std::vector<double> got = factored_row_norm(w, adapter, plan_chunks(d_out, d_in));
    CHECK(max_rel_err(got, dense_row_norm_f64(w, adapter)) <= 1e-5);
}
