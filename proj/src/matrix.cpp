#include "dorafactor/matrix.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace dorafactor {

RealMatrix RealMatrix::to_dtype(const DTypeSpec& target) const {
    RealMatrix out(rows_, cols_, target);
    for (index_t i = 0; i < data_.size(); ++i) {
        out.mutable_data()[i] = round_to_dtype(data_[i], target);
    }
    return out;
}

RealMatrix transpose(const RealMatrix& m) {
    RealMatrix out(m.cols(), m.rows(), m.dtype());
    for (index_t i = 0; i < m.rows(); ++i) {
        for (index_t j = 0; j < m.cols(); ++j) {
            out.mutable_data()[j * m.rows() + i] = m(i, j);
        }
    }
    return out;
}

ChunkPlan plan_chunks(index_t d_out, index_t d_in, std::uint64_t budget_bytes) {
    if (d_out < 1 || d_in < 1) throw std::invalid_argument("plan_chunks: dims must be >= 1");
    if (budget_bytes < 256) throw std::invalid_argument("plan_chunks: budget below 256 bytes");

    constexpr index_t kAlign = 64;
    const std::uint64_t fit = budget_bytes / (static_cast<std::uint64_t>(d_out) * 4);
    if (d_in >= kAlign && fit < kAlign) {
        throw std::invalid_argument("plan_chunks: budget of " + std::to_string(budget_bytes) +
                                    " bytes cannot hold one 64-wide fp32 chunk at d_out=" +
                                    std::to_string(d_out));
    }

    index_t cs = d_in < fit ? d_in : static_cast<index_t>(fit);
    cs = (cs / kAlign) * kAlign;
    const index_t floor_cs = d_in < kAlign ? d_in : kAlign;
    if (cs < floor_cs) cs = floor_cs;

    ChunkPlan plan;
    plan.budget_bytes = budget_bytes;
    plan.chunk_size = cs;
    plan.alignment = kAlign;
    plan.num_chunks = (d_in + cs - 1) / cs;
    return plan;
}

RealMatrix matmul_f32(const RealMatrix& a, const RealMatrix& b) {
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("matmul_f32: inner dimensions disagree (" +
                                    std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + ")");
    }
    const index_t m = a.rows(), k = a.cols(), n = b.cols();
    RealMatrix out(m, n, DTypeSpec::fp32());
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* pc = out.mutable_data().data();
    std::vector<float> acc(n);
    for (index_t i = 0; i < m; ++i) {
        for (index_t j = 0; j < n; ++j) acc[j] = 0.0f;
        // k outermost over the accumulator row keeps the per-element
        // summation order ascending in k while walking b row-major.
        for (index_t kk = 0; kk < k; ++kk) {
            const float av = static_cast<float>(pa[i * k + kk]);
            const double* brow = pb + kk * n;
            for (index_t j = 0; j < n; ++j) {
                acc[j] += av * static_cast<float>(brow[j]);
            }
        }
        for (index_t j = 0; j < n; ++j) pc[i * n + j] = static_cast<double>(acc[j]);
    }
    return out;
}

namespace {

class FixtureRng {
public:
    explicit FixtureRng(std::uint64_t seed) : gen_(seed) {}

    double uniform() {
        // 53 random bits -> [0, 1)
        return static_cast<double>(gen_() >> 11) * 0x1p-53;
    }

    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        if (u1 <= 0.0) u1 = 0x1p-53;
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = radius * std::sin(theta);
        have_spare_ = true;
        return radius * std::cos(theta);
    }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace

RealMatrix seeded_fixture(FixtureKind kind, index_t rows, index_t cols, std::uint64_t seed,
                          const DTypeSpec& dtype) {
    RealMatrix out(rows, cols, dtype);
    FixtureRng rng(seed);
    for (index_t i = 0; i < rows * cols; ++i) {
        const double v = kind == FixtureKind::Gaussian ? rng.gaussian() : rng.uniform();
        out.mutable_data()[i] = round_to_dtype(v, dtype);
    }
    return out;
}

RealMatrix gaussian_fixture(index_t rows, index_t cols, double mean, double stddev,
                            std::uint64_t seed, const DTypeSpec& dtype) {
    RealMatrix out(rows, cols, dtype);
    FixtureRng rng(seed);
    for (index_t i = 0; i < rows * cols; ++i) {
        out.mutable_data()[i] = round_to_dtype(mean + stddev * rng.gaussian(), dtype);
    }
    return out;
}

std::vector<double> gaussian_vector(index_t n, double mean, double stddev, std::uint64_t seed) {
    std::vector<double> out(n);
    FixtureRng rng(seed);
    for (index_t i = 0; i < n; ++i) out[i] = mean + stddev * rng.gaussian();
    return out;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    // splitmix64 finalizer over the combined words
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace dorafactor
