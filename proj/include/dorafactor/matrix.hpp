#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dorafactor/dtype.hpp"

namespace dorafactor {

using index_t = std::size_t;

// Dense row-major 2-D array. Values are held in fp64 but are always exactly
// representable in the tagged dtype; set() enforces this by rounding.
// Matrices are treated as immutable once populated, which makes every
// operation in the library reentrant.
class RealMatrix {
public:
    RealMatrix() = default;
    RealMatrix(index_t rows, index_t cols, const DTypeSpec& dtype)
        : rows_(rows), cols_(cols), dtype_(dtype), data_(rows * cols, 0.0) {}

    index_t rows() const { return rows_; }
    index_t cols() const { return cols_; }
    const DTypeSpec& dtype() const { return dtype_; }
    bool contiguous() const { return contiguous_; }

    double operator()(index_t i, index_t j) const { return data_[i * cols_ + j]; }
    void set(index_t i, index_t j, double v) { data_[i * cols_ + j] = round_to_dtype(v, dtype_); }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& mutable_data() { return data_; }

    // Same values, flagged non-contiguous. Only the dispatch shape guard
    // looks at the flag; arithmetic is unaffected.
    RealMatrix as_non_contiguous() const {
        RealMatrix m = *this;
        m.contiguous_ = false;
        return m;
    }

    RealMatrix to_dtype(const DTypeSpec& target) const;

private:
    index_t rows_ = 0;
    index_t cols_ = 0;
    DTypeSpec dtype_ = DTypeSpec::fp32();
    bool contiguous_ = true;
    std::vector<double> data_;
};

RealMatrix transpose(const RealMatrix& m);

// Chunking of the fan-in dimension against a byte budget. chunk_size is a
// multiple of 64 (Tensor-Core-friendly alignment) unless d_in itself is
// smaller than 64, in which case the whole fan-in forms one chunk.
struct ChunkPlan {
    std::uint64_t budget_bytes = 268435456;  // 256 MiB
    index_t chunk_size = 0;
    index_t alignment = 64;
    index_t num_chunks = 0;
};

constexpr std::uint64_t kDefaultChunkBudgetBytes = 268435456;

// Throws std::invalid_argument when the budget cannot hold one 64-wide
// fp32 chunk at the given d_out (and d_in is at least 64).
ChunkPlan plan_chunks(index_t d_out, index_t d_in, std::uint64_t budget_bytes = kDefaultChunkBudgetBytes);

// fp32 product with a fixed, ascending-k accumulation order per output
// element. Inputs of any dtype are widened to fp32 on the fly; the result is
// tagged FP32. Bitwise reproducible across runs.
RealMatrix matmul_f32(const RealMatrix& a, const RealMatrix& b);

enum class FixtureKind { Gaussian, Uniform };

// Deterministic fixtures: mt19937_64 seeded directly with `seed`; uniforms
// are (x >> 11) * 2^-53 in [0,1); gaussians come from Box-Muller pairs on
// consecutive uniforms. Draws are rounded into `dtype` row by row.
RealMatrix seeded_fixture(FixtureKind kind, index_t rows, index_t cols, std::uint64_t seed,
                          const DTypeSpec& dtype = DTypeSpec::fp32());

// Gaussian fixture with explicit location/scale, same generator contract.
RealMatrix gaussian_fixture(index_t rows, index_t cols, double mean, double stddev,
                            std::uint64_t seed, const DTypeSpec& dtype = DTypeSpec::fp32());

std::vector<double> gaussian_vector(index_t n, double mean, double stddev, std::uint64_t seed);

// Stable sub-seed derivation so per-case streams never overlap.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

}  // namespace dorafactor
