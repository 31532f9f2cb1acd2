#pragma once

#include <vector>

#include "dorafactor/matrix.hpp"

namespace dorafactor {

// Low-rank adapter: A is [r x d_in], B is [d_out x r], s the fixed scale
// (e.g. alpha/sqrt(r) for rank-stabilized setups).
struct AdapterPair {
    RealMatrix A;
    RealMatrix B;
    double s = 1.0;

    index_t rank() const { return A.rows(); }
};

// The three per-row scalars of the expanded squared norm
//   ||W + sBA||^2_row = base_sq + 2s*cross + s^2*ba_sq
// accumulated in fp32, plus the scale factors precomputed in fp64 so the
// assembly stage multiplies by exact 2s and s^2.
struct NormTerms {
    std::vector<float> base_sq;
    std::vector<float> cross;
    std::vector<float> ba_sq;
    double two_s = 0.0;
    double s2 = 0.0;
};

// Learnable per-row magnitude.
struct Magnitude {
    std::vector<double> values;
    DTypeSpec dtype = DTypeSpec::fp32();
};

// Chunked accumulation of the three norm terms. Per chunk c (ascending):
// widen W_c and A_c to fp32, add the chunk's row-sums of W_c^2 into base_sq,
// add A_c*A_c^T into the r x r Gram matrix, form U_c = W_c*A_c^T and add the
// row-sums of B (.) U_c into cross. After the chunk loop ba_sq is the
// row-sum of (B*G) (.) B. U_c is never retained across chunks. With s = 0
// the cross/ba_sq/G/U work is skipped entirely.
// Requires W.dtype in {FP32, BF16E, FP16E}.
NormTerms factored_norm_terms(const RealMatrix& w, const AdapterPair& adapter, const ChunkPlan& plan);

// Eq. of the assembly stage, evaluated per element with every intermediate
// individually rounded to fp32 and no FMA:
//   t1 = fl32(base_sq + fl32(two_s*cross))
//   t2 = fl32(t1 + fl32(s2*ba_sq))
//   out = sqrt_f32(clamp_min(t2, 0))      (NaN-preserving clamp)
std::vector<float> assemble_norm(const NormTerms& terms);

// Row-wise L2 norm of W + sBA without materializing BA, returned in W's
// dtype. The result carries no gradient state by contract; callers
// recompute it every forward pass. FP64 inputs take an all-fp64 path
// (used by test oracles only).
std::vector<double> factored_row_norm(const RealMatrix& w, const AdapterPair& adapter,
                                      const ChunkPlan& plan);

// g = m / max(w_norm, dtype.norm_eps), elementwise in the working dtype.
// Always evaluated outside the norm stage so every norm path feeds the
// same division semantics.
std::vector<double> magnitude_scale(const Magnitude& m, const std::vector<double>& w_norm,
                                    const DTypeSpec& dtype);

}  // namespace dorafactor
