#pragma once

#include <vector>

#include "dorafactor/factored_norm.hpp"
#include "dorafactor/memory_model.hpp"

namespace dorafactor {

// Dense brute-force paths. Everything here computes in fp64 regardless of
// input dtype: these are correctness oracles, not speed baselines.

constexpr index_t kOracleDimCap = 16384;

struct OracleNormResult {
    std::vector<double> w_norm;   // rounded to W.dtype
    MemoryEstimate ledger;        // production-equivalent allocation model
};

// The identity-materialization baseline: build I [d_in x d_in], form the
// dense BA through it, take per-row L2 of W + s*BA. Refuses d_in above
// `dim_cap` so a mistyped shape cannot allocate a d_in^2 identity.
OracleNormResult peft_identity_norm(const RealMatrix& w, const AdapterPair& adapter,
                                    index_t dim_cap = kOracleDimCap);

// Direct dense B*A product; numerically identical to the identity path,
// ledger just drops the identity allocation.
OracleNormResult dense_ba_norm(const RealMatrix& w, const AdapterPair& adapter,
                               index_t dim_cap = kOracleDimCap);

// W' = m (.) (W + sBA) / rownorm(W + sBA), fp64. Zero row norms are guarded
// by the dtype's division epsilon.
RealMatrix dense_composed_weight(const RealMatrix& w, const AdapterPair& adapter,
                                 const Magnitude& m);

// Y = X * W'^T + bias, fp64 end to end.
RealMatrix oracle_forward(const RealMatrix& x, const RealMatrix& w,
                          const std::vector<double>* bias, const AdapterPair& adapter,
                          const Magnitude& m);

// fp64 triple-loop product, independent of matmul_f32.
RealMatrix matmul_f64(const RealMatrix& a, const RealMatrix& b);

// Per-row L2 norm of W + s*BA via the dense fp64 product (helper shared by
// both oracle entry points and tests).
std::vector<double> dense_row_norm_f64(const RealMatrix& w, const AdapterPair& adapter);

}  // namespace dorafactor
