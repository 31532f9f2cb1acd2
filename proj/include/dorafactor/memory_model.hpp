#pragma once

#include <cstdint>
#include <vector>

#include "dorafactor/matrix.hpp"

namespace dorafactor {

// Closed-form working-set accounting. The model counts logical allocations;
// allocator rounding and buffer reuse are out of scope, which is why
// measured deltas land below these estimates.
struct MemoryEstimate {
    std::uint64_t persistent_bytes = 0;
    std::uint64_t transient_bytes = 0;
    std::uint64_t identity_bytes = 0;
    double reduction_ratio_vs_dense = 1.0;
};

// Dense-product elements over U+G elements: (d_out*d_in)/(d_out*r + r^2).
// Element size cancels.
double theoretical_reduction(index_t d_out, index_t d_in, index_t r);

// Transient bytes of one factored-norm evaluation: the [d_out, cs] fp32
// chunk workspace (present whether the chunk is a widening cast or the
// squared-chunk temporary), the fp32 A chunk, U and G (absent when s = 0),
// and the three d_out-sized accumulators. Nothing persists across calls.
MemoryEstimate factored_transient_bytes(const ChunkPlan& plan, index_t d_out, index_t r,
                                        bool s_zero, bool weights_need_widening);

// The materializing baseline: optional d_in^2 identity plus the dense BA
// product and the composed-weight copy, in the storage dtype.
MemoryEstimate dense_baseline_bytes(index_t d_out, index_t d_in, const DTypeSpec& dtype,
                                    bool with_identity);

struct TheoryTableRow {
    index_t d_out = 0;
    index_t d_in = 0;
    index_t rank = 0;
    double theory_ratio = 0.0;
};

struct ShapeRank {
    index_t d_out;
    index_t d_in;
    index_t rank;
};

// The eight benchmark shapes the theory table covers.
const std::vector<ShapeRank>& theory_table_shapes();

std::vector<TheoryTableRow> emit_theory_table(const std::vector<ShapeRank>& shapes);

}  // namespace dorafactor
