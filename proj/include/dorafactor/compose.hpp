#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dorafactor/matrix.hpp"

namespace dorafactor {

// Inputs to the composition delta = (g-1) (.) base + g (.) s (.) lora.
// base is the frozen-path output X*W^T with the bias excluded; lora is
// X*A^T*B^T. g broadcasts along the last (column) dimension.
struct ComposeInputs {
    const RealMatrix& base;
    const RealMatrix& lora;
    const std::vector<double>& g;
    double s = 1.0;
    DTypeSpec dtype = DTypeSpec::fp32();
};

struct GradBundle {
    RealMatrix d_lora;
    RealMatrix d_base;
    std::optional<std::vector<double>> d_mag;
};

// Counted tensor traversals for one composition pass. "activation" streams
// are rows x d_out sized; "vector" streams are d_out sized (g and friends).
struct TrafficReport {
    std::uint64_t activation_reads = 0;
    std::uint64_t activation_writes = 0;
    std::uint64_t vector_reads = 0;
    std::uint64_t bytes_total = 0;
    int pass_count = 0;
};

constexpr index_t kDefaultTileRows = 64;

// Canonical-order stable form: t = s*lora, then g*t, then (g-1)*base, then
// the sum. Operands widen to fp32, the whole expression is evaluated in
// fp32, and the result rounds to in.dtype once at the store.
RealMatrix stable_compose(const ComposeInputs& in);

// The rejected algebraic form g*(s*lora + base) - base with every
// intermediate rounded to in.dtype. Cancels catastrophically near g = 1;
// kept as the stability lab's counterexample.
RealMatrix naive_compose(const ComposeInputs& in);

// Single-pass tiled evaluation, bitwise equal to stable_compose by
// construction. The report counts 2 activation reads + 1 write plus one g
// read per row tile.
struct FusedResult {
    RealMatrix delta;
    TrafficReport traffic;
};
FusedResult fused_compose(const ComposeInputs& in, index_t tile_rows = kDefaultTileRows);

// Same pass, optionally also producing inner = s*lora + base (the tensor
// the magnitude gradient needs). With need_inner = false the buffer is not
// allocated and its write is absent from the traffic report.
struct DualResult {
    RealMatrix delta;
    std::optional<RealMatrix> inner;
    TrafficReport traffic;
};
DualResult dual_output_compose(const ComposeInputs& in, bool need_inner,
                               index_t tile_rows = kDefaultTileRows);

// d_lora = g*s*dY and d_base = (g-1)*dY in one pass; d_mag (when requested)
// is a serial per-column reduction of dY (.) inner over rows, divided by
// w_norm after the reduction.
GradBundle compose_backward(const RealMatrix& d_y, const std::vector<double>& g, double s,
                            const RealMatrix* inner, const std::vector<double>& w_norm,
                            bool mag_grad);

// Closed-form traffic of the four-kernel eager composition sequence, for
// reporting the eager/fused ratio. Not a measurement.
TrafficReport eager_traffic_model(index_t rows, index_t d_out, const DTypeSpec& dtype);

}  // namespace dorafactor
