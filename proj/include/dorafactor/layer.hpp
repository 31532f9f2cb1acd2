#pragma once

#include <optional>
#include <vector>

#include "dorafactor/compose.hpp"
#include "dorafactor/dispatch.hpp"
#include "dorafactor/factored_norm.hpp"

namespace dorafactor {

// One adapted linear layer. W and bias are frozen; A, B train; the
// magnitude trains when mag_trainable is set. The layer is strictly 2-D:
// callers flatten batch x seq into rows before entering.
struct DoraLinearState {
    RealMatrix w;                          // [d_out x d_in]
    std::optional<std::vector<double>> bias;  // [d_out], stored in working dtype
    AdapterPair adapter;
    Magnitude magnitude;
    bool mag_trainable = true;
    DTypeSpec working_dtype = DTypeSpec::fp32();
    DispatchContext dispatch_cfg;          // template; shape fields filled per call
    ChunkPlan chunk_plan;

    index_t d_out() const { return w.rows(); }
    index_t d_in() const { return w.cols(); }
};

DoraLinearState make_layer_state(RealMatrix w, AdapterPair adapter, Magnitude magnitude,
                                 std::optional<std::vector<double>> bias,
                                 const DTypeSpec& working_dtype);

// Everything backward needs for the tier the forward chose, retained
// per call.
struct LayerSaved {
    RealMatrix x;          // [rows x d_in]
    RealMatrix lora_mid;   // X * A^T, [rows x r]
    RealMatrix base_out;   // X * W^T, bias excluded
    RealMatrix lora_out;   // (X * A^T) * B^T
    std::vector<double> w_norm;
    std::vector<double> g;
    std::optional<RealMatrix> inner;  // s*lora + base, present iff training a magnitude
    TierDecision decision;
};

struct LayerForwardResult {
    RealMatrix y;
    LayerSaved saved;
};

// base_out = X*W^T (no bias); lora_out = (X*A^T)*B^T; w_norm recomputed
// fresh through the factored path (detached, never cached); g from the
// magnitude division; delta via the dispatched tier; Y = base_out + delta
// + bias with the bias re-added strictly after the compose.
LayerForwardResult layer_forward(const DoraLinearState& state, const RealMatrix& x);

struct LayerGrads {
    RealMatrix d_a;  // [r x d_in]
    RealMatrix d_b;  // [d_out x r]
    std::optional<std::vector<double>> d_mag;
};

// Chain rule through the compose and the two low-rank matmuls. The norm
// contributes no gradient by contract; the base path terminates at the
// frozen W.
LayerGrads layer_backward(const DoraLinearState& state, const LayerSaved& saved,
                          const RealMatrix& d_y);

}  // namespace dorafactor
