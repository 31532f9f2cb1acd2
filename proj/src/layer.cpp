#include "dorafactor/layer.hpp"

#include <stdexcept>

namespace dorafactor {

namespace {

RealMatrix rounded_to(const RealMatrix& m, const DTypeSpec& dtype) {
    return m.dtype() == dtype ? m : m.to_dtype(dtype);
}

// fp32-accumulating matmul with the result stored in the working dtype
// (the standard mixed-precision contract).
RealMatrix working_matmul(const RealMatrix& a, const RealMatrix& b, const DTypeSpec& dtype) {
    return rounded_to(matmul_f32(a, b), dtype);
}

}  // namespace

DoraLinearState make_layer_state(RealMatrix w, AdapterPair adapter, Magnitude magnitude,
                                 std::optional<std::vector<double>> bias,
                                 const DTypeSpec& working_dtype) {
    DoraLinearState state;
    state.w = std::move(w);
    state.adapter = std::move(adapter);
    state.magnitude = std::move(magnitude);
    state.bias = std::move(bias);
    state.working_dtype = working_dtype;
    state.magnitude.dtype = working_dtype;
    for (double& v : state.magnitude.values) v = round_to_dtype(v, working_dtype);
    if (state.bias) {
        for (double& v : *state.bias) v = round_to_dtype(v, working_dtype);
    }
    if (state.adapter.A.cols() != state.w.cols() || state.adapter.B.rows() != state.w.rows() ||
        state.adapter.A.rows() != state.adapter.B.cols()) {
        throw std::invalid_argument("layer: adapter shapes inconsistent with W");
    }
    if (state.magnitude.values.size() != state.w.rows()) {
        throw std::invalid_argument("layer: magnitude length != d_out");
    }
    if (state.bias && state.bias->size() != state.w.rows()) {
        throw std::invalid_argument("layer: bias length != d_out");
    }
    state.chunk_plan = plan_chunks(state.w.rows(), state.w.cols());
    state.dispatch_cfg.training = true;
    state.dispatch_cfg.requires_grad = true;
    return state;
}

LayerForwardResult layer_forward(const DoraLinearState& state, const RealMatrix& x) {
    if (x.cols() != state.d_in()) throw std::invalid_argument("layer_forward: X.cols != d_in");
    const DTypeSpec& wd = state.working_dtype;
    const index_t rows = x.rows(), d_out = state.d_out();

    RealMatrix base_out = working_matmul(x, transpose(state.w), wd);
    RealMatrix lora_mid = working_matmul(x, transpose(state.adapter.A), wd);
    RealMatrix lora_out = working_matmul(lora_mid, transpose(state.adapter.B), wd);

    // Detached norm, recomputed on every call.
    std::vector<double> w_norm = factored_row_norm(state.w, state.adapter, state.chunk_plan);
    std::vector<double> g = magnitude_scale(state.magnitude, w_norm, wd);

    DispatchContext ctx = state.dispatch_cfg;
    ctx.rows = rows;
    ctx.d_out = d_out;
    ctx.contiguous = base_out.contiguous() && lora_out.contiguous();
    ctx.mag_broadcast_last_dim = true;
    ctx.d_out_divisible_128 = d_out % 128 == 0;
    const TierDecision decision = select_tier(ctx);

    const bool want_inner = ctx.training && ctx.requires_grad && state.mag_trainable;
    const ComposeInputs in{base_out, lora_out, g, state.adapter.s, wd};

    RealMatrix delta;
    std::optional<RealMatrix> inner;
    switch (decision.tier) {
        case Tier::FusedBackward: {
            DualResult dual = dual_output_compose(in, want_inner);
            delta = std::move(dual.delta);
            inner = std::move(dual.inner);
            break;
        }
        case Tier::FusedForward: {
            delta = fused_compose(in).delta;
            break;
        }
        case Tier::Eager: {
            delta = stable_compose(in);
            if (want_inner) {
                // Out-of-place inner with the exact fused rounding sequence.
                RealMatrix materialized(rows, d_out, wd);
                const float sf = static_cast<float>(state.adapter.s);
                for (index_t i = 0; i < rows; ++i) {
                    for (index_t j = 0; j < d_out; ++j) {
                        const float t = sf * static_cast<float>(lora_out(i, j));
                        const float v = t + static_cast<float>(base_out(i, j));
                        materialized.set(i, j, static_cast<double>(v));
                    }
                }
                inner = std::move(materialized);
            }
            break;
        }
    }

    // Residual and bias, both applied after the compose.
    RealMatrix y(rows, d_out, wd);
    const std::vector<double>* bias = state.bias ? &*state.bias : nullptr;
    for (index_t i = 0; i < rows; ++i) {
        for (index_t j = 0; j < d_out; ++j) {
            const float yb = static_cast<float>(base_out(i, j)) + static_cast<float>(delta(i, j));
            double v = round_to_dtype(static_cast<double>(yb), wd);
            if (bias) {
                const float withb = static_cast<float>(v) + static_cast<float>((*bias)[j]);
                v = round_to_dtype(static_cast<double>(withb), wd);
            }
            y.mutable_data()[i * d_out + j] = v;
        }
    }

    LayerForwardResult result{std::move(y),
                              LayerSaved{x, std::move(lora_mid), std::move(base_out),
                                         std::move(lora_out), std::move(w_norm), std::move(g),
                                         std::move(inner), decision}};
    return result;
}

LayerGrads layer_backward(const DoraLinearState& state, const LayerSaved& saved,
                          const RealMatrix& d_y) {
    if (d_y.rows() != saved.x.rows() || d_y.cols() != state.d_out()) {
        throw std::invalid_argument("layer_backward: dY shape mismatch");
    }
    const bool mag_grad = state.mag_trainable;
    if (mag_grad && !saved.inner) {
        throw std::invalid_argument("layer_backward: saved bundle lacks inner for magnitude grad");
    }

    GradBundle bundle = compose_backward(d_y, saved.g, state.adapter.s,
                                         saved.inner ? &*saved.inner : nullptr, saved.w_norm,
                                         mag_grad);

    const DTypeSpec& wd = state.working_dtype;
    // dB = d_lora^T * (X A^T);  dA = (d_lora B)^T * X
    RealMatrix d_b = working_matmul(transpose(bundle.d_lora), saved.lora_mid, wd);
    RealMatrix d_mid = working_matmul(bundle.d_lora, state.adapter.B, wd);
    RealMatrix d_a = working_matmul(transpose(d_mid), saved.x, wd);

    LayerGrads grads{std::move(d_a), std::move(d_b), std::move(bundle.d_mag)};
    return grads;
}

}  // namespace dorafactor
