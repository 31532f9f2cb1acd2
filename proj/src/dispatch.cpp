#include "dorafactor/dispatch.hpp"

#include <algorithm>
#include <stdexcept>

namespace dorafactor {

ForceMode force_mode_from_name(const std::string& name) {
    if (name == "auto") return ForceMode::Auto;
    if (name == "on" || name == "1") return ForceMode::On;
    if (name == "off" || name == "0") return ForceMode::Off;
    throw std::invalid_argument("unknown force mode: " + name);
}

const char* force_mode_name(ForceMode mode) {
    switch (mode) {
        case ForceMode::Auto: return "auto";
        case ForceMode::On: return "on";
        case ForceMode::Off: return "off";
    }
    return "?";
}

const char* dispatch_reason_name(DispatchReason r) {
    switch (r) {
        case DispatchReason::NO_ACCELERATOR: return "NO_ACCELERATOR";
        case DispatchReason::NO_KERNELS: return "NO_KERNELS";
        case DispatchReason::FORCED: return "FORCED";
        case DispatchReason::NON_CONTIGUOUS: return "NON_CONTIGUOUS";
        case DispatchReason::SHAPE_GUARD: return "SHAPE_GUARD";
        case DispatchReason::BELOW_CROSSOVER: return "BELOW_CROSSOVER";
        case DispatchReason::ABOVE_CROSSOVER: return "ABOVE_CROSSOVER";
        case DispatchReason::INFERENCE: return "INFERENCE";
        case DispatchReason::GRAD_OUTSIDE_TRAINING: return "GRAD_OUTSIDE_TRAINING";
    }
    return "?";
}

bool TierDecision::has_reason(DispatchReason r) const {
    return std::find(reasons.begin(), reasons.end(), r) != reasons.end();
}

TierDecision select_tier(const DispatchContext& ctx) {
    TierDecision d;

    // Hard fallbacks first; every triggered rule is recorded.
    if (!ctx.accelerator_available) d.reasons.push_back(DispatchReason::NO_ACCELERATOR);
    if (!ctx.kernels_available) d.reasons.push_back(DispatchReason::NO_KERNELS);
    if (ctx.force_fused == ForceMode::Off) d.reasons.push_back(DispatchReason::FORCED);
    if (!ctx.contiguous) d.reasons.push_back(DispatchReason::NON_CONTIGUOUS);
    if (!ctx.mag_broadcast_last_dim) d.reasons.push_back(DispatchReason::SHAPE_GUARD);
    if (!ctx.d_out_divisible_128) d.reasons.push_back(DispatchReason::SHAPE_GUARD);
    if (!d.reasons.empty()) {
        d.tier = Tier::Eager;
        return d;
    }

    if (!ctx.requires_grad) {
        d.tier = Tier::FusedForward;
        d.reasons.push_back(DispatchReason::INFERENCE);
        return d;
    }

    if (!ctx.training) {
        // grad demanded outside a training step: no backward kernel applies
        d.tier = Tier::Eager;
        d.reasons.push_back(DispatchReason::GRAD_OUTSIDE_TRAINING);
        return d;
    }

    switch (ctx.force_fused_backward) {
        case ForceMode::On:
            d.tier = Tier::FusedBackward;
            d.reasons.push_back(DispatchReason::FORCED);
            return d;
        case ForceMode::Off:
            d.tier = Tier::Eager;
            d.reasons.push_back(DispatchReason::FORCED);
            return d;
        case ForceMode::Auto:
            break;
    }

    const std::uint64_t elems = static_cast<std::uint64_t>(ctx.rows) * ctx.d_out;
    if (ctx.d_out >= ctx.crossover_min_d_out && elems >= ctx.crossover_min_elems) {
        d.tier = Tier::FusedBackward;
        d.reasons.push_back(DispatchReason::ABOVE_CROSSOVER);
    } else {
        d.tier = Tier::Eager;
        d.reasons.push_back(DispatchReason::BELOW_CROSSOVER);
    }
    return d;
}

bool shape_guard(index_t activation_last_dim, index_t magnitude_len,
                 const std::vector<index_t>& broadcast_dims) {
    if (magnitude_len != activation_last_dim) return false;
    if (broadcast_dims.empty()) return true;  // plain 1-D vector
    if (broadcast_dims.back() != magnitude_len) return false;
    for (std::size_t i = 0; i + 1 < broadcast_dims.size(); ++i) {
        if (broadcast_dims[i] != 1) return false;
    }
    return true;
}

}  // namespace dorafactor
