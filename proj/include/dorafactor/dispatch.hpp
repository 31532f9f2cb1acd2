#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dorafactor/matrix.hpp"

namespace dorafactor {

enum class ForceMode : std::uint8_t { Auto, On, Off };

ForceMode force_mode_from_name(const std::string& name);
const char* force_mode_name(ForceMode mode);

// Everything the tier selector looks at. The crossover constants default to
// the tuned values but stay configurable; the heuristic may need retuning on
// other hardware.
struct DispatchContext {
    bool training = false;
    bool requires_grad = false;
    bool accelerator_available = true;
    bool kernels_available = true;
    ForceMode force_fused = ForceMode::Auto;
    ForceMode force_fused_backward = ForceMode::Auto;
    index_t rows = 1;   // batch x seq, flattened
    index_t d_out = 1;
    bool contiguous = true;
    bool mag_broadcast_last_dim = true;
    bool d_out_divisible_128 = true;

    index_t crossover_min_d_out = 2048;
    std::uint64_t crossover_min_elems = 2048ULL * 6144ULL;
};

enum class Tier : int { FusedBackward = 1, FusedForward = 2, Eager = 3 };

enum class DispatchReason : std::uint8_t {
    NO_ACCELERATOR,
    NO_KERNELS,
    FORCED,
    NON_CONTIGUOUS,
    SHAPE_GUARD,
    BELOW_CROSSOVER,
    ABOVE_CROSSOVER,
    INFERENCE,
    GRAD_OUTSIDE_TRAINING,
};

const char* dispatch_reason_name(DispatchReason r);

struct TierDecision {
    Tier tier = Tier::Eager;
    std::vector<DispatchReason> reasons;

    bool has_reason(DispatchReason r) const;
};

// Total function. Tier 3 whenever any availability/force/shape guard
// trips; otherwise inference goes to Tier 2 and training resolves the
// fused-backward crossover (>= on both thresholds in auto mode).
TierDecision select_tier(const DispatchContext& ctx);

// True iff the magnitude broadcasts exclusively along the activation's last
// dimension: its element count matches the last dim, its trailing extent
// carries all of it, and every leading extent is 1. Conv-style [1,C,1,1]
// against [N,C,H,W] fails.
bool shape_guard(index_t activation_last_dim, index_t magnitude_len,
                 const std::vector<index_t>& broadcast_dims);

}  // namespace dorafactor
