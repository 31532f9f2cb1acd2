#include "dorafactor/dtype.hpp"

#include <cmath>
#include <stdexcept>

namespace dorafactor {

namespace {

constexpr DTypeSpec kFp64{DTypeKind::FP64, 52, 1e-12, 0x1p-52, 0x1p-53, 8};
constexpr DTypeSpec kFp32{DTypeKind::FP32, 23, 1e-12, 0x1p-23, 0x1p-24, 4};
constexpr DTypeSpec kBf16{DTypeKind::BF16E, 7, 1e-6, 0x1p-7, 0x1p-8, 2};
constexpr DTypeSpec kFp16{DTypeKind::FP16E, 10, 1e-6, 0x1p-10, 0x1p-11, 2};

struct FormatLimits {
    int sig_bits;       // significand bits including the implicit one
    int min_normal_exp; // smallest e with normals in [2^e, 2^(e+1))
    double max_finite;
};

// bf16 shares fp32's exponent range; fp16 is the IEEE binary16 range.
constexpr FormatLimits kBf16Limits{8, -126, 0x1.FEp127};
constexpr FormatLimits kFp16Limits{11, -14, 65504.0};

double round_to_limits(double x, const FormatLimits& fmt) {
    if (x == 0.0 || !std::isfinite(x)) return x;
    int bexp = 0;
    std::frexp(x, &bexp);  // |x| in [2^(bexp-1), 2^bexp)
    // Scale so one target ulp becomes 1.0, round to integer (the ambient
    // rounding mode is round-to-nearest-even), scale back. Below the normal
    // range the ulp is pinned at the subnormal spacing.
    int shift = fmt.sig_bits - bexp;
    const int subnormal_shift = fmt.sig_bits - 1 - fmt.min_normal_exp;
    if (shift > subnormal_shift) shift = subnormal_shift;
    const double rounded = std::ldexp(std::nearbyint(std::ldexp(x, shift)), -shift);
    if (std::fabs(rounded) > fmt.max_finite) {
        return std::copysign(HUGE_VAL, x);
    }
    return rounded;
}

}  // namespace

const DTypeSpec& DTypeSpec::fp64() { return kFp64; }
const DTypeSpec& DTypeSpec::fp32() { return kFp32; }
const DTypeSpec& DTypeSpec::bf16e() { return kBf16; }
const DTypeSpec& DTypeSpec::fp16e() { return kFp16; }

const DTypeSpec& DTypeSpec::from_kind(DTypeKind kind) {
    switch (kind) {
        case DTypeKind::FP64: return kFp64;
        case DTypeKind::FP32: return kFp32;
        case DTypeKind::BF16E: return kBf16;
        case DTypeKind::FP16E: return kFp16;
    }
    throw std::invalid_argument("unknown dtype kind");
}

const DTypeSpec& DTypeSpec::from_name(const std::string& name) {
    if (name == "fp64" || name == "f64") return kFp64;
    if (name == "fp32" || name == "f32") return kFp32;
    if (name == "bf16" || name == "bf16e") return kBf16;
    if (name == "fp16" || name == "fp16e") return kFp16;
    throw std::invalid_argument("unknown dtype name: " + name);
}

const char* DTypeSpec::name() const {
    switch (kind) {
        case DTypeKind::FP64: return "fp64";
        case DTypeKind::FP32: return "fp32";
        case DTypeKind::BF16E: return "bf16";
        case DTypeKind::FP16E: return "fp16";
    }
    return "?";
}

double round_to_dtype(double x, const DTypeSpec& spec) {
    switch (spec.kind) {
        case DTypeKind::FP64: return x;
        case DTypeKind::FP32: return static_cast<double>(static_cast<float>(x));
        case DTypeKind::BF16E: return round_to_limits(x, kBf16Limits);
        case DTypeKind::FP16E: return round_to_limits(x, kFp16Limits);
    }
    return x;
}

float correctly_rounded_sqrt_f32(float x) {
    return std::sqrt(x);
}

float nan_preserving_clamp_min(float x, float floor) {
    if (std::isnan(x)) return x;
    return x < floor ? floor : x;
}

}  // namespace dorafactor
