#pragma once

#include <cstdint>
#include <string>

namespace dorafactor {

// Storage/compute formats understood by the library. BF16E and FP16E are
// software-emulated: values live in wider hardware floats but are re-rounded
// to the target grid after every arithmetic step that is declared to happen
// "in" that format.
enum class DTypeKind : std::uint8_t { FP64, FP32, BF16E, FP16E };

struct DTypeSpec {
    DTypeKind kind = DTypeKind::FP32;
    int mantissa_bits = 23;          // stored fraction bits
    double norm_eps = 1e-12;         // division guard for magnitude scaling
    double ulp_at_one = 0x1p-23;     // spacing just above 1.0
    double collapse_threshold = 0x1p-24;  // half-ulp at 1.0
    int storage_bytes = 4;           // element size used for byte accounting

    static const DTypeSpec& fp64();
    static const DTypeSpec& fp32();
    static const DTypeSpec& bf16e();
    static const DTypeSpec& fp16e();

    static const DTypeSpec& from_kind(DTypeKind kind);
    // Accepts "fp64", "fp32", "bf16", "fp16" (and the *e spellings).
    static const DTypeSpec& from_name(const std::string& name);

    const char* name() const;
};

inline bool operator==(const DTypeSpec& a, const DTypeSpec& b) { return a.kind == b.kind; }
inline bool operator!=(const DTypeSpec& a, const DTypeSpec& b) { return a.kind != b.kind; }

// Round an fp64 value to the nearest representable value of the target
// format, ties to even. Total: NaN stays NaN, out-of-range values go to
// +/-Inf per the format's range, subnormals are kept (no flush-to-zero).
// FP64 targets return the input unchanged.
double round_to_dtype(double x, const DTypeSpec& spec);

// IEEE-754 round-to-nearest single-precision square root.
// Negative inputs give NaN; +/-0 pass through.
float correctly_rounded_sqrt_f32(float x);

// max(x, floor) that propagates NaN instead of collapsing it to the floor.
float nan_preserving_clamp_min(float x, float floor);

}  // namespace dorafactor
