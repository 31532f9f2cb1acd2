#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dorafactor/compose.hpp"

namespace dorafactor {

// Fraction of entries inside the collapse zone |g - 1| < collapse_threshold
// for each format, i.e. the share of magnitude scales a given precision
// rounds to exactly 1.
std::vector<double> collapse_fractions(const std::vector<double>& g,
                                       const std::vector<DTypeSpec>& specs);

struct GaussianModel {
    double mean = 1.0;
    double stddev = 0.0015;
};

// Deterministic magnitude-scale sample: synthetic gaussian, or a replay of
// real adapter statistics from a plain-text one-value-per-line file.
std::vector<double> sample_g(const GaussianModel& model, index_t n, std::uint64_t seed);
std::vector<double> sample_g_from_file(const std::string& path);

struct SweepPoint {
    double g = 1.0;            // grid value before storage rounding
    double g_stored = 1.0;     // after rounding into the sweep dtype
    double stable_err = 0.0;   // max-abs vs fp64 reference
    double naive_err = 0.0;
    double fused_err = 0.0;
};

struct SweepConfig {
    index_t rows = 512;
    index_t d_out = 2048;
    DTypeSpec dtype = DTypeSpec::bf16e();
    double fixture_stddev = 16.0;  // base/lora ~ Normal(0, 16)
    double s = 0.25;
    std::uint64_t seed = 0;
};

// Default grid: 129 uniform points across [1 - 2^-6, 1 + 2^-6].
std::vector<double> default_sweep_grid();

// Per grid point: fresh fixtures seeded by (seed, index), constant g
// broadcast (stored in the sweep dtype), and the max-abs deviation of each
// compose form from an fp64 evaluation of the same stored operands.
// fused_err equals stable_err bitwise everywhere (path parity).
std::vector<SweepPoint> cancellation_sweep(const std::vector<double>& grid,
                                           const SweepConfig& config);

struct SweepSummary {
    double peak_stable = 0.0;
    double peak_naive = 0.0;
    double peak_ratio = 0.0;
    bool dominance = false;    // stable_err <= naive_err at every point
    bool path_parity = false;  // fused_err == stable_err at every point
};

SweepSummary summarize_sweep(const std::vector<SweepPoint>& points);

}  // namespace dorafactor
