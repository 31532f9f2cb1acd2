#include "dorafactor/stability.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace dorafactor {

std::vector<double> collapse_fractions(const std::vector<double>& g,
                                       const std::vector<DTypeSpec>& specs) {
    std::vector<double> fractions(specs.size(), 0.0);
    if (g.empty()) return fractions;
    for (std::size_t si = 0; si < specs.size(); ++si) {
        const double threshold = specs[si].collapse_threshold;
        std::size_t count = 0;
        for (const double v : g) {
            if (std::fabs(v - 1.0) < threshold) ++count;
        }
        fractions[si] = static_cast<double>(count) / static_cast<double>(g.size());
    }
    return fractions;
}

std::vector<double> sample_g(const GaussianModel& model, index_t n, std::uint64_t seed) {
    return gaussian_vector(n, model.mean, model.stddev, seed);
}

std::vector<double> sample_g_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("sample_g_from_file: cannot open " + path);
    std::vector<double> values;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(line, &pos);
        } catch (const std::exception&) {
            throw std::runtime_error("sample_g_from_file: malformed value at line " +
                                     std::to_string(lineno));
        }
        while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\r')) ++pos;
        if (pos != line.size()) {
            throw std::runtime_error("sample_g_from_file: trailing junk at line " +
                                     std::to_string(lineno));
        }
        values.push_back(v);
    }
    return values;
}

std::vector<double> default_sweep_grid() {
    constexpr int kPoints = 129;
    const double half_width = 0x1p-6;
    std::vector<double> grid(kPoints);
    for (int i = 0; i < kPoints; ++i) {
        grid[i] = 1.0 - half_width + 2.0 * half_width * static_cast<double>(i) / (kPoints - 1);
    }
    return grid;
}

namespace {

double max_abs_error(const RealMatrix& got, const RealMatrix& base, const RealMatrix& lora,
                     double g_stored, double s) {
    double peak = 0.0;
    for (index_t i = 0; i < got.rows(); ++i) {
        for (index_t j = 0; j < got.cols(); ++j) {
            const double ref = (g_stored - 1.0) * base(i, j) + g_stored * (s * lora(i, j));
            const double err = std::fabs(got(i, j) - ref);
            if (err > peak) peak = err;
        }
    }
    return peak;
}

}  // namespace

std::vector<SweepPoint> cancellation_sweep(const std::vector<double>& grid,
                                           const SweepConfig& config) {
    std::vector<SweepPoint> points;
    points.reserve(grid.size());
    for (std::size_t idx = 0; idx < grid.size(); ++idx) {
        const double g_true = grid[idx];
        if (!(g_true > 0.0 && g_true < 2.0)) {
            throw std::invalid_argument("cancellation_sweep: grid values must lie in (0, 2)");
        }
        const double g_stored = round_to_dtype(g_true, config.dtype);

        const RealMatrix base = gaussian_fixture(config.rows, config.d_out, 0.0,
                                                 config.fixture_stddev,
                                                 derive_seed(config.seed, 2 * idx), config.dtype);
        const RealMatrix lora = gaussian_fixture(config.rows, config.d_out, 0.0,
                                                 config.fixture_stddev,
                                                 derive_seed(config.seed, 2 * idx + 1), config.dtype);
        const std::vector<double> g(config.d_out, g_stored);
        const ComposeInputs in{base, lora, g, config.s, config.dtype};

        SweepPoint p;
        p.g = g_true;
        p.g_stored = g_stored;
        p.stable_err = max_abs_error(stable_compose(in), base, lora, g_stored, config.s);
        p.naive_err = max_abs_error(naive_compose(in), base, lora, g_stored, config.s);
        p.fused_err = max_abs_error(fused_compose(in).delta, base, lora, g_stored, config.s);
        points.push_back(p);
    }
    return points;
}

SweepSummary summarize_sweep(const std::vector<SweepPoint>& points) {
    SweepSummary s;
    s.dominance = true;
    s.path_parity = true;
    for (const auto& p : points) {
        if (p.stable_err > s.peak_stable) s.peak_stable = p.stable_err;
        if (p.naive_err > s.peak_naive) s.peak_naive = p.naive_err;
        if (p.stable_err > p.naive_err) s.dominance = false;
        if (p.fused_err != p.stable_err) s.path_parity = false;
    }
    s.peak_ratio = s.peak_stable > 0.0 ? s.peak_naive / s.peak_stable
                                       : (s.peak_naive > 0.0 ? HUGE_VAL : 1.0);
    return s;
}

}  // namespace dorafactor
