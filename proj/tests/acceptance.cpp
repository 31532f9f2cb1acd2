// Acceptance gate: runs every criterion at its pinned tolerance and prints
// one line per criterion. Exit code is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "bench/fd_check.hpp"
#include "bench/suites.hpp"
#include "dorafactor/compose.hpp"
#include "dorafactor/factored_norm.hpp"
#include "dorafactor/layer.hpp"
#include "dorafactor/memory_model.hpp"
#include "dorafactor/reference.hpp"
#include "dorafactor/stability.hpp"

using namespace dorafactor;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration_cast<std::chrono::duration<double>>(Clock::now() - t0).count();
}

void report(int criterion, const std::string& title, bool pass, const std::string& detail,
            double elapsed_s, double budget_s) {
    const bool in_budget = budget_s <= 0.0 || elapsed_s <= budget_s;
    if (!pass || !in_budget) ++failures;
    std::printf("[%s] criterion %2d: %s (%s; %.2fs%s)\n", pass && in_budget ? "PASS" : "FAIL",
                criterion, title.c_str(), detail.c_str(), elapsed_s,
                in_budget ? "" : " OVER BUDGET");
    std::fflush(stdout);
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), pattern, a, b, c);
    return buf;
}

bool same_bits(const RealMatrix& a, const RealMatrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::memcmp(a.data().data(), b.data().data(), a.data().size() * sizeof(double)) == 0;
}

// --- criterion 1: factored norm vs dense fp64 oracle --------------------

void criterion_norm_oracle() {
    const auto t0 = Clock::now();
    const index_t dims[] = {3, 17, 64, 96, 257};
    const index_t ranks[] = {1, 2, 8, 33};
    double worst = 0.0;
    int instances = 0;
    std::uint64_t seed = 10000;
    for (index_t d_out : dims) {
        for (index_t d_in : dims) {
            for (index_t r : ranks) {
                for (int sm = 0; sm < 3; ++sm) {
                    const double s =
                        sm == 0 ? 0.0 : (sm == 1 ? 1.0 : 2.0 / std::sqrt(static_cast<double>(r)));
                    ++seed;
                    const RealMatrix w =
                        seeded_fixture(FixtureKind::Gaussian, d_out, d_in, derive_seed(seed, 0));
                    const AdapterPair adapter{
                        seeded_fixture(FixtureKind::Gaussian, r, d_in, derive_seed(seed, 1)),
                        seeded_fixture(FixtureKind::Gaussian, d_out, r, derive_seed(seed, 2)), s};
                    const std::vector<double> got =
                        factored_row_norm(w, adapter, plan_chunks(d_out, d_in));
                    const std::vector<double> want = dense_row_norm_f64(w, adapter);
                    for (index_t j = 0; j < d_out; ++j) {
                        worst = std::max(worst, std::fabs(got[j] - want[j]) /
                                                    std::max(std::fabs(want[j]), 1e-30));
                    }
                    ++instances;
                }
            }
        }
    }
    report(1, "norm oracle equivalence",
           instances >= 200 && worst <= 1e-5,
           fmt("%.0f instances, max rel err %.2e vs 1e-5", instances, worst), seconds_since(t0),
           10.0);
}

// --- criterion 2: theory table -------------------------------------------

void criterion_theory_table() {
    const auto t0 = Clock::now();
    const double printed[8] = {63.0, 9.8, 7.1, 20.4, 15.1, 9.8, 26.2, 71.3};
    const auto rows = emit_theory_table(theory_table_shapes());
    bool pass = rows.size() == 8;
    for (std::size_t i = 0; i < rows.size() && pass; ++i) {
        pass = std::round(rows[i].theory_ratio * 10.0) / 10.0 == printed[i];
    }
    pass = pass && std::round(theoretical_reduction(8192, 8192, 512) * 10.0) / 10.0 == 15.1;
    report(2, "theory table ratios", pass, "8 shapes + the 15.1x reference point",
           seconds_since(t0), 0.0);
}

// --- criterion 3: identity baseline bytes ---------------------------------

void criterion_identity_bytes() {
    const auto t0 = Clock::now();
    const std::uint64_t at4096 =
        dense_baseline_bytes(4096, 4096, DTypeSpec::bf16e(), true).identity_bytes;
    const std::uint64_t at8192 =
        dense_baseline_bytes(8192, 8192, DTypeSpec::bf16e(), true).identity_bytes;
    const bool pass = at4096 == 33554432ULL && at8192 == 134217728ULL;
    report(3, "identity baseline bytes", pass,
           fmt("%.0f and %.0f bytes", static_cast<double>(at4096), static_cast<double>(at8192)),
           seconds_since(t0), 0.0);
}

// --- criterion 4: path parity ---------------------------------------------

void criterion_path_parity() {
    const auto t0 = Clock::now();
    const DTypeSpec* dts[] = {&DTypeSpec::fp32(), &DTypeSpec::bf16e(), &DTypeSpec::fp16e()};
    int cases = 0, equal = 0;
    for (std::uint64_t trial = 0; trial < 1000; ++trial) {
        const std::uint64_t seed = derive_seed(77000, trial);
        const index_t rows = 1 + seed % 80;
        const index_t d_out = 1 + derive_seed(seed, 1) % 260;
        const DTypeSpec& dt = *dts[trial % 3];
        const double s = trial % 9 == 0 ? 0.0 : -0.5 + 0.002 * (derive_seed(seed, 2) % 1000);
        const RealMatrix base = gaussian_fixture(rows, d_out, 0.0, 4.0, derive_seed(seed, 3), dt);
        const RealMatrix lora = gaussian_fixture(rows, d_out, 0.0, 4.0, derive_seed(seed, 4), dt);
        std::vector<double> g = gaussian_vector(d_out, 1.0, 0.05, derive_seed(seed, 5));
        for (double& v : g) v = round_to_dtype(v, dt);
        const ComposeInputs in{base, lora, g, s, dt};
        const RealMatrix stable = stable_compose(in);
        const RealMatrix fused = fused_compose(in).delta;
        const RealMatrix dual = dual_output_compose(in, trial % 2 == 0).delta;
        ++cases;
        if (same_bits(stable, fused) && same_bits(stable, dual)) ++equal;
    }
    report(4, "compose path parity", cases >= 1000 && equal == cases,
           fmt("%.0f/%.0f cases bitwise identical", equal, cases), seconds_since(t0), 30.0);
}

// --- criterion 5: stability dominance -------------------------------------

void criterion_stability() {
    const auto t0 = Clock::now();
    SweepConfig cfg;
    cfg.seed = 424242;
    const std::vector<SweepPoint> points = cancellation_sweep(default_sweep_grid(), cfg);
    const SweepSummary s = summarize_sweep(points);
    const bool pass = s.dominance && s.path_parity && s.peak_ratio >= 2.0;
    report(5, "stable-form dominance over the sweep", pass,
           fmt("peak ratio %.2f vs 2.0", s.peak_ratio) +
               (s.dominance ? ", dominance at every grid point" : ", dominance violated") +
               (s.path_parity ? "" : ", fused/stable parity violated"),
           seconds_since(t0), 20.0);
}

// --- criterion 6: collapse fractions --------------------------------------

void criterion_collapse() {
    const auto t0 = Clock::now();
    const std::vector<double> g = sample_g(GaussianModel{1.0, 0.0015}, 1000000, 31415);
    const std::vector<double> f =
        collapse_fractions(g, {DTypeSpec::bf16e(), DTypeSpec::fp16e()});
    const bool pass = f[0] >= 0.95 && f[1] >= 0.15 && f[1] <= 0.35;
    report(6, "collapse-zone fractions", pass,
           fmt("bf16 %.4f >= 0.95, fp16 %.4f in [0.15, 0.35]", f[0], f[1]), seconds_since(t0),
           5.0);
}

// --- criterion 7: gradient correctness ------------------------------------

double detached_loss(const DoraLinearState& state, const RealMatrix& x, const AdapterPair& ad,
                     const Magnitude& m, const std::vector<double>& wn) {
    double acc = 0.0;
    for (index_t i = 0; i < x.rows(); ++i) {
        for (index_t o = 0; o < state.d_out(); ++o) {
            double base = 0.0, lora = 0.0;
            for (index_t k = 0; k < state.d_in(); ++k) base += x(i, k) * state.w(o, k);
            for (index_t l = 0; l < ad.rank(); ++l) {
                double mid = 0.0;
                for (index_t k = 0; k < state.d_in(); ++k) mid += x(i, k) * ad.A(l, k);
                lora += mid * ad.B(o, l);
            }
            const double g = m.values[o] / std::max(wn[o], 1e-12);
            acc += base + (g - 1.0) * base + g * (ad.s * lora);
            if (state.bias) acc += (*state.bias)[o];
        }
    }
    return acc;
}

void criterion_gradients() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    bool d_base_zero_ok = true;
    int instances = 0;
    for (std::uint64_t inst = 0; inst < 20; ++inst) {
        const std::uint64_t seed = derive_seed(88000, inst);
        const index_t rows = 2 + seed % 4;
        const index_t d_in = 3 + derive_seed(seed, 1) % 6;
        const index_t d_out = 3 + derive_seed(seed, 2) % 8;
        const index_t r = 1 + derive_seed(seed, 3) % 3;

        RealMatrix w = gaussian_fixture(d_out, d_in, 0.0, 0.5, derive_seed(seed, 4));
        AdapterPair adapter{gaussian_fixture(r, d_in, 0.0, 0.5, derive_seed(seed, 5)),
                            gaussian_fixture(d_out, r, 0.0, 0.5, derive_seed(seed, 6)),
                            2.0 / std::sqrt(static_cast<double>(r))};
        Magnitude mag{gaussian_vector(d_out, 1.5, 0.2, derive_seed(seed, 7)), DTypeSpec::fp32()};
        DoraLinearState state = make_layer_state(std::move(w), std::move(adapter), std::move(mag),
                                                 std::nullopt, DTypeSpec::fp32());
        const RealMatrix x = gaussian_fixture(rows, d_in, 0.0, 1.0, derive_seed(seed, 8));
        const LayerForwardResult fwd = layer_forward(state, x);
        RealMatrix d_y(rows, d_out, DTypeSpec::fp32());
        for (double& v : d_y.mutable_data()) v = 1.0;
        const LayerGrads grads = layer_backward(state, fwd.saved, d_y);
        const std::vector<double>& wn = fwd.saved.w_norm;

        AdapterPair ad = state.adapter;
        for (index_t l = 0; l < ad.rank(); ++l) {
            for (index_t k = 0; k < state.d_in(); ++k) {
                const double theta = ad.A(l, k);
                const double h = dorafactor::bench::fd_step(theta);
                ad.A.set(l, k, theta + h);
                const double up = detached_loss(state, x, ad, state.magnitude, wn);
                const double up_theta = ad.A(l, k);
                ad.A.set(l, k, theta - h);
                const double dn = detached_loss(state, x, ad, state.magnitude, wn);
                const double fd = (up - dn) / (up_theta - ad.A(l, k));
                ad.A.set(l, k, theta);
                worst = std::max(worst, dorafactor::bench::rel_err(grads.d_a(l, k), fd));
            }
        }
        for (index_t o = 0; o < state.d_out(); ++o) {
            for (index_t l = 0; l < ad.rank(); ++l) {
                const double theta = ad.B(o, l);
                const double h = dorafactor::bench::fd_step(theta);
                ad.B.set(o, l, theta + h);
                const double up = detached_loss(state, x, ad, state.magnitude, wn);
                const double up_theta = ad.B(o, l);
                ad.B.set(o, l, theta - h);
                const double dn = detached_loss(state, x, ad, state.magnitude, wn);
                const double fd = (up - dn) / (up_theta - ad.B(o, l));
                ad.B.set(o, l, theta);
                worst = std::max(worst, dorafactor::bench::rel_err(grads.d_b(o, l), fd));
            }
        }
        Magnitude m = state.magnitude;
        for (index_t o = 0; o < state.d_out(); ++o) {
            const double theta = m.values[o];
            const double h = dorafactor::bench::fd_step(theta);
            m.values[o] = round_to_dtype(theta + h, DTypeSpec::fp32());
            const double up = detached_loss(state, x, state.adapter, m, wn);
            const double up_theta = m.values[o];
            m.values[o] = round_to_dtype(theta - h, DTypeSpec::fp32());
            const double dn = detached_loss(state, x, state.adapter, m, wn);
            const double fd = (up - dn) / (up_theta - m.values[o]);
            m.values[o] = theta;
            worst = std::max(worst, dorafactor::bench::rel_err((*grads.d_mag)[o], fd));
        }
        ++instances;
    }

    {
        const RealMatrix d_y = gaussian_fixture(16, 48, 0.0, 1.0, 91011);
        const std::vector<double> g(48, 1.0);
        const GradBundle out = compose_backward(d_y, g, 0.7, nullptr, {}, false);
        for (const double v : out.d_base.data()) {
            if (v != 0.0) d_base_zero_ok = false;
        }
    }

    report(7, "gradient correctness vs finite differences",
           instances >= 20 && worst <= 1e-3 && d_base_zero_ok,
           fmt("%.0f instances, max rel err %.2e vs 1e-3", instances, worst) +
               (d_base_zero_ok ? ", d_base exactly 0 at g=1" : ", d_base NOT zero at g=1"),
           seconds_since(t0), 10.0);
}

// --- criterion 8: dispatch truth table ------------------------------------

void criterion_dispatch() {
    const auto t0 = Clock::now();
    const auto& table = dorafactor::bench::canonical_dispatch_contexts();
    bool pass = table.size() == 24;
    bool saw_kv512 = false;
    for (const auto& dc : table) {
        const TierDecision d = select_tier(dc.ctx);
        if (d.tier != dc.expected) pass = false;
        if (d.tier == Tier::Eager && d.reasons.empty()) pass = false;
        if (dc.ctx.training && dc.ctx.d_out == 512 &&
            dc.ctx.force_fused_backward == ForceMode::Auto) {
            saw_kv512 = d.tier == Tier::Eager;
        }
    }
    const index_t fleet[] = {4096, 512, 512, 4096, 11008, 4096, 4096};
    int tier1 = 0;
    for (const index_t d_out : fleet) {
        DispatchContext c;
        c.training = true;
        c.requires_grad = true;
        c.rows = 4096;
        c.d_out = d_out;
        c.d_out_divisible_128 = d_out % 128 == 0;
        if (select_tier(c).tier == Tier::FusedBackward) ++tier1;
    }
    pass = pass && saw_kv512 && tier1 == 5;
    report(8, "dispatch truth table", pass,
           fmt("24 contexts, d_out=512 below crossover, fleet tier-1 %.0f/7", tier1),
           seconds_since(t0), 0.0);
}

// --- criterion 9: traffic model -------------------------------------------

void criterion_traffic() {
    const auto t0 = Clock::now();
    const DTypeSpec& dt = DTypeSpec::fp32();
    const index_t rows = 192, d_out = 384;
    const RealMatrix base = gaussian_fixture(rows, d_out, 0.0, 1.0, 111, dt);
    const RealMatrix lora = gaussian_fixture(rows, d_out, 0.0, 1.0, 112, dt);
    const std::vector<double> g(d_out, 1.1);
    const FusedResult fused = fused_compose({base, lora, g, 1.0, dt});
    const TrafficReport eager = eager_traffic_model(rows, d_out, dt);
    const double ratio =
        static_cast<double>(eager.bytes_total) / static_cast<double>(fused.traffic.bytes_total);
    const bool pass = fused.traffic.pass_count == 1 && fused.traffic.activation_reads == 2 &&
                      fused.traffic.activation_writes == 1 && eager.pass_count >= 10 &&
                      eager.pass_count <= 12 && ratio >= 2.5 && ratio <= 4.0;
    report(9, "traffic model", pass,
           fmt("fused 1 pass, eager %.0f passes, bytes ratio %.2f", eager.pass_count, ratio),
           seconds_since(t0), 0.0);
}

// --- criterion 10: artifact determinism -----------------------------------

void criterion_determinism() {
    const auto t0 = Clock::now();
    dorafactor::bench::SuiteConfig cfg;
    cfg.repeats = 1;
    cfg.warmup = 0;
    cfg.seed = 20260809;
    bool pass = true;
    std::string failed_suite;
    for (const std::string& suite : dorafactor::bench::suite_names()) {
        const auto a =
            dorafactor::bench::strip_timing(dorafactor::bench::run_suite(suite, cfg)).dump(2);
        const auto b =
            dorafactor::bench::strip_timing(dorafactor::bench::run_suite(suite, cfg)).dump(2);
        if (a != b) {
            pass = false;
            failed_suite = suite;
        }
    }
    report(10, "artifact determinism", pass,
           pass ? "all 7 suites byte-identical excluding timing"
                : "suite " + failed_suite + " diverged",
           seconds_since(t0), 0.0);
}

}  // namespace

int main() {
    std::printf("acceptance suite\n");
    criterion_norm_oracle();
    criterion_theory_table();
    criterion_identity_bytes();
    criterion_path_parity();
    criterion_stability();
    criterion_collapse();
    criterion_gradients();
    criterion_dispatch();
    criterion_traffic();
    criterion_determinism();
    std::printf("%d of 10 criteria failed\n", failures);
    return failures;
}
