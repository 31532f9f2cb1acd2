#include "suites.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "dorafactor/compose.hpp"
#include "dorafactor/factored_norm.hpp"
#include "dorafactor/layer.hpp"
#include "dorafactor/memory_model.hpp"
#include "dorafactor/reference.hpp"
#include "dorafactor/stability.hpp"
#include "fd_check.hpp"

namespace dorafactor::bench {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t elapsed_ns(Clock::time_point t0, Clock::time_point t1) {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
}

template <typename Fn>
json time_kernel(Fn&& fn, const SuiteConfig& cfg) {
    const int repeats = std::max(cfg.repeats, 1);
    for (int i = 0; i < cfg.warmup; ++i) fn();
    std::vector<std::int64_t> samples(repeats);
    for (int i = 0; i < repeats; ++i) {
        const auto t0 = Clock::now();
        fn();
        samples[i] = elapsed_ns(t0, Clock::now());
    }
    std::sort(samples.begin(), samples.end());
    const std::int64_t median = repeats % 2 ? samples[repeats / 2]
                                            : (samples[repeats / 2 - 1] + samples[repeats / 2]) / 2;
    return json{{"median_ns", median}, {"repeats", repeats}};
}

std::vector<json> run_cases(std::size_t n, int parallel, const std::function<json(std::size_t)>& fn) {
    std::vector<json> out(n);
    if (parallel <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) out[i] = fn(i);
    };
    std::vector<std::thread> pool;
    const int nthreads = std::min<int>(parallel, static_cast<int>(n));
    pool.reserve(nthreads);
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    return out;
}

json config_json(const SuiteConfig& cfg) {
    return json{{"shapes", cfg.shapes},
                {"rank", cfg.rank},
                {"dtype", cfg.dtype.name()},
                {"repeats", cfg.repeats},
                {"warmup", cfg.warmup},
                {"seed", cfg.seed},
                {"fused", force_mode_name(cfg.fused)},
                {"fused_backward", force_mode_name(cfg.fused_backward)},
                {"norm_chunk_mb", cfg.norm_chunk_mb},
                {"parallel", cfg.parallel}};
}

json finish_artifact(const std::string& suite, const SuiteConfig& cfg, std::vector<json> cases,
                     json summary_extra, std::int64_t total_ns) {
    std::size_t passed = 0;
    for (const auto& c : cases) {
        if (c.value("pass", false)) ++passed;
    }
    json summary{{"total", cases.size()}, {"passed", passed}};
    for (auto& [k, v] : summary_extra.items()) summary[k] = v;
    return json{{"schema", 1},          {"suite", suite},
                {"config", config_json(cfg)}, {"cases", std::move(cases)},
                {"summary", std::move(summary)}, {"timing", json{{"total_ns", total_ns}}}};
}

double max_rel_err(const std::vector<double>& got, const std::vector<double>& want) {
    double peak = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        const double denom = std::max(std::fabs(want[i]), 1e-30);
        peak = std::max(peak, std::fabs(got[i] - want[i]) / denom);
    }
    return peak;
}

double norm_tolerance(const DTypeSpec& dtype) {
    return dtype.kind == DTypeKind::FP32 ? 1e-5 : 1e-2;
}

std::string shape_name(index_t d_out, index_t d_in) {
    return std::to_string(d_out) + "x" + std::to_string(d_in);
}

// ---------------------------------------------------------------- norm ----

struct NormCase {
    index_t d_out, d_in, r;
    double s;
};

std::vector<NormCase> norm_shape_set(const std::string& shapes, index_t /*rank*/) {
    const std::vector<index_t> dims = {3, 17, 64, 96, 257};
    const std::vector<index_t> ranks = {1, 2, 8, 33};
    std::vector<NormCase> cases;
    if (shapes == "extended") {
        for (index_t d_out : dims) {
            for (index_t d_in : dims) {
                for (index_t r : ranks) {
                    for (int sm = 0; sm < 3; ++sm) {
                        const double s = sm == 0 ? 0.0 : (sm == 1 ? 1.0 : 2.0 / std::sqrt(static_cast<double>(r)));
                        cases.push_back({d_out, d_in, r, s});
                    }
                }
            }
        }
    } else {  // core
        std::size_t i = 0;
        for (index_t d_out : dims) {
            for (index_t d_in : dims) {
                const index_t r = ranks[i % ranks.size()];
                const int sm = static_cast<int>(i % 3);
                const double s = sm == 0 ? 0.0 : (sm == 1 ? 1.0 : 2.0 / std::sqrt(static_cast<double>(r)));
                cases.push_back({d_out, d_in, r, s});
                ++i;
            }
        }
    }
    return cases;
}

json run_norm_case(const NormCase& nc, std::uint64_t seed, const SuiteConfig& cfg) {
    const DTypeSpec& dt = cfg.dtype.kind == DTypeKind::FP64 ? DTypeSpec::fp32() : cfg.dtype;
    const RealMatrix w = seeded_fixture(FixtureKind::Gaussian, nc.d_out, nc.d_in, derive_seed(seed, 0), dt);
    AdapterPair adapter{seeded_fixture(FixtureKind::Gaussian, nc.r, nc.d_in, derive_seed(seed, 1), dt),
                        seeded_fixture(FixtureKind::Gaussian, nc.d_out, nc.r, derive_seed(seed, 2), dt),
                        nc.s};
    const ChunkPlan plan = plan_chunks(nc.d_out, nc.d_in, cfg.norm_chunk_mb * 1024 * 1024);

    const std::vector<double> factored = factored_row_norm(w, adapter, plan);
    const std::vector<double> oracle = dense_row_norm_f64(w, adapter);
    const double err = max_rel_err(factored, oracle);

    const OracleNormResult ident = peft_identity_norm(w, adapter);
    const OracleNormResult direct = dense_ba_norm(w, adapter);
    const bool oracles_agree = ident.w_norm == direct.w_norm;

    const double tol = norm_tolerance(dt);
    json out{{"name", "norm_" + shape_name(nc.d_out, nc.d_in) + "_r" + std::to_string(nc.r)},
             {"inputs", json{{"d_out", nc.d_out},
                             {"d_in", nc.d_in},
                             {"rank", nc.r},
                             {"s", nc.s},
                             {"seed", seed},
                             {"dtype", dt.name()},
                             {"chunk_size", plan.chunk_size},
                             {"num_chunks", plan.num_chunks}}},
             {"outputs", json{{"rel_err_vs_oracle", err},
                              {"oracle_paths_bitwise_equal", oracles_agree},
                              {"tolerance", tol}}},
             {"pass", err <= tol && oracles_agree}};
    out["timing"] = time_kernel([&] { factored_row_norm(w, adapter, plan); }, cfg);
    return out;
}

json run_norm_table6_case(const ShapeRank& sr, std::uint64_t seed, const SuiteConfig& cfg) {
    const double ratio = theoretical_reduction(sr.d_out, sr.d_in, sr.rank);
    // Verification runs on a proportionally reduced shape; the full-size
    // norm would drag a dense fp64 oracle through multi-GB buffers.
    const index_t v_out = sr.d_out / 64, v_in = sr.d_in / 64;
    const index_t v_rank = std::max<index_t>(sr.rank / 64, 1);
    NormCase verify{v_out, v_in, v_rank, 2.0 / std::sqrt(static_cast<double>(v_rank))};

    const DTypeSpec& dt = cfg.dtype.kind == DTypeKind::FP64 ? DTypeSpec::fp32() : cfg.dtype;
    const RealMatrix w = seeded_fixture(FixtureKind::Gaussian, verify.d_out, verify.d_in,
                                        derive_seed(seed, 0), dt);
    AdapterPair adapter{
        seeded_fixture(FixtureKind::Gaussian, verify.r, verify.d_in, derive_seed(seed, 1), dt),
        seeded_fixture(FixtureKind::Gaussian, verify.d_out, verify.r, derive_seed(seed, 2), dt),
        verify.s};
    const ChunkPlan vplan = plan_chunks(verify.d_out, verify.d_in, cfg.norm_chunk_mb * 1024 * 1024);
    const double err = max_rel_err(factored_row_norm(w, adapter, vplan), dense_row_norm_f64(w, adapter));

    const ChunkPlan full_plan = plan_chunks(sr.d_out, sr.d_in, cfg.norm_chunk_mb * 1024 * 1024);
    const MemoryEstimate transient =
        factored_transient_bytes(full_plan, sr.d_out, sr.rank, false, dt.kind != DTypeKind::FP32);

    const double tol = norm_tolerance(dt);
    return json{{"name", "table6_" + shape_name(sr.d_out, sr.d_in) + "_r" + std::to_string(sr.rank)},
                {"inputs", json{{"d_out", sr.d_out},
                                {"d_in", sr.d_in},
                                {"rank", sr.rank},
                                {"seed", seed},
                                {"verify_d_out", verify.d_out},
                                {"verify_d_in", verify.d_in},
                                {"verify_rank", verify.r}}},
                {"outputs", json{{"theory_ratio", ratio},
                                 {"transient_bytes", transient.transient_bytes},
                                 {"chunk_size", full_plan.chunk_size},
                                 {"num_chunks", full_plan.num_chunks},
                                 {"oracle_agreement_rel_err", err},
                                 {"tolerance", tol}}},
                {"pass", err <= tol}};
}

json run_norm_suite(const SuiteConfig& cfg) {
    const auto t0 = Clock::now();
    std::vector<json> cases;
    if (cfg.shapes == "table6") {
        const auto& shapes = theory_table_shapes();
        cases = run_cases(shapes.size(), cfg.parallel, [&](std::size_t i) {
            return run_norm_table6_case(shapes[i], derive_seed(cfg.seed, 1000 + i), cfg);
        });
    } else {
        const auto set = norm_shape_set(cfg.shapes, cfg.rank);
        cases = run_cases(set.size(), cfg.parallel, [&](std::size_t i) {
            return run_norm_case(set[i], derive_seed(cfg.seed, i), cfg);
        });
    }
    return finish_artifact("norm", cfg, std::move(cases), json::object(), elapsed_ns(t0, Clock::now()));
}

// ------------------------------------------------------------- compose ----

bool bitwise_equal(const RealMatrix& a, const RealMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    return std::memcmp(a.data().data(), b.data().data(), a.data().size() * sizeof(double)) == 0;
}

json run_compose_parity_case(std::size_t idx, const SuiteConfig& cfg) {
    const std::uint64_t seed = derive_seed(cfg.seed, idx);
    const index_t rows = 1 + derive_seed(seed, 10) % 97;
    const index_t d_out = 1 + derive_seed(seed, 11) % 321;
    const DTypeSpec* dts[3] = {&DTypeSpec::fp32(), &DTypeSpec::bf16e(), &DTypeSpec::fp16e()};
    const DTypeSpec& dt = *dts[idx % 3];
    const double s = idx % 5 == 0 ? 0.0 : -0.5 + 2.0 * (derive_seed(seed, 12) % 1000) / 999.0;

    const RealMatrix base = gaussian_fixture(rows, d_out, 0.0, 4.0, derive_seed(seed, 0), dt);
    const RealMatrix lora = gaussian_fixture(rows, d_out, 0.0, 4.0, derive_seed(seed, 1), dt);
    std::vector<double> g = gaussian_vector(d_out, 1.0, 0.02, derive_seed(seed, 2));
    for (double& v : g) v = round_to_dtype(v, dt);
    const ComposeInputs in{base, lora, g, s, dt};

    const RealMatrix stable = stable_compose(in);
    const FusedResult fused = fused_compose(in);
    const DualResult dual = dual_output_compose(in, true);
    const DualResult dual_no_inner = dual_output_compose(in, false);

    const bool parity = bitwise_equal(stable, fused.delta) && bitwise_equal(stable, dual.delta) &&
                        bitwise_equal(stable, dual_no_inner.delta);
    const bool inner_rules = dual.inner.has_value() && !dual_no_inner.inner.has_value() &&
                             dual.traffic.activation_writes == 2 &&
                             dual_no_inner.traffic.activation_writes == 1;
    return json{{"name", "parity_" + std::to_string(idx)},
                {"inputs", json{{"rows", rows}, {"d_out", d_out}, {"dtype", dt.name()},
                                {"s", s}, {"seed", seed}}},
                {"outputs", json{{"bitwise_parity", parity}, {"inner_allocation_rules", inner_rules}}},
                {"pass", parity && inner_rules}};
}

json run_compose_traffic_case(const SuiteConfig& cfg) {
    const index_t rows = 256, d_out = 512;
    const DTypeSpec& dt = DTypeSpec::fp32();
    const RealMatrix base = gaussian_fixture(rows, d_out, 0.0, 1.0, derive_seed(cfg.seed, 7001), dt);
    const RealMatrix lora = gaussian_fixture(rows, d_out, 0.0, 1.0, derive_seed(cfg.seed, 7002), dt);
    const std::vector<double> g(d_out, 1.25);
    const ComposeInputs in{base, lora, g, 0.5, dt};

    const FusedResult fused = fused_compose(in);
    const TrafficReport eager = eager_traffic_model(rows, d_out, dt);
    const double ratio = static_cast<double>(eager.bytes_total) / static_cast<double>(fused.traffic.bytes_total);

    const std::uint64_t tiles = (rows + kDefaultTileRows - 1) / kDefaultTileRows;
    const std::uint64_t expect_bytes = 3ULL * rows * d_out * 4 + tiles * d_out * 4;
    const bool ok = fused.traffic.pass_count == 1 && fused.traffic.activation_reads == 2 &&
                    fused.traffic.activation_writes == 1 && fused.traffic.vector_reads == tiles &&
                    fused.traffic.bytes_total == expect_bytes && eager.pass_count >= 10 &&
                    eager.pass_count <= 12 && ratio >= 2.5 && ratio <= 4.0;
    json out{{"name", "traffic_model"},
             {"inputs", json{{"rows", rows}, {"d_out", d_out}, {"dtype", dt.name()}}},
             {"outputs", json{{"fused_pass_count", fused.traffic.pass_count},
                              {"fused_activation_reads", fused.traffic.activation_reads},
                              {"fused_activation_writes", fused.traffic.activation_writes},
                              {"fused_vector_reads", fused.traffic.vector_reads},
                              {"fused_bytes", fused.traffic.bytes_total},
                              {"eager_pass_count", eager.pass_count},
                              {"eager_bytes", eager.bytes_total},
                              {"bytes_ratio", ratio}}},
             {"pass", ok}};
    out["timing"] = time_kernel([&] { fused_compose(in); }, cfg);
    return out;
}

json run_compose_exact_g_case(const SuiteConfig& cfg) {
    const index_t rows = 33, d_out = 129;
    const DTypeSpec& dt = DTypeSpec::bf16e();
    const RealMatrix base = gaussian_fixture(rows, d_out, 0.0, 8.0, derive_seed(cfg.seed, 7101), dt);
    const RealMatrix lora = gaussian_fixture(rows, d_out, 0.0, 8.0, derive_seed(cfg.seed, 7102), dt);
    const std::vector<double> g(d_out, 1.0);
    const double s = 0.75;
    const ComposeInputs in{base, lora, g, s, dt};

    const RealMatrix stable = stable_compose(in);
    bool identity = true;
    for (index_t i = 0; i < rows && identity; ++i) {
        for (index_t j = 0; j < d_out; ++j) {
            const double expect = round_to_dtype(
                static_cast<double>(static_cast<float>(s) * static_cast<float>(lora(i, j))), dt);
            if (stable(i, j) != expect) {
                identity = false;
                break;
            }
        }
    }
    const GradBundle grads = compose_backward(stable, g, s, nullptr, {}, false);
    bool d_base_zero = true;
    for (const double v : grads.d_base.data()) {
        if (v != 0.0) d_base_zero = false;
    }
    return json{{"name", "exact_g_identity"},
                {"inputs", json{{"rows", rows}, {"d_out", d_out}, {"dtype", dt.name()}, {"s", s}}},
                {"outputs", json{{"delta_equals_scaled_lora", identity}, {"d_base_zero", d_base_zero}}},
                {"pass", identity && d_base_zero}};
}

json run_compose_suite(const SuiteConfig& cfg) {
    const auto t0 = Clock::now();
    const std::size_t parity_cases = cfg.shapes == "extended" ? 600 : 200;
    std::vector<json> cases = run_cases(parity_cases, cfg.parallel, [&](std::size_t i) {
        return run_compose_parity_case(i, cfg);
    });
    cases.push_back(run_compose_traffic_case(cfg));
    cases.push_back(run_compose_exact_g_case(cfg));
    return finish_artifact("compose", cfg, std::move(cases), json::object(),
                           elapsed_ns(t0, Clock::now()));
}

// ------------------------------------------------------------ backward ----

json run_backward_case(std::size_t idx, const SuiteConfig& cfg) {
    const index_t sizes[3] = {3, 8, 64};
    const index_t rows = sizes[idx % 3];
    const index_t d_out = sizes[(idx / 3) % 3];
    const std::uint64_t seed = derive_seed(cfg.seed, 500 + idx);
    const DTypeSpec& dt = DTypeSpec::fp32();

    RealMatrix base = gaussian_fixture(rows, d_out, 0.0, 1.0, derive_seed(seed, 0), dt);
    RealMatrix lora = gaussian_fixture(rows, d_out, 0.0, 1.0, derive_seed(seed, 1), dt);
    const RealMatrix d_y = gaussian_fixture(rows, d_out, 0.0, 1.0, derive_seed(seed, 2), dt);
    std::vector<double> w_norm = gaussian_vector(d_out, 2.0, 0.1, derive_seed(seed, 3));
    for (double& v : w_norm) v = round_to_dtype(std::fabs(v), dt);
    Magnitude mag{gaussian_vector(d_out, 2.0, 0.1, derive_seed(seed, 4)), dt};
    for (double& v : mag.values) v = round_to_dtype(v, dt);
    const double s = 0.8;

    const std::vector<double> g = magnitude_scale(mag, w_norm, dt);
    const ComposeInputs in{base, lora, g, s, dt};
    const DualResult dual = dual_output_compose(in, true);
    const GradBundle grads = compose_backward(d_y, g, s, &*dual.inner, w_norm, true);

    // FD loss: sum(dY (.) delta) through the fp32 stable path, with the
    // magnitude division inside the loss when m is perturbed.
    auto loss_for = [&](const RealMatrix& b, const RealMatrix& l, const Magnitude& m) {
        const std::vector<double> gg = magnitude_scale(m, w_norm, dt);
        const RealMatrix delta = stable_compose(ComposeInputs{b, l, gg, s, dt});
        double acc = 0.0;
        for (index_t i = 0; i < rows; ++i) {
            for (index_t j = 0; j < d_out; ++j) acc += d_y(i, j) * delta(i, j);
        }
        return acc;
    };

    double worst = 0.0;
    const index_t stride = std::max<index_t>(1, rows * d_out / 24);
    for (index_t flat = 0; flat < rows * d_out; flat += stride) {
        const index_t i = flat / d_out, j = flat % d_out;
        for (int which = 0; which < 2; ++which) {
            RealMatrix& target = which == 0 ? lora : base;
            const double theta = target(i, j);
            const double h = fd_step(theta);
            target.set(i, j, theta + h);
            const double up_theta = target(i, j);
            const double up = loss_for(base, lora, mag);
            target.set(i, j, theta - h);
            const double dn_theta = target(i, j);
            const double dn = loss_for(base, lora, mag);
            target.set(i, j, theta);
            const double fd = (up - dn) / (up_theta - dn_theta);
            const double analytic = which == 0 ? grads.d_lora(i, j) : grads.d_base(i, j);
            worst = std::max(worst, rel_err(analytic, fd));
        }
    }
    for (index_t j = 0; j < d_out; ++j) {
        const double theta = mag.values[j];
        const double h = fd_step(theta);
        Magnitude pert = mag;
        pert.values[j] = round_to_dtype(theta + h, dt);
        const double up = loss_for(base, lora, pert);
        const double up_theta = pert.values[j];
        pert.values[j] = round_to_dtype(theta - h, dt);
        const double dn = loss_for(base, lora, pert);
        const double fd = (up - dn) / (up_theta - pert.values[j]);
        worst = std::max(worst, rel_err((*grads.d_mag)[j], fd));
    }

    // deterministic reduction: a second run must reproduce d_mag exactly
    const GradBundle again = compose_backward(d_y, g, s, &*dual.inner, w_norm, true);
    const bool deterministic = *again.d_mag == *grads.d_mag;

    return json{{"name", "backward_fd_" + std::to_string(idx)},
                {"inputs", json{{"rows", rows}, {"d_out", d_out}, {"s", s}, {"seed", seed}}},
                {"outputs", json{{"max_rel_err_vs_fd", worst}, {"d_mag_deterministic", deterministic}}},
                {"pass", worst <= 1e-3 && deterministic}};
}

json run_backward_suite(const SuiteConfig& cfg) {
    const auto t0 = Clock::now();
    std::vector<json> cases = run_cases(20, cfg.parallel, [&](std::size_t i) {
        return run_backward_case(i, cfg);
    });
    return finish_artifact("backward", cfg, std::move(cases), json::object(),
                           elapsed_ns(t0, Clock::now()));
}

// ------------------------------------------------------------ dispatch ----

DispatchContext base_ctx(bool training, bool requires_grad, index_t rows, index_t d_out) {
    DispatchContext c;
    c.training = training;
    c.requires_grad = requires_grad;
    c.rows = rows;
    c.d_out = d_out;
    c.d_out_divisible_128 = d_out % 128 == 0;
    return c;
}

std::vector<DispatchCase> build_dispatch_contexts() {
    std::vector<DispatchCase> cases;
    auto add = [&](const std::string& name, DispatchContext ctx, Tier expected) {
        cases.push_back({name, ctx, expected});
    };

    add("infer_big", base_ctx(false, false, 4096, 4096), Tier::FusedForward);
    add("infer_small", base_ctx(false, false, 64, 512), Tier::FusedForward);
    {
        DispatchContext c = base_ctx(false, false, 4096, 4096);
        c.accelerator_available = false;
        add("infer_no_accelerator", c, Tier::Eager);
    }
    {
        DispatchContext c = base_ctx(false, false, 4096, 4096);
        c.kernels_available = false;
        add("infer_no_kernels", c, Tier::Eager);
    }
    {
        DispatchContext c = base_ctx(false, false, 4096, 4096);
        c.force_fused = ForceMode::Off;
        add("infer_force_fused_off", c, Tier::Eager);
    }
    {
        DispatchContext c = base_ctx(false, false, 4096, 4096);
        c.contiguous = false;
        add("infer_non_contiguous", c, Tier::Eager);
    }
    {
        DispatchContext c = base_ctx(false, false, 4096, 4096);
        c.mag_broadcast_last_dim = false;
        add("infer_bad_broadcast", c, Tier::Eager);
    }
    add("infer_not_div128", base_ctx(false, false, 4096, 4100), Tier::Eager);

    add("train_auto_big", base_ctx(true, true, 4096, 4096), Tier::FusedBackward);
    add("train_auto_at_crossover", base_ctx(true, true, 6144, 2048), Tier::FusedBackward);
    add("train_auto_kv_512", base_ctx(true, true, 4096, 512), Tier::Eager);
    add("train_auto_few_rows", base_ctx(true, true, 512, 4096), Tier::Eager);
    add("train_auto_just_below_elems", base_ctx(true, true, 6143, 2048), Tier::Eager);
    add("train_auto_d_out_1920", base_ctx(true, true, 8192, 1920), Tier::Eager);
    {
        DispatchContext c = base_ctx(true, true, 64, 512);
        c.force_fused_backward = ForceMode::On;
        add("train_forced_on_small", c, Tier::FusedBackward);
    }
    {
        DispatchContext c = base_ctx(true, true, 8192, 8192);
        c.force_fused_backward = ForceMode::On;
        add("train_forced_on_big", c, Tier::FusedBackward);
    }
    {
        DispatchContext c = base_ctx(true, true, 8192, 8192);
        c.force_fused_backward = ForceMode::Off;
        add("train_forced_off", c, Tier::Eager);
    }
    {
        DispatchContext c = base_ctx(true, true, 8192, 8192);
        c.force_fused = ForceMode::Off;
        add("train_force_fused_off", c, Tier::Eager);
    }
    {
        DispatchContext c = base_ctx(true, true, 8192, 8192);
        c.accelerator_available = false;
        add("train_no_accelerator", c, Tier::Eager);
    }
    {
        DispatchContext c = base_ctx(true, true, 8192, 8192);
        c.kernels_available = false;
        add("train_no_kernels", c, Tier::Eager);
    }
    {
        DispatchContext c = base_ctx(true, true, 8192, 8192);
        c.contiguous = false;
        add("train_non_contiguous", c, Tier::Eager);
    }
    {
        DispatchContext c = base_ctx(true, true, 8192, 8192);
        c.mag_broadcast_last_dim = false;
        add("train_bad_broadcast", c, Tier::Eager);
    }
    add("train_not_div128", base_ctx(true, true, 8192, 8200), Tier::Eager);
    add("grad_outside_training", base_ctx(false, true, 8192, 8192), Tier::Eager);
    return cases;
}

json run_dispatch_suite(const SuiteConfig& cfg) {
    const auto t0 = Clock::now();
    const auto table = canonical_dispatch_contexts();
    std::vector<json> cases;
    cases.reserve(table.size() + 1);
    for (const auto& dc : table) {
        const TierDecision d = select_tier(dc.ctx);
        json reasons = json::array();
        for (const auto r : d.reasons) reasons.push_back(dispatch_reason_name(r));
        const bool tier3_has_reason = d.tier != Tier::Eager || !d.reasons.empty();
        cases.push_back(json{
            {"name", dc.name},
            {"inputs", json{{"training", dc.ctx.training},
                            {"requires_grad", dc.ctx.requires_grad},
                            {"rows", dc.ctx.rows},
                            {"d_out", dc.ctx.d_out},
                            {"force_fused", force_mode_name(dc.ctx.force_fused)},
                            {"force_fused_backward", force_mode_name(dc.ctx.force_fused_backward)}}},
            {"outputs", json{{"tier", static_cast<int>(d.tier)},
                             {"expected_tier", static_cast<int>(dc.expected)},
                             {"reasons", reasons}}},
            {"pass", d.tier == dc.expected && tier3_has_reason}});
    }

    // q/k/v/o plus MLP projections of a transformer block at rows = 4096
    const std::vector<index_t> fleet = {4096, 512, 512, 4096, 11008, 4096, 4096};
    std::size_t tier1 = 0;
    for (const index_t d_out : fleet) {
        DispatchContext c = base_ctx(true, true, 4096, d_out);
        if (select_tier(c).tier == Tier::FusedBackward) ++tier1;
    }
    const double fraction = static_cast<double>(tier1) / static_cast<double>(fleet.size());
    cases.push_back(json{{"name", "fleet_tier1_fraction"},
                         {"inputs", json{{"rows", 4096}, {"d_out_set", fleet}}},
                         {"outputs", json{{"tier1_modules", tier1},
                                          {"total_modules", fleet.size()},
                                          {"fraction", fraction}}},
                         {"pass", tier1 == 5}});

    return finish_artifact("dispatch", cfg, std::move(cases),
                           json{{"tier1_fleet_fraction", fraction}}, elapsed_ns(t0, Clock::now()));
}

// -------------------------------------------------------------- memory ----

json run_memory_suite(const SuiteConfig& cfg) {
    const auto t0 = Clock::now();
    std::vector<json> cases;

    const double expected[8] = {63.0, 9.8, 7.1, 20.4, 15.1, 9.8, 26.2, 71.3};
    const auto rows = emit_theory_table(theory_table_shapes());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double rounded = std::round(rows[i].theory_ratio * 10.0) / 10.0;
        cases.push_back(json{
            {"name", "theory_" + shape_name(rows[i].d_out, rows[i].d_in) + "_r" + std::to_string(rows[i].rank)},
            {"inputs", json{{"d_out", rows[i].d_out}, {"d_in", rows[i].d_in}, {"rank", rows[i].rank}}},
            {"outputs", json{{"theory_ratio", rows[i].theory_ratio},
                             {"rounded", rounded},
                             {"expected", expected[i]}}},
            {"pass", rounded == expected[i]}});
    }

    const struct {
        index_t d_in;
        std::uint64_t expect;
    } identity_cases[] = {{4096, 33554432ULL}, {8192, 134217728ULL}};
    for (const auto& ic : identity_cases) {
        const MemoryEstimate est = dense_baseline_bytes(ic.d_in, ic.d_in, DTypeSpec::bf16e(), true);
        cases.push_back(json{{"name", "identity_bytes_bf16_" + std::to_string(ic.d_in)},
                             {"inputs", json{{"d_in", ic.d_in}, {"dtype", "bf16"}}},
                             {"outputs", json{{"identity_bytes", est.identity_bytes},
                                              {"expected", ic.expect}}},
                             {"pass", est.identity_bytes == ic.expect}});
    }

    {
        const ChunkPlan plan = plan_chunks(8192, 8192, kDefaultChunkBudgetBytes);
        const MemoryEstimate widened = factored_transient_bytes(plan, 8192, 512, false, true);
        const MemoryEstimate zero = factored_transient_bytes(plan, 8192, 512, true, true);
        const std::uint64_t chunk = 8192ULL * plan.chunk_size * 4;
        const std::uint64_t a_chunk = 512ULL * plan.chunk_size * 4;
        const std::uint64_t u = 8192ULL * 512 * 4, g = 512ULL * 512 * 4, accs = 3ULL * 8192 * 4;
        const bool ok = widened.transient_bytes == chunk + a_chunk + u + g + accs &&
                        zero.transient_bytes == chunk + a_chunk + accs &&
                        widened.persistent_bytes == 0;
        cases.push_back(json{{"name", "transient_8192_r512"},
                             {"inputs", json{{"d_out", 8192}, {"d_in", 8192}, {"rank", 512}}},
                             {"outputs", json{{"transient_bytes", widened.transient_bytes},
                                              {"transient_bytes_s_zero", zero.transient_bytes},
                                              {"chunk_buffer_bytes", chunk},
                                              {"u_bytes", u},
                                              {"gram_bytes", g}}},
                             {"pass", ok}});
    }

    {
        // rank-independence of the chunk-buffer term
        const ChunkPlan plan = plan_chunks(8192, 8192, kDefaultChunkBudgetBytes);
        const MemoryEstimate r16 = factored_transient_bytes(plan, 8192, 16, false, true);
        const MemoryEstimate r768 = factored_transient_bytes(plan, 8192, 768, false, true);
        const std::uint64_t chunk = 8192ULL * plan.chunk_size * 4;
        const std::uint64_t r16_rank_terms = r16.transient_bytes - chunk - 3ULL * 8192 * 4;
        const std::uint64_t r768_rank_terms = r768.transient_bytes - chunk - 3ULL * 8192 * 4;
        cases.push_back(json{{"name", "rank_independent_chunk_buffer"},
                             {"inputs", json{{"d_out", 8192}, {"ranks", json::array({16, 768})}}},
                             {"outputs", json{{"chunk_buffer_bytes", chunk},
                                              {"rank_dependent_r16", r16_rank_terms},
                                              {"rank_dependent_r768", r768_rank_terms}}},
                             {"pass", r16_rank_terms < r768_rank_terms}});
    }

    {
        bool decreasing = true;
        double prev = theoretical_reduction(4096, 4096, 16);
        for (index_t r = 32; r <= 2048; r *= 2) {
            const double cur = theoretical_reduction(4096, 4096, r);
            if (cur >= prev) decreasing = false;
            prev = cur;
        }
        cases.push_back(json{{"name", "ratio_decreasing_in_rank"},
                             {"inputs", json{{"d_out", 4096}, {"d_in", 4096}}},
                             {"outputs", json{{"strictly_decreasing", decreasing}}},
                             {"pass", decreasing}});
    }

    return finish_artifact("memory", cfg, std::move(cases), json::object(),
                           elapsed_ns(t0, Clock::now()));
}

// ----------------------------------------------------------- stability ----

json run_stability_suite(const SuiteConfig& cfg) {
    const auto t0 = Clock::now();
    std::vector<json> cases;

    SweepConfig sweep_cfg;
    sweep_cfg.seed = cfg.seed;
    sweep_cfg.dtype = (cfg.dtype.kind == DTypeKind::BF16E || cfg.dtype.kind == DTypeKind::FP16E)
                          ? cfg.dtype
                          : DTypeSpec::bf16e();
    const std::vector<double> grid = default_sweep_grid();
    const std::vector<SweepPoint> points = cancellation_sweep(grid, sweep_cfg);
    const SweepSummary summary = summarize_sweep(points);

    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        cases.push_back(json{{"name", "sweep_point_" + std::to_string(i)},
                             {"inputs", json{{"g", p.g}, {"dtype", sweep_cfg.dtype.name()},
                                             {"seed", sweep_cfg.seed}}},
                             {"outputs", json{{"g_stored", p.g_stored},
                                              {"stable_err", p.stable_err},
                                              {"naive_err", p.naive_err},
                                              {"fused_err", p.fused_err}}},
                             {"pass", p.stable_err <= p.naive_err && p.fused_err == p.stable_err}});
    }

    {
        const std::vector<double> g = sample_g(GaussianModel{1.0, 0.0015}, 1000000,
                                               derive_seed(cfg.seed, 9001));
        const std::vector<DTypeSpec> specs = {DTypeSpec::bf16e(), DTypeSpec::fp16e()};
        const std::vector<double> fractions = collapse_fractions(g, specs);
        const bool ok = fractions[0] >= 0.95 && fractions[1] >= 0.15 && fractions[1] <= 0.35;
        cases.push_back(json{{"name", "collapse_fractions_gaussian"},
                             {"inputs", json{{"model", "gaussian(1, 0.0015)"},
                                             {"n", 1000000},
                                             {"seed", derive_seed(cfg.seed, 9001)}}},
                             {"outputs", json{{"bf16_fraction", fractions[0]},
                                              {"fp16_fraction", fractions[1]}}},
                             {"pass", ok}});
    }

    const json extra{{"peak_stable_err", summary.peak_stable},
                     {"peak_naive_err", summary.peak_naive},
                     {"peak_ratio", summary.peak_ratio},
                     {"dominance", summary.dominance},
                     {"path_parity", summary.path_parity}};
    return finish_artifact("stability", cfg, std::move(cases), extra, elapsed_ns(t0, Clock::now()));
}

// ---------------------------------------------------------------- layer ----

DoraLinearState make_suite_layer(std::uint64_t seed, index_t rows, index_t d_in, index_t d_out,
                                 index_t r, bool with_bias, const DTypeSpec& wd) {
    (void)rows;
    RealMatrix w = gaussian_fixture(d_out, d_in, 0.0, 0.5, derive_seed(seed, 0), wd);
    AdapterPair adapter{gaussian_fixture(r, d_in, 0.0, 0.5, derive_seed(seed, 1), wd),
                        gaussian_fixture(d_out, r, 0.0, 0.5, derive_seed(seed, 2), wd),
                        2.0 / std::sqrt(static_cast<double>(r))};
    Magnitude mag{gaussian_vector(d_out, 1.5, 0.25, derive_seed(seed, 3)), wd};
    std::optional<std::vector<double>> bias;
    if (with_bias) bias = gaussian_vector(d_out, 0.0, 0.5, derive_seed(seed, 4));
    return make_layer_state(std::move(w), std::move(adapter), std::move(mag), std::move(bias), wd);
}

json run_layer_suite(const SuiteConfig& cfg) {
    const auto t0 = Clock::now();
    std::vector<json> cases;
    const DTypeSpec& wd = DTypeSpec::fp32();

    {
        // forward against the fp64 oracle, honoring the configured force flags
        const std::uint64_t seed = derive_seed(cfg.seed, 8000);
        DoraLinearState state = make_suite_layer(seed, 8, 24, 16, 4, true, wd);
        state.dispatch_cfg.force_fused = cfg.fused;
        state.dispatch_cfg.force_fused_backward = cfg.fused_backward;
        const RealMatrix x = gaussian_fixture(8, 24, 0.0, 1.0, derive_seed(seed, 5), wd);
        const LayerForwardResult fwd = layer_forward(state, x);
        const RealMatrix y_ref = oracle_forward(x, state.w, state.bias ? &*state.bias : nullptr,
                                                state.adapter, state.magnitude);
        double err = 0.0;
        for (index_t i = 0; i < x.rows(); ++i) {
            for (index_t j = 0; j < state.d_out(); ++j) {
                err = std::max(err, std::fabs(fwd.y(i, j) - y_ref(i, j)) /
                                        std::max(std::fabs(y_ref(i, j)), 1e-30));
            }
        }
        json c{{"name", "forward_vs_oracle"},
               {"inputs", json{{"rows", 8}, {"d_in", 24}, {"d_out", 16}, {"rank", 4}, {"seed", seed}}},
               {"outputs", json{{"max_rel_err", err}, {"tolerance", 1e-5}}},
               {"pass", err <= 1e-5}};
        c["timing"] = time_kernel([&] { layer_forward(state, x); }, cfg);
        cases.push_back(std::move(c));
    }

    {
        // adapter-at-init identity: B = 0, m = rownorm(W)
        const std::uint64_t seed = derive_seed(cfg.seed, 8001);
        DoraLinearState state = make_suite_layer(seed, 6, 20, 12, 3, true, wd);
        for (double& v : state.adapter.B.mutable_data()) v = 0.0;
        state.magnitude.values = factored_row_norm(state.w, state.adapter, state.chunk_plan);
        const RealMatrix x = gaussian_fixture(6, 20, 0.0, 1.0, derive_seed(seed, 5), wd);
        const LayerForwardResult fwd = layer_forward(state, x);

        const RealMatrix base = matmul_f32(x, transpose(state.w));
        bool identity = true;
        for (index_t i = 0; i < x.rows() && identity; ++i) {
            for (index_t j = 0; j < state.d_out(); ++j) {
                const float yb = static_cast<float>(base(i, j)) + 0.0f;
                const float with_bias = yb + static_cast<float>((*state.bias)[j]);
                if (fwd.y(i, j) != static_cast<double>(with_bias)) {
                    identity = false;
                    break;
                }
            }
        }
        cases.push_back(json{{"name", "init_identity"},
                             {"inputs", json{{"seed", seed}}},
                             {"outputs", json{{"y_equals_frozen_path", identity}}},
                             {"pass", identity}});
    }

    {
        // tier invariance, bitwise
        const std::uint64_t seed = derive_seed(cfg.seed, 8002);
        DoraLinearState state = make_suite_layer(seed, 16, 32, 24, 4, false, wd);
        const RealMatrix x = gaussian_fixture(16, 32, 0.0, 1.0, derive_seed(seed, 5), wd);
        state.dispatch_cfg.force_fused_backward = ForceMode::On;
        const LayerForwardResult t1 = layer_forward(state, x);
        state.dispatch_cfg.force_fused_backward = ForceMode::Off;
        const LayerForwardResult t3 = layer_forward(state, x);
        DoraLinearState infer = state;
        infer.dispatch_cfg.training = false;
        infer.dispatch_cfg.requires_grad = false;
        const LayerForwardResult t2 = layer_forward(infer, x);
        const bool ok = bitwise_equal(t1.y, t3.y) && bitwise_equal(t1.y, t2.y) &&
                        t1.saved.decision.tier == Tier::FusedBackward &&
                        t3.saved.decision.tier == Tier::Eager &&
                        t2.saved.decision.tier == Tier::FusedForward;
        cases.push_back(json{{"name", "tier_invariance"},
                             {"inputs", json{{"seed", seed}}},
                             {"outputs", json{{"bitwise_identical", ok}}},
                             {"pass", ok}});
    }

    {
        // bias neutrality, bitwise
        const std::uint64_t seed = derive_seed(cfg.seed, 8003);
        DoraLinearState with_bias = make_suite_layer(seed, 10, 18, 14, 2, true, wd);
        DoraLinearState no_bias = with_bias;
        no_bias.bias.reset();
        const RealMatrix x = gaussian_fixture(10, 18, 0.0, 1.0, derive_seed(seed, 5), wd);
        const RealMatrix yb = layer_forward(with_bias, x).y;
        const RealMatrix y0 = layer_forward(no_bias, x).y;
        bool ok = true;
        for (index_t i = 0; i < x.rows() && ok; ++i) {
            for (index_t j = 0; j < with_bias.d_out(); ++j) {
                const float expect = static_cast<float>(y0(i, j)) +
                                     static_cast<float>((*with_bias.bias)[j]);
                if (yb(i, j) != static_cast<double>(expect)) {
                    ok = false;
                    break;
                }
            }
        }
        cases.push_back(json{{"name", "bias_neutrality"},
                             {"inputs", json{{"seed", seed}}},
                             {"outputs", json{{"bias_is_pure_post_add", ok}}},
                             {"pass", ok}});
    }

    {
        // norm freshness: perturbing W must change the next forward's norm
        const std::uint64_t seed = derive_seed(cfg.seed, 8004);
        DoraLinearState state = make_suite_layer(seed, 4, 12, 10, 2, false, wd);
        const RealMatrix x = gaussian_fixture(4, 12, 0.0, 1.0, derive_seed(seed, 5), wd);
        const std::vector<double> norm_before = layer_forward(state, x).saved.w_norm;
        state.w.set(0, 0, state.w(0, 0) + 1.0);
        const std::vector<double> norm_after = layer_forward(state, x).saved.w_norm;
        const bool ok = norm_before != norm_after;
        cases.push_back(json{{"name", "norm_freshness"},
                             {"inputs", json{{"seed", seed}}},
                             {"outputs", json{{"norm_recomputed", ok}}},
                             {"pass", ok}});
    }

    {
        // gradients against fp64 central differences with the norm detached
        const std::uint64_t seed = derive_seed(cfg.seed, 8005);
        DoraLinearState state = make_suite_layer(seed, 3, 6, 8, 2, true, wd);
        const RealMatrix x = gaussian_fixture(3, 6, 0.0, 1.0, derive_seed(seed, 5), wd);
        const LayerForwardResult fwd = layer_forward(state, x);
        RealMatrix d_y(3, 8, wd);
        for (double& v : d_y.mutable_data()) v = 1.0;
        const LayerGrads grads = layer_backward(state, fwd.saved, d_y);

        const std::vector<double>& wn = fwd.saved.w_norm;
        auto loss = [&](const AdapterPair& ad, const Magnitude& m) {
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
                    const double delta = (g - 1.0) * base + g * (ad.s * lora);
                    acc += base + delta + (*state.bias)[o];
                }
            }
            return acc;
        };

        double worst = 0.0;
        AdapterPair ad = state.adapter;
        for (index_t l = 0; l < ad.rank(); ++l) {
            for (index_t k = 0; k < state.d_in(); ++k) {
                const double theta = ad.A(l, k);
                const double h = fd_step(theta);
                ad.A.set(l, k, theta + h);
                const double up = loss(ad, state.magnitude);
                const double up_theta = ad.A(l, k);
                ad.A.set(l, k, theta - h);
                const double dn = loss(ad, state.magnitude);
                const double fd = (up - dn) / (up_theta - ad.A(l, k));
                ad.A.set(l, k, theta);
                worst = std::max(worst, rel_err(grads.d_a(l, k), fd));
            }
        }
        for (index_t o = 0; o < state.d_out(); ++o) {
            for (index_t l = 0; l < ad.rank(); ++l) {
                const double theta = ad.B(o, l);
                const double h = fd_step(theta);
                ad.B.set(o, l, theta + h);
                const double up = loss(ad, state.magnitude);
                const double up_theta = ad.B(o, l);
                ad.B.set(o, l, theta - h);
                const double dn = loss(ad, state.magnitude);
                const double fd = (up - dn) / (up_theta - ad.B(o, l));
                ad.B.set(o, l, theta);
                worst = std::max(worst, rel_err(grads.d_b(o, l), fd));
            }
        }
        Magnitude m = state.magnitude;
        for (index_t o = 0; o < state.d_out(); ++o) {
            const double theta = m.values[o];
            const double h = fd_step(theta);
            m.values[o] = round_to_dtype(theta + h, wd);
            const double up = loss(state.adapter, m);
            const double up_theta = m.values[o];
            m.values[o] = round_to_dtype(theta - h, wd);
            const double dn = loss(state.adapter, m);
            const double fd = (up - dn) / (up_theta - m.values[o]);
            m.values[o] = theta;
            worst = std::max(worst, rel_err((*grads.d_mag)[o], fd));
        }

        cases.push_back(json{{"name", "gradcheck_detached_norm"},
                             {"inputs", json{{"rows", 3}, {"d_in", 6}, {"d_out", 8}, {"rank", 2},
                                             {"seed", seed}}},
                             {"outputs", json{{"max_rel_err_vs_fd", worst}, {"tolerance", 1e-3}}},
                             {"pass", worst <= 1e-3}});
    }

    return finish_artifact("layer", cfg, std::move(cases), json::object(),
                           elapsed_ns(t0, Clock::now()));
}

}  // namespace

const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names = {"norm",   "compose",   "backward", "dispatch",
                                                   "memory", "stability", "layer"};
    return names;
}

const std::vector<DispatchCase>& canonical_dispatch_contexts() {
    static const std::vector<DispatchCase> table = build_dispatch_contexts();
    return table;
}

json run_suite(const std::string& suite, const SuiteConfig& config) {
    if (suite == "norm") return run_norm_suite(config);
    if (suite == "compose") return run_compose_suite(config);
    if (suite == "backward") return run_backward_suite(config);
    if (suite == "dispatch") return run_dispatch_suite(config);
    if (suite == "memory") return run_memory_suite(config);
    if (suite == "stability") return run_stability_suite(config);
    if (suite == "layer") return run_layer_suite(config);
    throw std::invalid_argument("unknown suite: " + suite);
}

bool artifact_passed(const json& artifact) {
    for (const auto& c : artifact.at("cases")) {
        if (!c.value("pass", false)) return false;
    }
    return true;
}

json strip_timing(json artifact) {
    if (artifact.is_object()) {
        artifact.erase("timing");
        for (auto& [k, v] : artifact.items()) {
            (void)k;
            v = strip_timing(std::move(v));
        }
    } else if (artifact.is_array()) {
        for (auto& v : artifact) v = strip_timing(std::move(v));
    }
    return artifact;
}

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

const json& field_or_throw(const json& obj, const std::string& key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw std::runtime_error("plot data: missing field '" + key + "' in " + where);
    }
    return *it;
}

}  // namespace

std::string emit_plot_csv(const json& artifact, const std::string& target) {
    std::ostringstream csv;
    const json& cases = field_or_throw(artifact, "cases", "artifact");
    if (target == "stability_curve") {
        csv << "g,stable_err,naive_err\n";
        for (const auto& c : cases) {
            if (!c.contains("outputs") || !c["outputs"].contains("stable_err")) continue;
            const json& in = field_or_throw(c, "inputs", c.value("name", "case"));
            const json& out = c["outputs"];
            csv << fmt_double(field_or_throw(in, "g", "inputs").get<double>()) << ","
                << fmt_double(field_or_throw(out, "stable_err", "outputs").get<double>()) << ","
                << fmt_double(field_or_throw(out, "naive_err", "outputs").get<double>()) << "\n";
        }
    } else if (target == "norm_memory") {
        csv << "shape,rank,theory_ratio\n";
        for (const auto& c : cases) {
            if (!c.contains("outputs") || !c["outputs"].contains("theory_ratio")) continue;
            const json& in = field_or_throw(c, "inputs", c.value("name", "case"));
            csv << field_or_throw(in, "d_out", "inputs").get<std::uint64_t>() << "x"
                << field_or_throw(in, "d_in", "inputs").get<std::uint64_t>() << ","
                << field_or_throw(in, "rank", "inputs").get<std::uint64_t>() << ","
                << fmt_double(c["outputs"]["theory_ratio"].get<double>()) << "\n";
        }
    } else if (target == "traffic") {
        csv << "rows,d_out,fused_passes,eager_passes,bytes_ratio\n";
        for (const auto& c : cases) {
            if (!c.contains("outputs") || !c["outputs"].contains("bytes_ratio")) continue;
            const json& in = field_or_throw(c, "inputs", c.value("name", "case"));
            const json& out = c["outputs"];
            csv << field_or_throw(in, "rows", "inputs").get<std::uint64_t>() << ","
                << field_or_throw(in, "d_out", "inputs").get<std::uint64_t>() << ","
                << field_or_throw(out, "fused_pass_count", "outputs").get<int>() << ","
                << field_or_throw(out, "eager_pass_count", "outputs").get<int>() << ","
                << fmt_double(out["bytes_ratio"].get<double>()) << "\n";
        }
    } else {
        throw std::runtime_error("plot data: unknown target '" + target + "'");
    }
    const std::string body = csv.str();
    if (body.find('\n') == body.rfind('\n')) {
        throw std::runtime_error("plot data: artifact has no rows for target '" + target + "'");
    }
    return body;
}

}  // namespace dorafactor::bench
