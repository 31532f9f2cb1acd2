#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "../src/bench/suites.hpp"

namespace {

using dorafactor::bench::SuiteConfig;

int write_file(const std::string& path, const std::string& body) {
    if (path.empty() || path == "-") {
        std::cout << body;
        return 0;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        std::cerr << "error: cannot open output path: " << path << "\n";
        return 2;
    }
    out << body;
    if (!out) {
        std::cerr << "error: write failed: " << path << "\n";
        return 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dorafactor: correctness suites, sweeps and table emission for the "
                 "factored-norm DoRA engine"};

    std::string suite;
    std::string shapes = "core";
    std::uint64_t rank = 8;
    std::string dtype = "fp32";
    int repeats = 20;
    int warmup = 3;
    std::uint64_t seed = 42;
    std::string json_out;
    std::string fused = "auto";
    std::string fused_backward = "auto";
    std::uint64_t norm_chunk_mb = 256;
    int parallel = 1;
    std::string plot_target;
    std::string artifact_path;
    std::string csv_out;

    app.add_option("--suite", suite, "Suite to run: norm|compose|backward|dispatch|memory|stability|layer")
        ->envname("DORAFACTOR_SUITE");
    app.add_option("--shapes", shapes, "Shape set: core|extended|table6")
        ->check(CLI::IsMember({"core", "extended", "table6"}))
        ->envname("DORAFACTOR_SHAPES");
    app.add_option("--rank", rank, "Adapter rank for rank-parameterized cases")
        ->envname("DORAFACTOR_RANK");
    app.add_option("--dtype", dtype, "Working dtype: fp32|bf16|fp16")
        ->check(CLI::IsMember({"fp32", "bf16", "fp16"}))
        ->envname("DORAFACTOR_DTYPE");
    app.add_option("--repeats", repeats, "Timed repetitions per case (median reported)")
        ->envname("DORAFACTOR_REPEATS");
    app.add_option("--warmup", warmup, "Discarded warmup runs before timing")
        ->envname("DORAFACTOR_WARMUP");
    app.add_option("--seed", seed, "Base seed; every case derives its own stream")
        ->envname("DORAFACTOR_SEED");
    app.add_option("--json-out", json_out, "Artifact path ('-' for stdout)")
        ->envname("DORAFACTOR_JSON_OUT");
    app.add_option("--fused", fused, "Compose kernel toggle: on|off|auto")
        ->check(CLI::IsMember({"on", "off", "auto"}))
        ->envname("DORAFACTOR_FUSED");
    app.add_option("--fused-backward", fused_backward, "Fused backward toggle: on|off|auto")
        ->check(CLI::IsMember({"on", "off", "auto"}))
        ->envname("DORAFACTOR_FUSED_BACKWARD");
    app.add_option("--norm-chunk-mb", norm_chunk_mb, "Fan-in chunk budget in MiB")
        ->envname("DORAFACTOR_NORM_CHUNK_MB");
    app.add_option("--parallel", parallel, "Case-level worker threads (cases are independently seeded)")
        ->envname("DORAFACTOR_PARALLEL");
    app.add_option("--emit-plot", plot_target, "Emit CSV from an artifact: stability_curve|norm_memory|traffic")
        ->check(CLI::IsMember({"stability_curve", "norm_memory", "traffic"}));
    app.add_option("--artifact", artifact_path, "Artifact JSON consumed by --emit-plot");
    app.add_option("--csv-out", csv_out, "CSV output path ('-' for stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (!plot_target.empty()) {
            if (artifact_path.empty()) {
                std::cerr << "error: --emit-plot requires --artifact\n";
                return 2;
            }
            std::ifstream in(artifact_path);
            if (!in) {
                std::cerr << "error: cannot open artifact: " << artifact_path << "\n";
                return 2;
            }
            dorafactor::bench::json artifact;
            in >> artifact;
            const std::string csv = dorafactor::bench::emit_plot_csv(artifact, plot_target);
            return write_file(csv_out, csv);
        }

        if (suite.empty()) {
            std::cerr << "error: nothing to do; pass --suite or --emit-plot (see --help)\n";
            return 2;
        }

        SuiteConfig cfg;
        cfg.shapes = shapes;
        cfg.rank = rank;
        cfg.dtype = dorafactor::DTypeSpec::from_name(dtype);
        cfg.repeats = repeats;
        cfg.warmup = warmup;
        cfg.seed = seed;
        cfg.fused = dorafactor::force_mode_from_name(fused);
        cfg.fused_backward = dorafactor::force_mode_from_name(fused_backward);
        cfg.norm_chunk_mb = norm_chunk_mb;
        cfg.parallel = parallel;

        const dorafactor::bench::json artifact = dorafactor::bench::run_suite(suite, cfg);
        const bool passed = dorafactor::bench::artifact_passed(artifact);

        const int write_rc = write_file(json_out, artifact.dump(2) + "\n");
        if (write_rc != 0) return write_rc;

        const auto& summary = artifact.at("summary");
        std::fprintf(stderr, "suite %s: %llu/%llu cases passed\n", suite.c_str(),
                     static_cast<unsigned long long>(summary.at("passed").get<std::uint64_t>()),
                     static_cast<unsigned long long>(summary.at("total").get<std::uint64_t>()));
        return passed ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
