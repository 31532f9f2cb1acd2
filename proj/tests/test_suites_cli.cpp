#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "bench/suites.hpp"

using namespace dorafactor;
using dorafactor::bench::json;

namespace {

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("dorafactor_test_" + name);
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(DORAFACTOR_CLI_PATH) + " " + args;
    const int status = std::system(cmd.c_str());
#ifdef _WIN32
    return status;
#else
    return WEXITSTATUS(status);
#endif
}

json load_json(const std::filesystem::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    json j;
    in >> j;
    return j;
}

}  // namespace

TEST_CASE("suite registry and schema") {
    CHECK(bench::suite_names().size() == 7);
    CHECK_THROWS(bench::run_suite("launch_overhead", bench::SuiteConfig{}));

    bench::SuiteConfig cfg;
    cfg.repeats = 2;
    cfg.warmup = 0;
    const json artifact = bench::run_suite("dispatch", cfg);
    CHECK(artifact.at("schema") == 1);
    CHECK(artifact.at("suite") == "dispatch");
    CHECK(artifact.at("config").at("seed") == 42);
    CHECK(artifact.at("cases").size() == 25);  // 24 contexts + fleet statistic
    CHECK(artifact.at("summary").at("passed") == artifact.at("summary").at("total"));
    CHECK(bench::artifact_passed(artifact));
    CHECK(artifact.contains("timing"));
}

TEST_CASE("memory and backward suites pass") {
    bench::SuiteConfig cfg;
    cfg.repeats = 1;
    cfg.warmup = 0;
    CHECK(bench::artifact_passed(bench::run_suite("memory", cfg)));
    CHECK(bench::artifact_passed(bench::run_suite("backward", cfg)));
}

TEST_CASE("artifacts regenerate identically once timing is stripped") {
    bench::SuiteConfig cfg;
    cfg.repeats = 1;
    cfg.warmup = 0;
    cfg.seed = 1234;
    for (const std::string suite : {"dispatch", "memory", "compose"}) {
        const std::string a = bench::strip_timing(bench::run_suite(suite, cfg)).dump(2);
        const std::string b = bench::strip_timing(bench::run_suite(suite, cfg)).dump(2);
        CHECK(a == b);
    }
}

TEST_CASE("parallel case execution does not change the artifact") {
    bench::SuiteConfig cfg;
    cfg.repeats = 1;
    cfg.warmup = 0;
    const std::string serial = bench::strip_timing(bench::run_suite("compose", cfg)).dump();
    cfg.parallel = 4;
    const std::string parallel = bench::strip_timing(bench::run_suite("compose", cfg)).dump();
    CHECK(serial == parallel);
}

TEST_CASE("plot csv emission") {
    json artifact{{"schema", 1},
                  {"suite", "stability"},
                  {"cases", json::array({json{{"name", "pt"},
                                              {"inputs", json{{"g", 0.999}}},
                                              {"outputs", json{{"stable_err", 0.001},
                                                               {"naive_err", 0.004},
                                                               {"fused_err", 0.001}}}}})}};
    const std::string csv = bench::emit_plot_csv(artifact, "stability_curve");
    CHECK(csv.rfind("g,stable_err,naive_err\n", 0) == 0);
    CHECK(csv.find("0.999") != std::string::npos);

    SUBCASE("missing fields are named") {
        artifact["cases"][0]["inputs"].erase("g");
        try {
            bench::emit_plot_csv(artifact, "stability_curve");
            FAIL("expected an error for the missing field");
        } catch (const std::exception& e) {
            CHECK(std::string(e.what()).find("'g'") != std::string::npos);
        }
    }
    SUBCASE("unknown target") {
        CHECK_THROWS(bench::emit_plot_csv(artifact, "latency_curve"));
    }
    SUBCASE("artifact without matching rows") {
        json empty{{"schema", 1}, {"cases", json::array()}};
        CHECK_THROWS(bench::emit_plot_csv(empty, "stability_curve"));
    }
}

TEST_CASE("cli runs a suite end to end") {
    const auto out = temp_path("memory.json");
    std::filesystem::remove(out);
    const int rc = run_cli("--suite memory --repeats 1 --warmup 0 --json-out " + out.string() +
                           " 2> /dev/null");
    CHECK(rc == 0);
    const json artifact = load_json(out);
    CHECK(artifact.at("suite") == "memory");
    CHECK(bench::artifact_passed(artifact));

    SUBCASE("emit-plot consumes the artifact") {
        const auto csv_path = temp_path("memory.csv");
        std::filesystem::remove(csv_path);
        const int prc = run_cli("--emit-plot norm_memory --artifact " + out.string() +
                                " --csv-out " + csv_path.string() + " 2> /dev/null");
        CHECK(prc == 0);
        std::ifstream csv(csv_path);
        std::string header;
        std::getline(csv, header);
        CHECK(header == "shape,rank,theory_ratio");
        std::filesystem::remove(csv_path);
    }
    std::filesystem::remove(out);
}

TEST_CASE("cli regenerates byte-identical artifacts from the embedded seed") {
    const auto out1 = temp_path("det1.json");
    const auto out2 = temp_path("det2.json");
    const std::string args = "--suite dispatch --seed 99 --repeats 1 --warmup 0 2> /dev/null";
    REQUIRE(run_cli(args + " --json-out " + out1.string()) == 0);
    REQUIRE(run_cli(args + " --json-out " + out2.string()) == 0);
    const std::string a = bench::strip_timing(load_json(out1)).dump(2);
    const std::string b = bench::strip_timing(load_json(out2)).dump(2);
    CHECK(a == b);
    std::filesystem::remove(out1);
    std::filesystem::remove(out2);
}

TEST_CASE("cli error paths") {
    CHECK(run_cli("--suite warp_speed 2> /dev/null") != 0);
    CHECK(run_cli("2> /dev/null") != 0);  // nothing to do
    CHECK(run_cli("--suite memory --repeats 1 --warmup 0 --json-out /nonexistent-dir/x.json"
                  " 2> /dev/null") != 0);
    CHECK(run_cli("--emit-plot stability_curve 2> /dev/null") != 0);  // missing --artifact
}

TEST_CASE("env vars mirror flags and flags win") {
    const auto out = temp_path("env.json");
    std::filesystem::remove(out);
    const std::string tail = " --suite dispatch --repeats 1 --warmup 0 --json-out " + out.string() +
                             " 2> /dev/null";
    auto run_raw = [](const std::string& cmd) {
        const int status = std::system(cmd.c_str());
        return WEXITSTATUS(status);
    };
    REQUIRE(run_raw("DORAFACTOR_SEED=7 " + std::string(DORAFACTOR_CLI_PATH) + tail) == 0);
    CHECK(load_json(out).at("config").at("seed") == 7);

    REQUIRE(run_raw("DORAFACTOR_SEED=7 " + std::string(DORAFACTOR_CLI_PATH) + " --seed 9" + tail) ==
            0);
    CHECK(load_json(out).at("config").at("seed") == 9);
    std::filesystem::remove(out);
}
