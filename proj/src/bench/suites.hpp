#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "dorafactor/dispatch.hpp"
#include "dorafactor/matrix.hpp"

namespace dorafactor::bench {

using json = nlohmann::ordered_json;

struct SuiteConfig {
    std::string shapes = "core";  // core | extended | table6
    index_t rank = 8;
    DTypeSpec dtype = DTypeSpec::fp32();
    int repeats = 20;
    int warmup = 3;
    std::uint64_t seed = 42;
    ForceMode fused = ForceMode::Auto;
    ForceMode fused_backward = ForceMode::Auto;
    std::uint64_t norm_chunk_mb = 256;
    int parallel = 1;
};

const std::vector<std::string>& suite_names();

// Runs one named suite and returns the self-contained artifact
// (schema 1). Re-running with the embedded config reproduces every
// non-timing field byte for byte. Throws on unknown suite names.
json run_suite(const std::string& suite, const SuiteConfig& config);

// True iff every case-level assertion in the artifact passed.
bool artifact_passed(const json& artifact);

// Copy of the artifact with all "timing" objects removed, at any depth.
// Determinism comparisons happen on this view.
json strip_timing(json artifact);

// Flat CSV for plotting. Targets: stability_curve, norm_memory, traffic.
// Missing fields raise std::runtime_error naming the field.
std::string emit_plot_csv(const json& artifact, const std::string& target);

// The 24 canonical dispatch contexts with their expected tiers.
struct DispatchCase {
    std::string name;
    DispatchContext ctx;
    Tier expected;
};
const std::vector<DispatchCase>& canonical_dispatch_contexts();

}  // namespace dorafactor::bench
