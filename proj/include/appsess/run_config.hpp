#pragma once

#include <string>

#include <json.hpp>

#include "appsess/evaluation.hpp"
#include "appsess/synthgen.hpp"

namespace appsess {

inline constexpr const char* kVersion = "0.1.0";

// One config file drives every subcommand. Unknown keys anywhere are
// rejected (fail closed); absent keys take the documented defaults.
struct RunConfig {
    struct Paths {
        std::string events;
        std::string labels;
        std::string category_map; // optional
        std::string out = "out";
    } paths;

    Variant variant = Variant::full;
    HyperGrid grid;
    PipelineConfig pipeline;
    FitScope fit_scope = FitScope::per_fold;

    struct Introspect {
        int top_n = 4;
        int top_m = 15;
        int top_sessions = 3;
    } introspect;

    GeneratorConfig synth;

    // Fully resolved config (defaults materialized); hashed into the manifest.
    nlohmann::ordered_json resolved;
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

// Recomputes RunConfig::resolved; call after mutating fields (CLI overrides).
void refresh_resolved(RunConfig& config);

// manifest.json: command, resolved config, config hash, seed, version.
void write_manifest(const RunConfig& config, const std::string& command,
                    const std::string& out_dir);

} // namespace appsess
