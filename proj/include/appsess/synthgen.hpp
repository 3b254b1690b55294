#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "appsess/types.hpp"

namespace appsess {

// A session template: a fixed app multiset drawn with the given weight.
struct TemplateSpec {
    std::vector<std::string> apps;
    double weight = 1.0;
};

struct GeneratorConfig {
    int n_healthy = 40;
    int n_symptomatic = 20;
    double days = 84.0;
    double sessions_per_day = 0.25; // Poisson rate

    // Global app universe with sampling weights; defaults to a 40-app
    // Zipf(1.1) inventory when empty.
    std::vector<std::pair<std::string, double>> app_inventory;

    // Class-specific signal sessions. With probability cooccurrence_signal a
    // session is drawn from the subject's class templates, otherwise from
    // the shared background process (1-3 apps iid from the inventory).
    std::vector<TemplateSpec> healthy_templates;
    std::vector<TemplateSpec> symptomatic_templates;
    double cooccurrence_signal = 0.0; // 0 = classes identical
    bool marginal_matched = false;    // verify per-app template marginals match

    std::uint64_t seed = 1;
};

struct GeneratedCohort {
    Cohort cohort;
    nlohmann::ordered_json ground_truth; // per-subject template draw counts
};

// Deterministic given (config, seed): per subject, Poisson session count,
// disjoint unlock/lock windows placed on an even grid over the study span,
// template- or background-drawn content, open/close events strictly inside
// each window. Infeasible packing (too many sessions for the span) is an
// error suggesting a lower rate.
GeneratedCohort generate(const GeneratorConfig& config);

// events.jsonl, labels.csv, categories.csv, ground_truth.json under dir.
void write_cohort_files(const GeneratedCohort& generated, const std::string& dir);

// Frozen configs used by the acceptance experiments:
//   E1_strong_cooccurrence - 40+20 subjects, 84 days; class signal lives
//     only in which apps share a session (per-app marginals matched).
//   E2_null                - identical classes, no signal anywhere.
//   E3_marginal_only       - signal only in per-app open frequencies.
GeneratorConfig scenario(const std::string& name);

// The default 40-app inventory (named apps first, then app11..app40).
std::vector<std::pair<std::string, double>> default_app_inventory();

} // namespace appsess
