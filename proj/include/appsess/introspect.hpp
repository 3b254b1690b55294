#pragma once

#include <string>
#include <vector>

#include "appsess/evaluation.hpp"
#include "appsess/types.hpp"

namespace appsess {

// Full-model pipeline fit to all subjects at once (the whole-cohort
// analysis): (K, C) picked by inner LOO over everyone, then embedding,
// clustering, rescaler, and classifier fit on the complete cohort.
struct FittedPipeline {
    int K = 0;
    double C = 0.0;
    EmbeddingModel embedding;
    SessionTypeModel type_model;
    Rescaler rescaler;
    FitResult fit;
    std::vector<SubjectFeatures> rescaled_features; // one per subject, cohort order
};

FittedPipeline fit_full_pipeline(const Cohort& cohort, const HyperGrid& grid,
                                 const PipelineConfig& config);

struct TypeContribution {
    int session_type_id = 0;
    double weight = 0.0;
    double feature_sum = 0.0;   // rescaled feature summed over subjects
    double contribution = 0.0;  // weight * feature_sum
    std::string nearest_app;
    std::vector<std::string> most_common_session; // modal app multiset, sorted
    std::vector<std::string> delta_apps;          // top-M apps the deltas refer to
    std::vector<double> app_distribution_delta;   // parallel to delta_apps
    std::int64_t session_count = 0;               // sessions assigned to the type
};

struct TypeContributionReport {
    std::vector<TypeContribution> positive; // toward symptomatic, largest first
    std::vector<TypeContribution> negative; // most negative first
};

// The top_n session types with the largest positive and negative
// contribution = weight * sum-of-feature. Zero-contribution types appear in
// neither list. Each entry carries the app nearest its centroid, the modal
// session multiset, and the app-distribution delta against the overall
// distribution for the top_m most common apps.
TypeContributionReport rank_type_contributions(const Cohort& cohort,
                                               const FittedPipeline& pipeline, int top_n,
                                               int top_m = 15);

// The top_m most common apps over all session opens, most common first;
// count ties break lexicographically.
std::vector<std::string> top_common_apps(const std::vector<std::vector<std::string>>& sessions,
                                         int top_m);

// p - q for the given apps, where p is the app distribution over the type's
// session opens and q the distribution over all session opens.
std::vector<double> app_distribution_delta(
    const std::vector<std::vector<std::string>>& type_sessions,
    const std::vector<std::vector<std::string>>& all_sessions,
    const std::vector<std::string>& apps);

struct SessionContribution {
    std::string subject_id;
    std::int64_t start_ts = 0;
    std::int64_t end_ts = 0;
    std::vector<std::string> apps;
    int session_type_id = 0;
    double contribution = 0.0;
};

struct TopSessionsResult {
    std::string subject_id;
    double prob = 0.0; // this fold model's prediction for the subject
    std::vector<SessionContribution> sessions;
    bool fewer_than_requested = false;
};

// Under the LOO fold model that held this subject out: the n sessions with
// the largest contribution toward the subject's own side of the decision
// (most positive when prob >= 0.5, else most negative), ties by earlier
// start. A subject with fewer than n sessions returns them all, flagged.
TopSessionsResult per_subject_top_sessions(const Subject& subject, const FoldModel& fold,
                                           int n = 3, const ReprOptions& repr = {});

// All of a subject's session contributions under a fold model (the terms of
// the linear decomposition; their sum equals w.x for the subject).
std::vector<SessionContribution> session_contributions(const Subject& subject,
                                                       const FoldModel& fold,
                                                       const ReprOptions& repr = {});

void write_type_contributions_json(const TypeContributionReport& report, const std::string& path);
void write_type_contributions_csv(const TypeContributionReport& report, const std::string& path);
void write_delta_csv(const TypeContributionReport& report, const std::string& path);
void write_top_sessions_json(const std::vector<TopSessionsResult>& results,
                             const std::string& path);
void write_top_sessions_csv(const std::vector<TopSessionsResult>& results,
                            const std::string& path);

} // namespace appsess
