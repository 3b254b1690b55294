#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "appsess/features.hpp"
#include "appsess/logistic.hpp"
#include "appsess/sessionize.hpp"
#include "appsess/types.hpp"

namespace appsess {

struct HyperGrid {
    std::vector<int> Ks{2, 5, 10, 20, 40};
    std::vector<double> Cs{0.01,
                           0.03162277660168379,
                           0.1,
                           0.31622776601683794,
                           1.0,
                           3.1622776601683795,
                           10.0};
};

enum class FitScope { per_fold, global };

const char* fit_scope_name(FitScope s);
FitScope fit_scope_from_name(const std::string& name);

// Everything the pipeline needs besides the grid. Seeds for embedding,
// permutation, and k-means are derived from `seed` and the training-set
// identity, never taken from the nested configs.
struct PipelineConfig {
    EmbeddingConfig embedding;
    KMeansConfig kmeans; // k and seed are overridden per grid cell / fold
    Rescaler::Mode rescale_mode = Rescaler::Mode::per_column;
    ReprOptions repr;
    SentenceScope sentence_scope = SentenceScope::user;
    std::uint64_t seed = 42;
    unsigned threads = 0; // 0 = hardware concurrency
};

// Mann-Whitney AUROC: the fraction of (positive, negative) pairs where the
// positive outscores the negative, ties counting 0.5. Computed from average
// ranks; requires both classes.
double auroc(std::span<const double> scores, std::span<const int> labels);

// Stepwise ROC curve points (FPR, TPR), threshold descending.
std::vector<std::pair<double, double>> roc_points(std::span<const double> scores,
                                                  std::span<const int> labels);

// Unsupervised + scaling artifacts fit on one training subject set.
struct ArtifactSet {
    Variant variant = Variant::full;
    EmbeddingModel embedding;                  // full/B1/B2 (B2: permuted)
    Vocab vocab;                               // B3/B5
    CategorySpace categories;                  // B4/B6
    std::vector<int> ks;                       // grid Ks this set was built for
    std::vector<SessionTypeModel> models;      // parallel to ks (empty for B3..B6)

    const SessionTypeModel* model_for(int K) const;
    FeatureArtifacts for_K(int K, const Cohort& cohort, const ReprOptions& repr) const;
};

// Fits embedding / clustering / vocab artifacts on the given training
// subjects. Deterministic: all seeds derive from (config.seed, the training
// subject-id sequence), so the result depends only on the training data.
ArtifactSet build_artifacts(const Cohort& cohort, const std::vector<int>& train_indices,
                            Variant variant, const std::vector<int>& Ks,
                            const PipelineConfig& config);

struct PerSubjectResult {
    std::string subject_id;
    Label label = Label::healthy;
    double prob = 0.0;
    int chosen_K = 0; // 0 when the variant does not cluster
    double chosen_C = 0.0;
};

struct RunDiagnostics {
    SessionizeStats sessionize;
    FeatureDiag features;
};

struct EvaluationReport {
    Variant variant = Variant::full;
    FitScope scope = FitScope::per_fold;
    std::uint64_t seed = 0;
    double auroc = 0.0;
    std::vector<PerSubjectResult> per_subject;
    RunDiagnostics diagnostics;
    double runtime_seconds = 0.0; // wall clock; kept out of serialized reports
};

// One outer fold's trained model, retained for introspection.
struct FoldModel {
    std::string held_out_id;
    int K = 0;
    double C = 0.0;
    EmbeddingModel embedding;
    SessionTypeModel type_model;
    Rescaler rescaler;
    FitResult fit;
};

// Inner LOO over the training subjects: evaluates every grid cell and
// returns the (K, C) with the best inner AUROC, ties toward smaller K then
// smaller C. Inner folds whose training set is single-class predict the
// class prior; if every fold is degenerate this is an error. When
// global_artifacts is given (fit_scope = global) the artifacts are reused
// instead of refit per inner fold.
std::pair<int, double> inner_select(const Cohort& cohort, const std::vector<int>& train_indices,
                                    Variant variant, const HyperGrid& grid, FitScope scope,
                                    const PipelineConfig& config,
                                    const ArtifactSet* global_artifacts = nullptr);

// N leave-one-out splits: per held-out subject, fit artifacts on the rest
// (per fit_scope), pick (K, C) by inner LOO, refit the classifier, and
// record the held-out predicted probability. Pooled AUROC over all N.
EvaluationReport outer_loo(const Cohort& cohort, Variant variant, const HyperGrid& grid,
                           FitScope scope, const PipelineConfig& config,
                           std::vector<FoldModel>* fold_models = nullptr);

// All seven variants with shared seeds, in spec order.
std::vector<EvaluationReport> ablation_table(const Cohort& cohort, const HyperGrid& grid,
                                             FitScope scope, const PipelineConfig& config);

void write_report_json(const EvaluationReport& report, const std::string& path);
void write_roc_csv(const EvaluationReport& report, const std::string& path);
void write_ablation_csv(const std::vector<EvaluationReport>& reports, const std::string& path);
void write_ablation_json(const std::vector<EvaluationReport>& reports, const std::string& path);

} // namespace appsess
