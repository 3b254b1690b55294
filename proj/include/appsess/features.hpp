#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "appsess/kmeans.hpp"
#include "appsess/session_repr.hpp"
#include "appsess/types.hpp"

namespace appsess {

// full: per-day counts of learned session types.
// B1:   per-day counts of event-embedding clusters (no sessions).
// B2:   full with the app->embedding assignment permuted upstream.
// B3/B4: per-day sums of one-hot session vectors (app identity / category).
// B5/B6: per-day app / category open counts (no sessions).
enum class Variant { full, B1, B2, B3, B4, B5, B6 };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);
bool variant_uses_clustering(Variant v); // full, B1, B2
bool variant_uses_embedding(Variant v);  // full, B1, B2
bool variant_uses_categories(Variant v); // B4, B6

struct SubjectFeatures {
    std::string subject_id;
    Label label = Label::healthy;
    std::vector<double> values;
};

// Everything featurize needs, borrowed from the caller. Which members must
// be set depends on the variant.
struct FeatureArtifacts {
    Variant variant = Variant::full;
    const EmbeddingModel* embedding = nullptr;      // full/B1/B2 (B2: permuted)
    const SessionTypeModel* type_model = nullptr;   // full/B1/B2
    const Vocab* vocab = nullptr;                   // B3/B5
    const CategorySpace* categories = nullptr;      // B4/B6
    const std::map<std::string, std::string>* category_map = nullptr; // B4/B6
    ReprOptions repr;
};

struct FeatureDiag {
    std::int64_t dropped_sessions = 0; // sessions with no in-vocab apps
    std::int64_t skipped_apps = 0;     // out-of-vocab opens excluded

    FeatureDiag& operator+=(const FeatureDiag& o) {
        dropped_sessions += o.dropped_sessions;
        skipped_apps += o.skipped_apps;
        return *this;
    }
};

std::size_t feature_dim(const FeatureArtifacts& artifacts);

// Per-subject feature vector before rescaling; always normalized by
// days_observed.
SubjectFeatures featurize(const Subject& subject, const FeatureArtifacts& artifacts,
                          FeatureDiag* diag = nullptr);

struct Rescaler {
    enum class Mode { per_column, global_scalar };
    Mode mode = Mode::per_column;
    std::vector<double> factors; // one per column, or a single entry for global_scalar
};

// per_column: factor_j = training mean of feature j (zero-mean columns keep
// factor 1), so training columns average exactly 1 after applying.
// global_scalar: one factor, the grand mean of all entries.
Rescaler rescaler_fit(const std::vector<SubjectFeatures>& train_features, Rescaler::Mode mode);
SubjectFeatures rescaler_apply(const SubjectFeatures& features, const Rescaler& rescaler);

// CSV dump "subject,label,f0..f{d-1}" for inspection.
void write_features_csv(const std::vector<SubjectFeatures>& features, const std::string& path);

} // namespace appsess
