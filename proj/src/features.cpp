#include "appsess/features.hpp"

#include <cmath>
#include <fstream>

#include "appsess/error.hpp"
#include "appsess/ingest.hpp"
#include "appsess/sessionize.hpp"

namespace appsess {

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::full: return "full";
        case Variant::B1: return "B1";
        case Variant::B2: return "B2";
        case Variant::B3: return "B3";
        case Variant::B4: return "B4";
        case Variant::B5: return "B5";
        case Variant::B6: return "B6";
    }
    return "?";
}

Variant variant_from_name(const std::string& name) {
    for (Variant v : {Variant::full, Variant::B1, Variant::B2, Variant::B3, Variant::B4,
                      Variant::B5, Variant::B6})
        if (name == variant_name(v)) return v;
    throw ValidationError("unknown variant '" + name + "'");
}

bool variant_uses_clustering(Variant v) {
    return v == Variant::full || v == Variant::B1 || v == Variant::B2;
}
bool variant_uses_embedding(Variant v) { return variant_uses_clustering(v); }
bool variant_uses_categories(Variant v) { return v == Variant::B4 || v == Variant::B6; }

namespace {

void require(bool ok, const char* what, Variant v) {
    if (!ok)
        throw ValidationError(std::string("featurize(") + variant_name(v) +
                              "): missing artifact: " + what);
}

} // namespace

std::size_t feature_dim(const FeatureArtifacts& a) {
    switch (a.variant) {
        case Variant::full:
        case Variant::B1:
        case Variant::B2:
            require(a.type_model != nullptr, "session type model", a.variant);
            return static_cast<std::size_t>(a.type_model->k);
        case Variant::B3:
        case Variant::B5:
            require(a.vocab != nullptr, "vocab", a.variant);
            return a.vocab->size();
        case Variant::B4:
        case Variant::B6:
            require(a.categories != nullptr, "category space", a.variant);
            return a.categories->size();
    }
    return 0;
}

SubjectFeatures featurize(const Subject& subject, const FeatureArtifacts& a, FeatureDiag* diag) {
    const double days = derive_days_observed(subject);
    SubjectFeatures out;
    out.subject_id = subject.subject_id;
    out.label = subject.label;
    out.values.assign(feature_dim(a), 0.0);
    FeatureDiag local;

    switch (a.variant) {
        case Variant::full:
        case Variant::B2: {
            require(a.embedding != nullptr, "embedding", a.variant);
            require(a.type_model != nullptr, "session type model", a.variant);
            for (const auto& session : sessionize(subject)) {
                int skipped = 0;
                auto vec = session_vector_mean(session, *a.embedding, &skipped, a.repr);
                local.skipped_apps += skipped;
                if (!vec) {
                    ++local.dropped_sessions;
                    continue;
                }
                out.values[assign_type(*a.type_model, *vec)] += 1.0;
            }
            break;
        }
        case Variant::B1: {
            require(a.embedding != nullptr, "embedding", a.variant);
            require(a.type_model != nullptr, "event cluster model", a.variant);
            for (const auto& app : corpus_of(subject)) {
                const float* v = a.embedding->lookup(app);
                if (!v) {
                    ++local.skipped_apps;
                    continue;
                }
                out.values[assign_type(*a.type_model,
                                       std::span<const float>(v, a.embedding->config.dim))] += 1.0;
            }
            break;
        }
        case Variant::B3: {
            require(a.vocab != nullptr, "vocab", a.variant);
            for (const auto& session : sessionize(subject)) {
                int skipped = 0;
                auto vec = session_vector_onehot(session, *a.vocab, &skipped, a.repr);
                local.skipped_apps += skipped;
                if (!vec) {
                    ++local.dropped_sessions;
                    continue;
                }
                for (std::size_t j = 0; j < vec->size(); ++j) out.values[j] += (*vec)[j];
            }
            break;
        }
        case Variant::B4: {
            require(a.categories != nullptr, "category space", a.variant);
            require(a.category_map != nullptr, "category map", a.variant);
            for (const auto& session : sessionize(subject)) {
                auto vec = session_vector_onehot_category(session, *a.categories,
                                                          *a.category_map, a.repr);
                for (std::size_t j = 0; j < vec.size(); ++j) out.values[j] += vec[j];
            }
            break;
        }
        case Variant::B5: {
            require(a.vocab != nullptr, "vocab", a.variant);
            for (const auto& app : corpus_of(subject)) {
                const int i = a.vocab->find(app);
                if (i < 0) {
                    ++local.skipped_apps;
                    continue;
                }
                out.values[i] += 1.0;
            }
            break;
        }
        case Variant::B6: {
            require(a.categories != nullptr, "category space", a.variant);
            require(a.category_map != nullptr, "category map", a.variant);
            for (const auto& app : corpus_of(subject))
                out.values[a.categories->category_of(*a.category_map, app)] += 1.0;
            break;
        }
    }

    for (auto& x : out.values) x /= days;
    if (diag) *diag += local;
    return out;
}

Rescaler rescaler_fit(const std::vector<SubjectFeatures>& train_features, Rescaler::Mode mode) {
    if (train_features.empty()) throw ValidationError("rescaler_fit: empty training set");
    const std::size_t d = train_features[0].values.size();
    for (const auto& f : train_features)
        if (f.values.size() != d) throw ValidationError("rescaler_fit: inconsistent dimensions");

    Rescaler r;
    r.mode = mode;
    if (mode == Rescaler::Mode::per_column) {
        r.factors.assign(d, 0.0);
        for (const auto& f : train_features)
            for (std::size_t j = 0; j < d; ++j) r.factors[j] += f.values[j];
        for (auto& x : r.factors) {
            x /= static_cast<double>(train_features.size());
            if (x == 0.0) x = 1.0;
        }
    } else {
        double grand = 0.0;
        for (const auto& f : train_features)
            for (double x : f.values) grand += x;
        grand /= static_cast<double>(train_features.size() * d);
        r.factors.assign(1, grand == 0.0 ? 1.0 : grand);
    }
    return r;
}

SubjectFeatures rescaler_apply(const SubjectFeatures& features, const Rescaler& rescaler) {
    SubjectFeatures out = features;
    if (rescaler.mode == Rescaler::Mode::per_column) {
        if (features.values.size() != rescaler.factors.size())
            throw ValidationError("rescaler_apply: dimension mismatch");
        for (std::size_t j = 0; j < out.values.size(); ++j) out.values[j] /= rescaler.factors[j];
    } else {
        const double f = rescaler.factors.at(0);
        for (auto& x : out.values) x /= f;
    }
    for (double x : out.values)
        if (!std::isfinite(x)) throw std::runtime_error("rescaler_apply: non-finite feature");
    return out;
}

void write_features_csv(const std::vector<SubjectFeatures>& features, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open features csv for writing: " + path);
    const std::size_t d = features.empty() ? 0 : features[0].values.size();
    out << "subject,label";
    for (std::size_t j = 0; j < d; ++j) out << ",f" << j;
    out << '\n';
    char buf[32];
    for (const auto& f : features) {
        out << f.subject_id << ',' << to_string(f.label);
        for (double x : f.values) {
            std::snprintf(buf, sizeof(buf), "%.17g", x);
            out << ',' << buf;
        }
        out << '\n';
    }
}

} // namespace appsess
