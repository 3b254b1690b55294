#include "appsess/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include <json.hpp>

#include "appsess/error.hpp"
#include "appsess/parallel.hpp"
#include "appsess/rng.hpp"

namespace appsess {

const char* fit_scope_name(FitScope s) {
    return s == FitScope::per_fold ? "per_fold" : "global";
}

FitScope fit_scope_from_name(const std::string& name) {
    if (name == "per_fold") return FitScope::per_fold;
    if (name == "global") return FitScope::global;
    throw ValidationError("unknown fit_scope '" + name + "'");
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
    const std::size_t n = scores.size();
    if (n == 0 || labels.size() != n) throw ValidationError("auroc: shape mismatch");

    std::size_t n_pos = 0;
    for (int l : labels) n_pos += (l > 0);
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw ValidationError("auroc: both classes must be present");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Average ranks over tie runs, then the Mann-Whitney U statistic.
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0; // 1-based
        for (std::size_t k = i; k <= j; ++k)
            if (labels[order[k]] > 0) rank_sum_pos += avg_rank;
        i = j + 1;
    }
    const double u = rank_sum_pos -
                     0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
    const double pairs = static_cast<double>(n_pos) * static_cast<double>(n_neg);
    // Evaluating the smaller tail keeps auroc(y) + auroc(1-y) == 1 exact.
    if (2.0 * u <= pairs) return u / pairs;
    return 1.0 - (pairs - u) / pairs;
}

std::vector<std::pair<double, double>> roc_points(std::span<const double> scores,
                                                  std::span<const int> labels) {
    const std::size_t n = scores.size();
    if (n == 0 || labels.size() != n) throw ValidationError("roc_points: shape mismatch");
    double n_pos = 0, n_neg = 0;
    for (int l : labels) (l > 0 ? n_pos : n_neg) += 1.0;
    if (n_pos == 0 || n_neg == 0)
        throw ValidationError("roc_points: both classes must be present");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    std::vector<std::pair<double, double>> pts;
    pts.emplace_back(0.0, 0.0);
    double tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k)
            (labels[order[k]] > 0 ? tp : fp) += 1.0;
        pts.emplace_back(fp / n_neg, tp / n_pos);
        i = j + 1;
    }
    return pts;
}

const SessionTypeModel* ArtifactSet::model_for(int K) const {
    for (std::size_t i = 0; i < ks.size(); ++i)
        if (ks[i] == K) return &models[i];
    return nullptr;
}

FeatureArtifacts ArtifactSet::for_K(int K, const Cohort& cohort, const ReprOptions& repr) const {
    FeatureArtifacts fa;
    fa.variant = variant;
    fa.repr = repr;
    if (variant_uses_embedding(variant)) {
        fa.embedding = &embedding;
        fa.type_model = model_for(K);
        if (!fa.type_model)
            throw ValidationError("ArtifactSet: no session type model for K=" +
                                  std::to_string(K));
    } else if (variant == Variant::B3 || variant == Variant::B5) {
        fa.vocab = &vocab;
    } else {
        fa.categories = &categories;
        fa.category_map = &cohort.category_map;
    }
    return fa;
}

namespace {

// Identity of a training subject set; stable under anything but the id
// sequence itself, so fold artifacts depend only on the training data.
std::uint64_t train_set_hash(const Cohort& cohort, const std::vector<int>& train_indices) {
    std::uint64_t h = 0xabcdef12345678ULL;
    for (int i : train_indices)
        h = derive_seed(h, cohort.subjects[i].subject_id);
    return h;
}

std::vector<Subject> gather_subjects(const Cohort& cohort, const std::vector<int>& indices) {
    std::vector<Subject> out;
    out.reserve(indices.size());
    for (int i : indices) out.push_back(cohort.subjects[i]);
    return out;
}

void validate_grid(const HyperGrid& grid) {
    if (grid.Ks.empty() || grid.Cs.empty())
        throw ValidationError("hyper grid must be non-empty");
    for (std::size_t i = 0; i < grid.Ks.size(); ++i) {
        if (grid.Ks[i] < 1) throw ValidationError("hyper grid: K must be >= 1");
        if (i > 0 && grid.Ks[i] <= grid.Ks[i - 1])
            throw ValidationError("hyper grid: Ks must be sorted ascending");
    }
    for (std::size_t i = 0; i < grid.Cs.size(); ++i) {
        if (!(grid.Cs[i] > 0.0)) throw ValidationError("hyper grid: C must be > 0");
        if (i > 0 && grid.Cs[i] <= grid.Cs[i - 1])
            throw ValidationError("hyper grid: Cs must be sorted ascending");
    }
}

std::vector<SubjectFeatures> featurize_set(const Cohort& cohort, const std::vector<int>& indices,
                                           const FeatureArtifacts& fa, FeatureDiag* diag) {
    std::vector<SubjectFeatures> rows;
    rows.reserve(indices.size());
    for (int i : indices) rows.push_back(featurize(cohort.subjects[i], fa, diag));
    return rows;
}

// Features per (K index, cohort subject index), used when fit_scope=global.
struct FeatureCache {
    std::vector<int> ks;
    std::vector<std::vector<SubjectFeatures>> by_k; // [k_idx][subject_idx]
    FeatureDiag diag;

    const SubjectFeatures& get(int k_idx, int subject_idx) const {
        return by_k[k_idx][subject_idx];
    }
};

std::vector<int> effective_ks(Variant variant, const HyperGrid& grid) {
    if (variant_uses_clustering(variant)) return grid.Ks;
    return {0};
}

struct CellResult {
    double prob = 0.0;
};

// Shared core of inner_select: produces inner-LOO probabilities for every
// grid cell. `cache` is set iff fit_scope == global.
std::pair<int, double> select_cell(const Cohort& cohort, const std::vector<int>& train_indices,
                                   Variant variant, const HyperGrid& grid, FitScope scope,
                                   const PipelineConfig& config, const FeatureCache* cache) {
    const std::vector<int> ks = effective_ks(variant, grid);
    const std::size_t n = train_indices.size();
    if (n < 3) throw ValidationError("inner_select: need at least 3 training subjects");

    std::vector<int> train_labels(n);
    for (std::size_t i = 0; i < n; ++i)
        train_labels[i] = cohort.subjects[train_indices[i]].label == Label::symptomatic ? 1 : 0;
    if (std::count(train_labels.begin(), train_labels.end(), 1) == 0 ||
        std::count(train_labels.begin(), train_labels.end(), 0) == 0)
        throw ValidationError("inner_select: training subjects must contain both classes");

    // probs[k_idx][c_idx][fold]
    std::vector<std::vector<std::vector<double>>> probs(
        ks.size(), std::vector<std::vector<double>>(grid.Cs.size(), std::vector<double>(n, 0.0)));
    std::size_t degenerate = 0;

    for (std::size_t j = 0; j < n; ++j) {
        std::vector<int> inner_train;
        inner_train.reserve(n - 1);
        for (std::size_t i = 0; i < n; ++i)
            if (i != j) inner_train.push_back(train_indices[i]);

        int pos = 0;
        for (int idx : inner_train)
            pos += cohort.subjects[idx].label == Label::symptomatic ? 1 : 0;
        if (pos == 0 || pos == static_cast<int>(inner_train.size())) {
            // Single-class inner fold: predict the class prior.
            const double prior =
                static_cast<double>(pos) / static_cast<double>(inner_train.size());
            for (auto& per_c : probs)
                for (auto& p : per_c) p[j] = prior;
            ++degenerate;
            continue;
        }

        std::vector<int> inner_labels;
        inner_labels.reserve(inner_train.size());
        for (int idx : inner_train)
            inner_labels.push_back(cohort.subjects[idx].label == Label::symptomatic ? 1 : 0);

        ArtifactSet local;
        if (scope == FitScope::per_fold)
            local = build_artifacts(cohort, inner_train, variant, ks, config);

        for (std::size_t k_idx = 0; k_idx < ks.size(); ++k_idx) {
            std::vector<SubjectFeatures> rows;
            SubjectFeatures held;
            if (cache) {
                rows.reserve(inner_train.size());
                for (int idx : inner_train) rows.push_back(cache->get(k_idx, idx));
                held = cache->get(k_idx, train_indices[j]);
            } else {
                const FeatureArtifacts fa = local.for_K(ks[k_idx], cohort, config.repr);
                rows = featurize_set(cohort, inner_train, fa, nullptr);
                held = featurize(cohort.subjects[train_indices[j]], fa, nullptr);
            }

            const Rescaler rescaler = rescaler_fit(rows, config.rescale_mode);
            const std::size_t d = rows[0].values.size();
            std::vector<double> X;
            X.reserve(rows.size() * d);
            for (const auto& r : rows) {
                const auto scaled = rescaler_apply(r, rescaler);
                X.insert(X.end(), scaled.values.begin(), scaled.values.end());
            }
            const auto held_scaled = rescaler_apply(held, rescaler);

            for (std::size_t c_idx = 0; c_idx < grid.Cs.size(); ++c_idx) {
                const FitResult fit =
                    fit_l1_logistic(X, static_cast<int>(rows.size()), static_cast<int>(d),
                                    inner_labels, grid.Cs[c_idx]);
                probs[k_idx][c_idx][j] = predict_proba(fit, held_scaled.values);
            }
        }
    }

    if (degenerate == n)
        throw ValidationError("inner_select: every inner fold is single-class");

    int best_k = ks[0];
    double best_c = grid.Cs[0];
    double best_auroc = -1.0;
    for (std::size_t k_idx = 0; k_idx < ks.size(); ++k_idx) {
        for (std::size_t c_idx = 0; c_idx < grid.Cs.size(); ++c_idx) {
            const double a = auroc(probs[k_idx][c_idx], train_labels);
            if (a > best_auroc) {
                best_auroc = a;
                best_k = ks[k_idx];
                best_c = grid.Cs[c_idx];
            }
        }
    }
    return {best_k, best_c};
}

FeatureCache build_feature_cache(const Cohort& cohort, const ArtifactSet& artifacts,
                                 const std::vector<int>& ks, const PipelineConfig& config) {
    FeatureCache cache;
    cache.ks = ks;
    cache.by_k.resize(ks.size());
    for (std::size_t k_idx = 0; k_idx < ks.size(); ++k_idx) {
        const FeatureArtifacts fa = artifacts.for_K(ks[k_idx], cohort, config.repr);
        cache.by_k[k_idx].reserve(cohort.subjects.size());
        for (const auto& s : cohort.subjects) {
            // Count drop diagnostics once per subject, on the first K.
            cache.by_k[k_idx].push_back(
                featurize(s, fa, k_idx == 0 ? &cache.diag : nullptr));
        }
    }
    return cache;
}

} // namespace

ArtifactSet build_artifacts(const Cohort& cohort, const std::vector<int>& train_indices,
                            Variant variant, const std::vector<int>& Ks,
                            const PipelineConfig& config) {
    if (train_indices.empty()) throw ValidationError("build_artifacts: empty training set");
    ArtifactSet out;
    out.variant = variant;

    const std::uint64_t th = train_set_hash(cohort, train_indices);
    const auto train_subjects = gather_subjects(cohort, train_indices);

    if (variant == Variant::B4 || variant == Variant::B6) {
        if (!cohort.has_category_map)
            throw ValidationError(std::string("variant ") + variant_name(variant) +
                                  " requires a category map");
        out.categories = CategorySpace::from_map(cohort.category_map);
        return out;
    }

    const auto corpora = build_corpora(train_subjects, config.sentence_scope);
    if (variant == Variant::B3 || variant == Variant::B5) {
        out.vocab = build_vocab(corpora, config.embedding.min_count);
        return out;
    }

    EmbeddingConfig emb_cfg = config.embedding;
    emb_cfg.seed = derive_seed(config.seed, "embedding", th);
    out.embedding = train_cbow(corpora, emb_cfg);
    if (variant == Variant::B2)
        out.embedding =
            permute_embeddings(out.embedding, derive_seed(config.seed, "permute", th));

    // Points to cluster: session mean vectors (full/B2) or the per-event
    // embeddings (B1), pooled over the training subjects.
    const int D = out.embedding.config.dim;
    std::vector<float> points;
    if (variant == Variant::B1) {
        for (const auto& s : train_subjects) {
            for (const auto& app : corpus_of(s)) {
                const float* v = out.embedding.lookup(app);
                if (v) points.insert(points.end(), v, v + D);
            }
        }
    } else {
        for (const auto& s : train_subjects) {
            for (const auto& session : sessionize(s)) {
                auto vec = session_vector_mean(session, out.embedding, nullptr, config.repr);
                if (vec) points.insert(points.end(), vec->begin(), vec->end());
            }
        }
    }

    out.ks = Ks;
    out.models.reserve(Ks.size());
    for (int K : Ks) {
        KMeansConfig km = config.kmeans;
        km.k = K;
        km.seed = derive_seed(config.seed, "kmeans", th, static_cast<std::uint64_t>(K));
        out.models.push_back(kmeans_fit(points, D, km));
        out.models.back().inertia_trace.clear(); // folds keep memory lean
    }
    return out;
}

std::pair<int, double> inner_select(const Cohort& cohort, const std::vector<int>& train_indices,
                                    Variant variant, const HyperGrid& grid, FitScope scope,
                                    const PipelineConfig& config,
                                    const ArtifactSet* global_artifacts) {
    validate_grid(grid);
    if (scope == FitScope::global) {
        if (!global_artifacts)
            throw ValidationError("inner_select: global scope requires global artifacts");
        const FeatureCache cache =
            build_feature_cache(cohort, *global_artifacts, effective_ks(variant, grid), config);
        return select_cell(cohort, train_indices, variant, grid, scope, config, &cache);
    }
    return select_cell(cohort, train_indices, variant, grid, scope, config, nullptr);
}

EvaluationReport outer_loo(const Cohort& cohort, Variant variant, const HyperGrid& grid,
                           FitScope scope, const PipelineConfig& config,
                           std::vector<FoldModel>* fold_models) {
    validate_grid(grid);
    const std::size_t n = cohort.subjects.size();
    if (n < 4) throw ValidationError("outer_loo: need at least 4 subjects");
    {
        std::size_t pos = 0;
        for (const auto& s : cohort.subjects) pos += s.label == Label::symptomatic;
        if (pos == 0 || pos == n)
            throw ValidationError("outer_loo: cohort must contain both classes");
    }

    const auto t0 = std::chrono::steady_clock::now();
    EvaluationReport report;
    report.variant = variant;
    report.scope = scope;
    report.seed = config.seed;
    report.per_subject.resize(n);

    for (const auto& s : cohort.subjects) {
        SessionizeStats st;
        sessionize(s, &st);
        report.diagnostics.sessionize += st;
    }

    const std::vector<int> ks = effective_ks(variant, grid);

    ArtifactSet global_art;
    FeatureCache global_cache;
    if (scope == FitScope::global) {
        std::vector<int> all(n);
        std::iota(all.begin(), all.end(), 0);
        global_art = build_artifacts(cohort, all, variant, ks, config);
        global_cache = build_feature_cache(cohort, global_art, ks, config);
        report.diagnostics.features = global_cache.diag;
    }

    std::vector<FeatureDiag> fold_diags(n);
    if (fold_models) fold_models->resize(n);

    parallel_for(
        n,
        [&](std::size_t i) {
            std::vector<int> train;
            train.reserve(n - 1);
            for (std::size_t t = 0; t < n; ++t)
                if (t != i) train.push_back(static_cast<int>(t));

            ArtifactSet local;
            const FeatureCache* cache = nullptr;
            if (scope == FitScope::per_fold)
                local = build_artifacts(cohort, train, variant, ks, config);
            else
                cache = &global_cache;

            const auto [K, C] =
                select_cell(cohort, train, variant, grid, scope, config, cache);
            const int k_idx = static_cast<int>(
                std::find(ks.begin(), ks.end(), K) - ks.begin());

            std::vector<SubjectFeatures> rows;
            SubjectFeatures held;
            if (cache) {
                rows.reserve(train.size());
                for (int idx : train) rows.push_back(cache->get(k_idx, idx));
                held = cache->get(k_idx, static_cast<int>(i));
            } else {
                const FeatureArtifacts fa = local.for_K(K, cohort, config.repr);
                rows = featurize_set(cohort, train, fa, nullptr);
                held = featurize(cohort.subjects[i], fa, &fold_diags[i]);
            }

            const Rescaler rescaler = rescaler_fit(rows, config.rescale_mode);
            const std::size_t d = rows[0].values.size();
            std::vector<double> X;
            std::vector<int> y;
            X.reserve(rows.size() * d);
            y.reserve(rows.size());
            for (const auto& r : rows) {
                const auto scaled = rescaler_apply(r, rescaler);
                X.insert(X.end(), scaled.values.begin(), scaled.values.end());
                y.push_back(r.label == Label::symptomatic ? 1 : 0);
            }
            FitResult fit = fit_l1_logistic(X, static_cast<int>(rows.size()),
                                            static_cast<int>(d), y, C);
            const auto held_scaled = rescaler_apply(held, rescaler);
            const double prob = predict_proba(fit, held_scaled.values);

            auto& res = report.per_subject[i];
            res.subject_id = cohort.subjects[i].subject_id;
            res.label = cohort.subjects[i].label;
            res.prob = prob;
            res.chosen_K = variant_uses_clustering(variant) ? K : 0;
            res.chosen_C = C;

            if (fold_models) {
                FoldModel& fm = (*fold_models)[i];
                fm.held_out_id = cohort.subjects[i].subject_id;
                fm.K = res.chosen_K;
                fm.C = C;
                fm.rescaler = rescaler;
                fm.fit = std::move(fit);
                if (variant_uses_embedding(variant)) {
                    const ArtifactSet& src = cache ? global_art : local;
                    fm.embedding = src.embedding;
                    fm.type_model = *src.model_for(K);
                    fm.type_model.inertia_trace.clear();
                }
            }
        },
        config.threads);

    if (scope == FitScope::per_fold)
        for (const auto& dg : fold_diags) report.diagnostics.features += dg;

    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        scores[i] = report.per_subject[i].prob;
        labels[i] = report.per_subject[i].label == Label::symptomatic ? 1 : 0;
    }
    report.auroc = auroc(scores, labels);
    report.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

std::vector<EvaluationReport> ablation_table(const Cohort& cohort, const HyperGrid& grid,
                                             FitScope scope, const PipelineConfig& config) {
    std::vector<EvaluationReport> reports;
    for (Variant v : {Variant::full, Variant::B1, Variant::B2, Variant::B3, Variant::B4,
                      Variant::B5, Variant::B6})
        reports.push_back(outer_loo(cohort, v, grid, scope, config));
    return reports;
}

namespace {

nlohmann::ordered_json report_to_json(const EvaluationReport& r) {
    nlohmann::ordered_json j;
    j["variant"] = variant_name(r.variant);
    j["fit_scope"] = fit_scope_name(r.scope);
    j["seed"] = r.seed;
    j["auroc"] = r.auroc;
    auto subjects = nlohmann::ordered_json::array();
    for (const auto& p : r.per_subject) {
        nlohmann::ordered_json e;
        e["subject"] = p.subject_id;
        e["label"] = to_string(p.label);
        e["prob"] = p.prob;
        e["K"] = p.chosen_K;
        e["C"] = p.chosen_C;
        subjects.push_back(std::move(e));
    }
    j["per_subject"] = std::move(subjects);
    nlohmann::ordered_json diag;
    diag["dropped_opens"] = r.diagnostics.sessionize.dropped_opens;
    diag["unpaired_unlocks"] = r.diagnostics.sessionize.unpaired_unlocks;
    diag["unpaired_locks"] = r.diagnostics.sessionize.unpaired_locks;
    diag["empty_windows"] = r.diagnostics.sessionize.empty_windows;
    diag["dropped_sessions"] = r.diagnostics.features.dropped_sessions;
    diag["skipped_apps"] = r.diagnostics.features.skipped_apps;
    j["diagnostics"] = std::move(diag);
    return j;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open for writing: " + path);
    out << text;
}

std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

} // namespace

void write_report_json(const EvaluationReport& report, const std::string& path) {
    write_text(path, report_to_json(report).dump(2) + "\n");
}

void write_roc_csv(const EvaluationReport& report, const std::string& path) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& p : report.per_subject) {
        scores.push_back(p.prob);
        labels.push_back(p.label == Label::symptomatic ? 1 : 0);
    }
    std::string text = "fpr,tpr\n";
    for (const auto& [fpr, tpr] : roc_points(scores, labels))
        text += fmt_double(fpr) + "," + fmt_double(tpr) + "\n";
    write_text(path, text);
}

void write_ablation_csv(const std::vector<EvaluationReport>& reports, const std::string& path) {
    std::string text = "variant,auroc\n";
    for (const auto& r : reports)
        text += std::string(variant_name(r.variant)) + "," + fmt_double(r.auroc) + "\n";
    text += "chance,0.5\n";
    write_text(path, text);
}

void write_ablation_json(const std::vector<EvaluationReport>& reports, const std::string& path) {
    nlohmann::ordered_json j;
    auto rows = nlohmann::ordered_json::array();
    for (const auto& r : reports) {
        nlohmann::ordered_json e;
        e["variant"] = variant_name(r.variant);
        e["auroc"] = r.auroc;
        rows.push_back(std::move(e));
    }
    nlohmann::ordered_json chance;
    chance["variant"] = "chance";
    chance["auroc"] = 0.5;
    rows.push_back(std::move(chance));
    j["rows"] = std::move(rows);
    if (!reports.empty()) {
        j["fit_scope"] = fit_scope_name(reports.front().scope);
        j["seed"] = reports.front().seed;
    }
    write_text(path, j.dump(2) + "\n");
}

} // namespace appsess
