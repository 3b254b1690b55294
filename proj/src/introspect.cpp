#include "appsess/introspect.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>

#include <json.hpp>

#include "appsess/error.hpp"
#include "appsess/ingest.hpp"

namespace appsess {

FittedPipeline fit_full_pipeline(const Cohort& cohort, const HyperGrid& grid,
                                 const PipelineConfig& config) {
    const std::size_t n = cohort.subjects.size();
    if (n < 4) throw ValidationError("fit_full_pipeline: need at least 4 subjects");
    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);

    const ArtifactSet artifacts =
        build_artifacts(cohort, all, Variant::full, grid.Ks, config);
    const auto [K, C] = inner_select(cohort, all, Variant::full, grid, FitScope::global,
                                     config, &artifacts);

    FittedPipeline p;
    p.K = K;
    p.C = C;
    p.embedding = artifacts.embedding;
    p.type_model = *artifacts.model_for(K);
    p.type_model.inertia_trace.clear();

    const FeatureArtifacts fa = artifacts.for_K(K, cohort, config.repr);
    std::vector<SubjectFeatures> raw;
    raw.reserve(n);
    for (const auto& s : cohort.subjects) raw.push_back(featurize(s, fa));
    p.rescaler = rescaler_fit(raw, config.rescale_mode);

    std::vector<double> X;
    std::vector<int> y;
    X.reserve(n * static_cast<std::size_t>(K));
    for (const auto& r : raw) {
        auto scaled = rescaler_apply(r, p.rescaler);
        X.insert(X.end(), scaled.values.begin(), scaled.values.end());
        y.push_back(r.label == Label::symptomatic ? 1 : 0);
        p.rescaled_features.push_back(std::move(scaled));
    }
    p.fit = fit_l1_logistic(X, static_cast<int>(n), K, y, C);
    return p;
}

std::vector<std::string> top_common_apps(const std::vector<std::vector<std::string>>& sessions,
                                         int top_m) {
    std::map<std::string, std::int64_t> counts;
    for (const auto& s : sessions)
        for (const auto& app : s) ++counts[app];
    std::vector<std::pair<std::string, std::int64_t>> items(counts.begin(), counts.end());
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::string> out;
    for (const auto& [app, cnt] : items) {
        if (static_cast<int>(out.size()) >= top_m) break;
        out.push_back(app);
    }
    return out;
}

std::vector<double> app_distribution_delta(
    const std::vector<std::vector<std::string>>& type_sessions,
    const std::vector<std::vector<std::string>>& all_sessions,
    const std::vector<std::string>& apps) {
    if (type_sessions.empty()) throw ValidationError("app_distribution_delta: empty type");
    if (all_sessions.empty()) throw ValidationError("app_distribution_delta: empty dataset");

    auto frequency = [&](const std::vector<std::vector<std::string>>& sess,
                         const std::string& app) {
        std::int64_t hits = 0, total = 0;
        for (const auto& s : sess) {
            total += static_cast<std::int64_t>(s.size());
            for (const auto& a : s) hits += (a == app);
        }
        return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
    };

    std::vector<double> delta;
    delta.reserve(apps.size());
    for (const auto& app : apps)
        delta.push_back(frequency(type_sessions, app) - frequency(all_sessions, app));
    return delta;
}

namespace {

std::string serialize_multiset(std::vector<std::string> apps) {
    std::sort(apps.begin(), apps.end());
    std::string out;
    for (std::size_t i = 0; i < apps.size(); ++i) {
        if (i) out += '+';
        out += apps[i];
    }
    return out;
}

} // namespace

TypeContributionReport rank_type_contributions(const Cohort& cohort,
                                               const FittedPipeline& pipeline, int top_n,
                                               int top_m) {
    const int K = pipeline.K;
    if (static_cast<int>(pipeline.fit.weights.size()) != K)
        throw ValidationError("rank_type_contributions: pipeline not fitted");
    if (pipeline.rescaled_features.size() != cohort.subjects.size())
        throw ValidationError("rank_type_contributions: pipeline features missing");

    // Assign every session once, grouping app lists by type.
    std::vector<std::vector<std::vector<std::string>>> by_type(K);
    std::vector<std::vector<std::string>> all_sessions;
    for (const auto& s : cohort.subjects) {
        for (const auto& session : sessionize(s)) {
            auto vec = session_vector_mean(session, pipeline.embedding);
            all_sessions.push_back(session.apps);
            if (!vec) continue;
            by_type[assign_type(pipeline.type_model, *vec)].push_back(session.apps);
        }
    }
    const auto top_apps = top_common_apps(all_sessions, top_m);

    std::vector<TypeContribution> entries(K);
    for (int t = 0; t < K; ++t) {
        TypeContribution& e = entries[t];
        e.session_type_id = t;
        e.weight = pipeline.fit.weights[t];
        e.feature_sum = 0.0;
        for (const auto& f : pipeline.rescaled_features) e.feature_sum += f.values[t];
        e.contribution = e.weight * e.feature_sum;
        e.nearest_app = nearest_app_to_centroid(pipeline.type_model, pipeline.embedding, t);
        e.session_count = static_cast<std::int64_t>(by_type[t].size());

        if (!by_type[t].empty()) {
            // Modal multiset; ties go to the smallest serialized form.
            std::map<std::string, std::pair<std::int64_t, std::vector<std::string>>> tally;
            for (const auto& apps : by_type[t]) {
                auto key = serialize_multiset(apps);
                auto& slot = tally[key];
                ++slot.first;
                slot.second = apps;
            }
            std::int64_t best_count = 0;
            std::string best_key;
            for (const auto& [key, slot] : tally) {
                if (slot.first > best_count) {
                    best_count = slot.first;
                    best_key = key;
                }
            }
            e.most_common_session = tally[best_key].second;
            std::sort(e.most_common_session.begin(), e.most_common_session.end());
            e.delta_apps = top_apps;
            e.app_distribution_delta =
                app_distribution_delta(by_type[t], all_sessions, top_apps);
        }
    }

    TypeContributionReport report;
    std::vector<const TypeContribution*> sorted;
    for (const auto& e : entries) sorted.push_back(&e);
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
        return a->contribution > b->contribution;
    });
    for (const auto* e : sorted) {
        if (e->contribution > 0.0 && static_cast<int>(report.positive.size()) < top_n)
            report.positive.push_back(*e);
    }
    for (auto it = sorted.rbegin(); it != sorted.rend(); ++it) {
        if ((*it)->contribution < 0.0 && static_cast<int>(report.negative.size()) < top_n)
            report.negative.push_back(**it);
    }
    return report;
}

std::vector<SessionContribution> session_contributions(const Subject& subject,
                                                       const FoldModel& fold,
                                                       const ReprOptions& repr) {
    if (fold.fit.weights.empty())
        throw ValidationError("session_contributions: fold model not fitted");
    const double days = derive_days_observed(subject);

    std::vector<SessionContribution> out;
    for (const auto& session : sessionize(subject)) {
        auto vec = session_vector_mean(session, fold.embedding, nullptr, repr);
        if (!vec) continue; // dropped sessions carry no feature mass
        const int type = assign_type(fold.type_model, *vec);
        const double factor = fold.rescaler.mode == Rescaler::Mode::per_column
                                  ? fold.rescaler.factors[type]
                                  : fold.rescaler.factors.at(0);
        SessionContribution c;
        c.subject_id = subject.subject_id;
        c.start_ts = session.start_ts;
        c.end_ts = session.end_ts;
        c.apps = session.apps;
        c.session_type_id = type;
        // One session adds 1/days to the raw feature, scaled like the features.
        c.contribution = fold.fit.weights[type] / (days * factor);
        out.push_back(std::move(c));
    }
    return out;
}

TopSessionsResult per_subject_top_sessions(const Subject& subject, const FoldModel& fold,
                                           int n, const ReprOptions& repr) {
    if (n < 1) throw ValidationError("per_subject_top_sessions: n must be >= 1");
    auto contributions = session_contributions(subject, fold, repr);

    TopSessionsResult res;
    res.subject_id = subject.subject_id;

    // The fold model's own prediction decides which direction to rank.
    FeatureArtifacts fa;
    fa.variant = Variant::full;
    fa.embedding = &fold.embedding;
    fa.type_model = &fold.type_model;
    fa.repr = repr;
    const auto features = featurize(subject, fa);
    res.prob = predict_proba(fold.fit, rescaler_apply(features, fold.rescaler).values);

    const bool high = res.prob >= 0.5;
    std::stable_sort(contributions.begin(), contributions.end(),
                     [high](const SessionContribution& a, const SessionContribution& b) {
                         if (a.contribution != b.contribution)
                             return high ? a.contribution > b.contribution
                                         : a.contribution < b.contribution;
                         return a.start_ts < b.start_ts;
                     });
    if (static_cast<int>(contributions.size()) < n) {
        res.fewer_than_requested = true;
        res.sessions = std::move(contributions);
    } else {
        res.sessions.assign(contributions.begin(), contributions.begin() + n);
    }
    return res;
}

namespace {

nlohmann::ordered_json contribution_to_json(const TypeContribution& e) {
    nlohmann::ordered_json j;
    j["session_type"] = e.session_type_id;
    j["weight"] = e.weight;
    j["feature_sum"] = e.feature_sum;
    j["contribution"] = e.contribution;
    j["nearest_app"] = e.nearest_app;
    j["most_common_session"] = e.most_common_session;
    j["session_count"] = e.session_count;
    auto delta = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < e.delta_apps.size(); ++i) {
        nlohmann::ordered_json d;
        d["app"] = e.delta_apps[i];
        d["delta"] = e.app_distribution_delta[i];
        delta.push_back(std::move(d));
    }
    j["app_distribution_delta"] = std::move(delta);
    return j;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open for writing: " + path);
    out << text;
}

std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::string join_plus(const std::vector<std::string>& apps) {
    std::string s;
    for (std::size_t i = 0; i < apps.size(); ++i) {
        if (i) s += '+';
        s += apps[i];
    }
    return s;
}

} // namespace

void write_type_contributions_json(const TypeContributionReport& report,
                                   const std::string& path) {
    nlohmann::ordered_json j;
    auto pos = nlohmann::ordered_json::array();
    for (const auto& e : report.positive) pos.push_back(contribution_to_json(e));
    auto neg = nlohmann::ordered_json::array();
    for (const auto& e : report.negative) neg.push_back(contribution_to_json(e));
    j["positive"] = std::move(pos);
    j["negative"] = std::move(neg);
    write_text_file(path, j.dump(2) + "\n");
}

void write_type_contributions_csv(const TypeContributionReport& report,
                                  const std::string& path) {
    std::string text =
        "direction,session_type,weight,feature_sum,contribution,nearest_app,most_common_session,"
        "session_count\n";
    auto row = [&](const char* dir, const TypeContribution& e) {
        text += std::string(dir) + "," + std::to_string(e.session_type_id) + "," +
                fmt_double(e.weight) + "," + fmt_double(e.feature_sum) + "," +
                fmt_double(e.contribution) + "," + e.nearest_app + "," +
                join_plus(e.most_common_session) + "," + std::to_string(e.session_count) + "\n";
    };
    for (const auto& e : report.positive) row("positive", e);
    for (const auto& e : report.negative) row("negative", e);
    write_text_file(path, text);
}

void write_delta_csv(const TypeContributionReport& report, const std::string& path) {
    std::string text = "session_type,app,delta\n";
    auto rows = [&](const TypeContribution& e) {
        for (std::size_t i = 0; i < e.delta_apps.size(); ++i)
            text += std::to_string(e.session_type_id) + "," + e.delta_apps[i] + "," +
                    fmt_double(e.app_distribution_delta[i]) + "\n";
    };
    for (const auto& e : report.positive) rows(e);
    for (const auto& e : report.negative) rows(e);
    write_text_file(path, text);
}

void write_top_sessions_json(const std::vector<TopSessionsResult>& results,
                             const std::string& path) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : results) {
        nlohmann::ordered_json j;
        j["subject"] = r.subject_id;
        j["prob"] = r.prob;
        j["fewer_than_requested"] = r.fewer_than_requested;
        auto sess = nlohmann::ordered_json::array();
        for (const auto& s : r.sessions) {
            nlohmann::ordered_json e;
            e["start_ts"] = s.start_ts;
            e["end_ts"] = s.end_ts;
            e["apps"] = s.apps;
            e["session_type"] = s.session_type_id;
            e["contribution"] = s.contribution;
            sess.push_back(std::move(e));
        }
        j["sessions"] = std::move(sess);
        arr.push_back(std::move(j));
    }
    write_text_file(path, arr.dump(2) + "\n");
}

void write_top_sessions_csv(const std::vector<TopSessionsResult>& results,
                            const std::string& path) {
    std::string text = "subject,prob,start_ts,session_type,contribution,apps\n";
    for (const auto& r : results)
        for (const auto& s : r.sessions)
            text += r.subject_id + "," + fmt_double(r.prob) + "," + std::to_string(s.start_ts) +
                    "," + std::to_string(s.session_type_id) + "," + fmt_double(s.contribution) +
                    "," + join_plus(s.apps) + "\n";
    write_text_file(path, text);
}

} // namespace appsess
