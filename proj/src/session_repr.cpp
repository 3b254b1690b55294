#include "appsess/session_repr.hpp"

#include <algorithm>
#include <set>

namespace appsess {

namespace {

// Session apps with the dedupe option applied.
std::vector<std::string> effective_apps(const Session& session, const ReprOptions& opts) {
    if (!opts.dedupe_within_session) return session.apps;
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& a : session.apps)
        if (seen.insert(a).second) out.push_back(a);
    return out;
}

} // namespace

CategorySpace CategorySpace::from_map(const std::map<std::string, std::string>& category_map) {
    CategorySpace space;
    std::set<std::string> cats;
    for (const auto& [app, cat] : category_map) cats.insert(cat);
    cats.insert("unknown");
    space.categories.assign(cats.begin(), cats.end());
    for (std::size_t i = 0; i < space.categories.size(); ++i)
        space.index.emplace(space.categories[i], static_cast<int>(i));
    space.unknown_index = space.index.at("unknown");
    return space;
}

int CategorySpace::category_of(const std::map<std::string, std::string>& category_map,
                               const std::string& app) const {
    auto it = category_map.find(app);
    if (it == category_map.end()) return unknown_index;
    auto idx = index.find(it->second);
    return idx == index.end() ? unknown_index : idx->second;
}

std::optional<std::vector<float>> session_vector_mean(const Session& session,
                                                      const EmbeddingModel& model,
                                                      int* skipped_apps,
                                                      const ReprOptions& opts) {
    const int D = model.config.dim;
    std::vector<double> acc(D, 0.0);
    int included = 0, skipped = 0;
    for (const auto& app : effective_apps(session, opts)) {
        const float* v = model.lookup(app);
        if (!v) {
            ++skipped;
            continue;
        }
        for (int d = 0; d < D; ++d) acc[d] += v[d];
        ++included;
    }
    if (skipped_apps) *skipped_apps = skipped;
    if (included == 0) return std::nullopt;
    std::vector<float> out(D);
    const double inv = 1.0 / included;
    for (int d = 0; d < D; ++d) out[d] = static_cast<float>(acc[d] * inv);
    return out;
}

std::optional<std::vector<float>> session_vector_onehot(const Session& session,
                                                        const Vocab& vocab,
                                                        int* skipped_apps,
                                                        const ReprOptions& opts) {
    std::vector<double> acc(vocab.size(), 0.0);
    int included = 0, skipped = 0;
    for (const auto& app : effective_apps(session, opts)) {
        const int i = vocab.find(app);
        if (i < 0) {
            ++skipped;
            continue;
        }
        acc[i] += 1.0;
        ++included;
    }
    if (skipped_apps) *skipped_apps = skipped;
    if (included == 0) return std::nullopt;
    std::vector<float> out(vocab.size());
    const double inv = 1.0 / included;
    for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>(acc[i] * inv);
    return out;
}

std::vector<float> session_vector_onehot_category(
    const Session& session, const CategorySpace& space,
    const std::map<std::string, std::string>& category_map, const ReprOptions& opts) {
    std::vector<double> acc(space.size(), 0.0);
    int included = 0;
    for (const auto& app : effective_apps(session, opts)) {
        acc[space.category_of(category_map, app)] += 1.0;
        ++included;
    }
    std::vector<float> out(space.size(), 0.0f);
    if (included == 0) return out; // sessions are non-empty by construction
    const double inv = 1.0 / included;
    for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>(acc[i] * inv);
    return out;
}

} // namespace appsess
