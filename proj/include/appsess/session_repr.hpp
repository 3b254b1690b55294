#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "appsess/embedding.hpp"
#include "appsess/types.hpp"

namespace appsess {

struct ReprOptions {
    bool dedupe_within_session = false; // count each distinct app once per session
};

// Fixed ordered space of category ids for one-hot encodings. Built from the
// cohort category map; apps missing from the map fall into "unknown".
struct CategorySpace {
    std::vector<std::string> categories; // sorted, always contains "unknown"
    std::unordered_map<std::string, int> index;
    int unknown_index = 0;

    static CategorySpace from_map(const std::map<std::string, std::string>& category_map);
    int category_of(const std::map<std::string, std::string>& category_map,
                    const std::string& app) const;
    std::size_t size() const { return categories.size(); }
};

// Mean of the in-vocab app embeddings, with multiplicity. Out-of-vocab apps
// are skipped and counted; a session with no in-vocab apps yields nullopt
// ("dropped"). Accumulation runs in vocab-index order, so the result is
// bit-identical under any reordering of the session's apps.
std::optional<std::vector<float>> session_vector_mean(const Session& session,
                                                      const EmbeddingModel& model,
                                                      int* skipped_apps = nullptr,
                                                      const ReprOptions& opts = {});

// Mean of one-hot app indicators over the vocab: the within-session relative
// frequency histogram. Out-of-vocab apps are skipped like in the embedding
// path; all-unknown sessions yield nullopt.
std::optional<std::vector<double>> session_vector_onehot(const Session& session,
                                                         const Vocab& vocab,
                                                         int* skipped_apps = nullptr,
                                                         const ReprOptions& opts = {});

// Mean of one-hot category indicators; unmapped apps land in "unknown", so
// sessions are never dropped.
std::vector<double> session_vector_onehot_category(
    const Session& session, const CategorySpace& space,
    const std::map<std::string, std::string>& category_map, const ReprOptions& opts = {});

} // namespace appsess
