#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace appsess {

struct Vocab {
    std::vector<std::string> apps;               // first-seen order
    std::vector<std::int64_t> counts;            // parallel to apps
    std::unordered_map<std::string, int> index;  // app_id -> row

    int find(const std::string& app) const {
        auto it = index.find(app);
        return it == index.end() ? -1 : it->second;
    }
    std::size_t size() const { return apps.size(); }
};

// Apps with total count < min_count are excluded; remaining apps keep
// first-seen order. Throws if nothing survives.
Vocab build_vocab(const std::vector<std::vector<std::string>>& corpora, int min_count);

struct EmbeddingConfig {
    int dim = 50;
    int window = 3;
    int epochs = 15;
    int negatives = 5;
    double lr_start = 0.025;
    double lr_end = 0.0001;
    int min_count = 1;
    std::uint64_t seed = 1;
};

struct EmbeddingModel {
    Vocab vocab;
    EmbeddingConfig config;
    std::vector<float> vectors; // |V| x dim, row-major

    // Mean training loss per epoch (positive + negative terms, measured
    // before each update). Diagnostic only, not persisted.
    std::vector<double> epoch_mean_loss;

    const float* row(int i) const { return vectors.data() + static_cast<std::size_t>(i) * config.dim; }

    // nullptr for out-of-vocab apps; callers decide how to treat unknowns.
    const float* lookup(const std::string& app) const {
        const int i = vocab.find(app);
        return i < 0 ? nullptr : row(i);
    }
};

// CBOW with negative sampling: each in-vocab token is predicted from the
// mean of the input vectors of up to `window` in-vocab neighbors on each
// side. Binary logistic loss against `negatives` draws from the
// unigram^0.75 distribution; plain SGD with the learning rate decayed
// linearly from lr_start to lr_end over epochs * tokens updates. Input
// vectors start uniform in [-0.5/dim, 0.5/dim], output vectors at zero.
// Single-threaded and fully deterministic given the seed.
EmbeddingModel train_cbow(const std::vector<std::vector<std::string>>& corpora,
                          const EmbeddingConfig& config);

// Rows reassigned by a uniform random permutation of [0, |V|); the vocab
// order is unchanged and the multiset of rows is preserved.
EmbeddingModel permute_embeddings(const EmbeddingModel& model, std::uint64_t seed);

// Same permutation the above applies for this seed and size, for replay checks.
std::vector<std::size_t> embedding_permutation(std::size_t n, std::uint64_t seed);

// Two-part container: length-prefixed JSON header (config + vocab) followed
// by the raw little-endian float32 matrix. The loader validates dimensions.
void save_embedding(const EmbeddingModel& model, const std::string& path);
EmbeddingModel load_embedding(const std::string& path);

} // namespace appsess
