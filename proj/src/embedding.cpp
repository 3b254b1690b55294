#include "appsess/embedding.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "appsess/error.hpp"
#include "appsess/rng.hpp"

namespace appsess {

Vocab build_vocab(const std::vector<std::vector<std::string>>& corpora, int min_count) {
    if (min_count < 1) throw ValidationError("build_vocab: min_count must be >= 1");

    Vocab raw;
    for (const auto& sentence : corpora) {
        for (const auto& app : sentence) {
            auto [it, inserted] = raw.index.emplace(app, static_cast<int>(raw.apps.size()));
            if (inserted) {
                raw.apps.push_back(app);
                raw.counts.push_back(0);
            }
            ++raw.counts[it->second];
        }
    }

    Vocab vocab;
    for (std::size_t i = 0; i < raw.apps.size(); ++i) {
        if (raw.counts[i] >= min_count) {
            vocab.index.emplace(raw.apps[i], static_cast<int>(vocab.apps.size()));
            vocab.apps.push_back(raw.apps[i]);
            vocab.counts.push_back(raw.counts[i]);
        }
    }
    if (vocab.apps.empty()) throw ValidationError("build_vocab: empty vocabulary");
    return vocab;
}

namespace {

double stable_log_sigmoid(double z) {
    // log(sigmoid(z)) without overflow.
    return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

} // namespace

EmbeddingModel train_cbow(const std::vector<std::vector<std::string>>& corpora,
                          const EmbeddingConfig& config) {
    if (config.dim <= 0) throw ValidationError("train_cbow: dim must be > 0");
    if (config.window <= 0) throw ValidationError("train_cbow: window must be > 0");
    if (config.epochs <= 0) throw ValidationError("train_cbow: epochs must be > 0");
    if (config.negatives < 0) throw ValidationError("train_cbow: negatives must be >= 0");

    EmbeddingModel model;
    model.config = config;
    model.vocab = build_vocab(corpora, config.min_count);
    const int V = static_cast<int>(model.vocab.size());
    const int D = config.dim;

    // Sentences reduced to in-vocab indices; out-of-vocab tokens are removed
    // before windowing, as in word2vec.
    std::vector<std::vector<int>> sentences;
    std::int64_t total_tokens = 0;
    for (const auto& sentence : corpora) {
        std::vector<int> ids;
        ids.reserve(sentence.size());
        for (const auto& app : sentence) {
            const int id = model.vocab.find(app);
            if (id >= 0) ids.push_back(id);
        }
        total_tokens += static_cast<std::int64_t>(ids.size());
        if (!ids.empty()) sentences.push_back(std::move(ids));
    }

    Rng rng(derive_seed(config.seed, "cbow"));

    model.vectors.resize(static_cast<std::size_t>(V) * D);
    for (auto& x : model.vectors)
        x = static_cast<float>(rng.uniform(-0.5 / D, 0.5 / D));
    std::vector<float> output(static_cast<std::size_t>(V) * D, 0.0f);

    // Negative sampling from the unigram^0.75 distribution.
    std::vector<double> cumweights(V);
    double acc = 0.0;
    for (int i = 0; i < V; ++i) {
        acc += std::pow(static_cast<double>(model.vocab.counts[i]), 0.75);
        cumweights[i] = acc;
    }

    const std::int64_t total_updates =
        std::max<std::int64_t>(1, static_cast<std::int64_t>(config.epochs) * total_tokens);
    std::int64_t update = 0;

    std::vector<double> hidden(D), hidden_grad(D);
    model.epoch_mean_loss.assign(config.epochs, 0.0);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        double loss_sum = 0.0;
        std::int64_t loss_n = 0;
        for (const auto& sentence : sentences) {
            const int n = static_cast<int>(sentence.size());
            for (int t = 0; t < n; ++t) {
                const double progress =
                    static_cast<double>(update) / static_cast<double>(total_updates);
                const double lr =
                    config.lr_start + (config.lr_end - config.lr_start) * progress;
                ++update;

                const int lo = std::max(0, t - config.window);
                const int hi = std::min(n - 1, t + config.window);
                const int n_ctx = hi - lo; // neighbors excluding the center
                if (n_ctx == 0) continue;

                std::fill(hidden.begin(), hidden.end(), 0.0);
                for (int c = lo; c <= hi; ++c) {
                    if (c == t) continue;
                    const float* v = model.row(sentence[c]);
                    for (int d = 0; d < D; ++d) hidden[d] += v[d];
                }
                const double inv_ctx = 1.0 / n_ctx;
                for (int d = 0; d < D; ++d) hidden[d] *= inv_ctx;

                std::fill(hidden_grad.begin(), hidden_grad.end(), 0.0);
                const int center = sentence[t];

                // Center word as positive, then sampled negatives.
                for (int s = 0; s <= config.negatives; ++s) {
                    int target;
                    double y;
                    if (s == 0) {
                        target = center;
                        y = 1.0;
                    } else {
                        target = static_cast<int>(rng.pick_cumulative(cumweights));
                        if (target == center) continue;
                        y = 0.0;
                    }
                    float* out = output.data() + static_cast<std::size_t>(target) * D;
                    double z = 0.0;
                    for (int d = 0; d < D; ++d) z += hidden[d] * out[d];
                    const double sig = 1.0 / (1.0 + std::exp(-z));
                    loss_sum += -(y > 0.5 ? stable_log_sigmoid(z) : stable_log_sigmoid(-z));
                    const double g = lr * (y - sig);
                    for (int d = 0; d < D; ++d) {
                        hidden_grad[d] += g * out[d];
                        out[d] += static_cast<float>(g * hidden[d]);
                    }
                }
                ++loss_n;

                // The hidden layer is a mean, so each context vector gets
                // 1/n_ctx of the accumulated gradient.
                for (int c = lo; c <= hi; ++c) {
                    if (c == t) continue;
                    float* v = model.vectors.data() +
                               static_cast<std::size_t>(sentence[c]) * D;
                    for (int d = 0; d < D; ++d)
                        v[d] += static_cast<float>(hidden_grad[d] * inv_ctx);
                }
            }
        }
        model.epoch_mean_loss[epoch] = loss_n > 0 ? loss_sum / static_cast<double>(loss_n) : 0.0;
    }

    for (float x : model.vectors)
        if (!std::isfinite(x)) throw std::runtime_error("train_cbow: non-finite embedding");
    return model;
}

std::vector<std::size_t> embedding_permutation(std::size_t n, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "permute_embeddings"));
    return rng.permutation(n);
}

EmbeddingModel permute_embeddings(const EmbeddingModel& model, std::uint64_t seed) {
    const auto perm = embedding_permutation(model.vocab.size(), seed);
    EmbeddingModel out = model;
    const int D = model.config.dim;
    for (std::size_t i = 0; i < perm.size(); ++i) {
        std::memcpy(out.vectors.data() + i * D, model.vectors.data() + perm[i] * D,
                    sizeof(float) * static_cast<std::size_t>(D));
    }
    return out;
}

namespace {

nlohmann::ordered_json embedding_header(const EmbeddingModel& m) {
    nlohmann::ordered_json h;
    h["kind"] = "embedding";
    h["dim"] = m.config.dim;
    h["window"] = m.config.window;
    h["epochs"] = m.config.epochs;
    h["negatives"] = m.config.negatives;
    h["lr_start"] = m.config.lr_start;
    h["lr_end"] = m.config.lr_end;
    h["min_count"] = m.config.min_count;
    h["seed"] = m.config.seed;
    h["apps"] = m.vocab.apps;
    h["counts"] = m.vocab.counts;
    return h;
}

void write_header_and_matrix(std::ofstream& out, const std::string& header,
                             const float* data, std::size_t count) {
    static_assert(std::endian::native == std::endian::little,
                  "matrix serialization assumes a little-endian host");
    const std::uint64_t len = header.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(data),
              static_cast<std::streamsize>(count * sizeof(float)));
}

std::pair<nlohmann::json, std::vector<float>> read_header_and_matrix(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open model file: " + path);
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!in || len > (1ull << 30)) throw ValidationError("corrupt model header: " + path);
    std::string header(len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(len));
    if (!in) throw ValidationError("corrupt model header: " + path);
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("corrupt model header in " + path + ": " + e.what());
    }
    std::vector<float> data;
    std::vector<char> rest((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (rest.size() % sizeof(float) != 0)
        throw ValidationError("corrupt model matrix: " + path);
    data.resize(rest.size() / sizeof(float));
    std::memcpy(data.data(), rest.data(), rest.size());
    return {std::move(h), std::move(data)};
}

} // namespace

void save_embedding(const EmbeddingModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open model file for writing: " + path);
    write_header_and_matrix(out, embedding_header(model).dump(), model.vectors.data(),
                            model.vectors.size());
}

EmbeddingModel load_embedding(const std::string& path) {
    auto [h, data] = read_header_and_matrix(path);
    if (h.value("kind", "") != "embedding")
        throw ValidationError("not an embedding model file: " + path);
    EmbeddingModel m;
    m.config.dim = h.at("dim").get<int>();
    m.config.window = h.at("window").get<int>();
    m.config.epochs = h.at("epochs").get<int>();
    m.config.negatives = h.at("negatives").get<int>();
    m.config.lr_start = h.at("lr_start").get<double>();
    m.config.lr_end = h.at("lr_end").get<double>();
    m.config.min_count = h.at("min_count").get<int>();
    m.config.seed = h.at("seed").get<std::uint64_t>();
    m.vocab.apps = h.at("apps").get<std::vector<std::string>>();
    m.vocab.counts = h.at("counts").get<std::vector<std::int64_t>>();
    for (std::size_t i = 0; i < m.vocab.apps.size(); ++i)
        m.vocab.index.emplace(m.vocab.apps[i], static_cast<int>(i));
    if (data.size() != m.vocab.size() * static_cast<std::size_t>(m.config.dim))
        throw ValidationError("model matrix size does not match header: " + path);
    m.vectors = std::move(data);
    return m;
}

} // namespace appsess
