#include "appsess/kmeans.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "appsess/error.hpp"
#include "appsess/rng.hpp"

namespace appsess {

namespace {

double sq_dist(const double* a, const float* b, int dim) {
    double s = 0.0;
    for (int d = 0; d < dim; ++d) {
        const double diff = a[d] - static_cast<double>(b[d]);
        s += diff * diff;
    }
    return s;
}

struct RunResult {
    std::vector<double> centroids;
    double inertia = std::numeric_limits<double>::infinity();
    std::vector<double> trace;
};

RunResult lloyd_run(std::span<const float> points, std::size_t n, int dim, int k,
                    int max_iters, double tol, std::uint64_t seed) {
    Rng rng(seed);
    const auto row = [&](std::size_t i) { return points.data() + i * dim; };

    // kmeans++ seeding.
    std::vector<double> centroids(static_cast<std::size_t>(k) * dim);
    std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
    {
        const std::size_t first = rng.uniform_int(n);
        for (int d = 0; d < dim; ++d) centroids[d] = row(first)[d];
        for (int c = 1; c < k; ++c) {
            const double* prev = centroids.data() + static_cast<std::size_t>(c - 1) * dim;
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                min_d2[i] = std::min(min_d2[i], sq_dist(prev, row(i), dim));
                total += min_d2[i];
            }
            std::size_t pick;
            if (total <= 0.0) {
                pick = rng.uniform_int(n); // all points coincide with a centroid
            } else {
                const double u = rng.uniform01() * total;
                double acc = 0.0;
                pick = n - 1;
                for (std::size_t i = 0; i < n; ++i) {
                    acc += min_d2[i];
                    if (acc > u) {
                        pick = i;
                        break;
                    }
                }
            }
            double* dst = centroids.data() + static_cast<std::size_t>(c) * dim;
            for (int d = 0; d < dim; ++d) dst[d] = row(pick)[d];
        }
    }

    std::vector<int> assign(n, 0);
    std::vector<double> dist_to_own(n, 0.0);
    std::vector<std::int64_t> sizes(k, 0);
    std::vector<double> sums(static_cast<std::size_t>(k) * dim, 0.0);
    RunResult res;
    double prev_inertia = std::numeric_limits<double>::infinity();

    for (int iter = 0; iter < max_iters; ++iter) {
        // Assignment step; ties go to the lowest index.
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = sq_dist(centroids.data(), row(i), dim);
            for (int c = 1; c < k; ++c) {
                const double d2 =
                    sq_dist(centroids.data() + static_cast<std::size_t>(c) * dim, row(i), dim);
                if (d2 < best_d) {
                    best_d = d2;
                    best = c;
                }
            }
            assign[i] = best;
            dist_to_own[i] = best_d;
            inertia += best_d;
        }
        res.trace.push_back(inertia);

        // Update step.
        std::fill(sizes.begin(), sizes.end(), 0);
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            ++sizes[assign[i]];
            double* dst = sums.data() + static_cast<std::size_t>(assign[i]) * dim;
            const float* p = row(i);
            for (int d = 0; d < dim; ++d) dst[d] += p[d];
        }
        for (int c = 0; c < k; ++c) {
            double* dst = centroids.data() + static_cast<std::size_t>(c) * dim;
            if (sizes[c] > 0) {
                const double inv = 1.0 / static_cast<double>(sizes[c]);
                const double* src = sums.data() + static_cast<std::size_t>(c) * dim;
                for (int d = 0; d < dim; ++d) dst[d] = src[d] * inv;
            } else {
                // Reseed an empty cluster at the point farthest from its centroid.
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (dist_to_own[i] > far_d) {
                        far_d = dist_to_own[i];
                        far = i;
                    }
                }
                const float* p = row(far);
                for (int d = 0; d < dim; ++d) dst[d] = p[d];
                dist_to_own[far] = -1.0; // a second empty cluster must pick elsewhere
            }
        }

        if (prev_inertia < std::numeric_limits<double>::infinity()) {
            const double denom = prev_inertia > 0.0 ? prev_inertia : 1.0;
            if ((prev_inertia - inertia) / denom < tol) {
                prev_inertia = inertia;
                break;
            }
        }
        prev_inertia = inertia;
    }

    // Final inertia under the final centroids.
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double best_d = sq_dist(centroids.data(), row(i), dim);
        for (int c = 1; c < k; ++c)
            best_d = std::min(
                best_d, sq_dist(centroids.data() + static_cast<std::size_t>(c) * dim, row(i), dim));
        inertia += best_d;
    }
    res.centroids = std::move(centroids);
    res.inertia = inertia;
    return res;
}

} // namespace

SessionTypeModel kmeans_fit(std::span<const float> points, int dim, const KMeansConfig& config) {
    if (dim <= 0) throw ValidationError("kmeans_fit: dim must be > 0");
    if (config.k < 1) throw ValidationError("kmeans_fit: k must be >= 1");
    if (points.size() % static_cast<std::size_t>(dim) != 0)
        throw ValidationError("kmeans_fit: point buffer size not a multiple of dim");
    const std::size_t n = points.size() / static_cast<std::size_t>(dim);
    if (n < static_cast<std::size_t>(config.k))
        throw ValidationError("kmeans_fit: fewer points than clusters");
    for (float x : points)
        if (!std::isfinite(x)) throw ValidationError("kmeans_fit: non-finite input");

    SessionTypeModel model;
    model.config = config;
    model.k = config.k;
    model.dim = dim;

    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < std::max(1, config.restarts); ++r) {
        auto run = lloyd_run(points, n, dim, config.k, config.max_iters, config.tol,
                             derive_seed(config.seed, "kmeans_restart", static_cast<std::uint64_t>(r)));
        model.inertia_trace.push_back(std::move(run.trace));
        if (run.inertia < best) {
            best = run.inertia;
            model.centroids = std::move(run.centroids);
            model.inertia = run.inertia;
        }
    }
    return model;
}

int assign_type(const SessionTypeModel& model, std::span<const float> v) {
    if (static_cast<int>(v.size()) != model.dim)
        throw ValidationError("assign_type: dimension mismatch");
    int best = 0;
    double best_d = sq_dist(model.centroid(0), v.data(), model.dim);
    for (int c = 1; c < model.k; ++c) {
        const double d2 = sq_dist(model.centroid(c), v.data(), model.dim);
        if (d2 < best_d) {
            best_d = d2;
            best = c;
        }
    }
    return best;
}

std::string nearest_app_to_centroid(const SessionTypeModel& model,
                                    const EmbeddingModel& embedding, int type_id) {
    if (embedding.vocab.size() == 0)
        throw ValidationError("nearest_app_to_centroid: empty vocabulary");
    if (embedding.config.dim != model.dim)
        throw ValidationError("nearest_app_to_centroid: dimension mismatch");
    if (type_id < 0 || type_id >= model.k)
        throw ValidationError("nearest_app_to_centroid: type_id out of range");

    const double* c = model.centroid(type_id);
    int best = 0;
    double best_d = sq_dist(c, embedding.row(0), model.dim);
    for (int i = 1; i < static_cast<int>(embedding.vocab.size()); ++i) {
        const double d2 = sq_dist(c, embedding.row(i), model.dim);
        if (d2 < best_d ||
            (d2 == best_d && embedding.vocab.apps[i] < embedding.vocab.apps[best])) {
            best_d = d2;
            best = i;
        }
    }
    return embedding.vocab.apps[best];
}

void save_session_types(const SessionTypeModel& model, const std::string& path) {
    static_assert(std::endian::native == std::endian::little);
    nlohmann::ordered_json h;
    h["kind"] = "session_types";
    h["k"] = model.k;
    h["dim"] = model.dim;
    h["restarts"] = model.config.restarts;
    h["max_iters"] = model.config.max_iters;
    h["tol"] = model.config.tol;
    h["seed"] = model.config.seed;
    h["inertia"] = model.inertia;
    const std::string header = h.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open model file for writing: " + path);
    const std::uint64_t len = header.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    std::vector<float> floats(model.centroids.begin(), model.centroids.end());
    out.write(reinterpret_cast<const char*>(floats.data()),
              static_cast<std::streamsize>(floats.size() * sizeof(float)));
}

SessionTypeModel load_session_types(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open model file: " + path);
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!in || len > (1ull << 30)) throw ValidationError("corrupt model header: " + path);
    std::string header(len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(len));
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("corrupt model header in " + path + ": " + e.what());
    }
    if (h.value("kind", "") != "session_types")
        throw ValidationError("not a session type model file: " + path);

    SessionTypeModel m;
    m.k = h.at("k").get<int>();
    m.dim = h.at("dim").get<int>();
    m.config.k = m.k;
    m.config.restarts = h.at("restarts").get<int>();
    m.config.max_iters = h.at("max_iters").get<int>();
    m.config.tol = h.at("tol").get<double>();
    m.config.seed = h.at("seed").get<std::uint64_t>();
    m.inertia = h.at("inertia").get<double>();

    std::vector<char> rest((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (rest.size() != static_cast<std::size_t>(m.k) * m.dim * sizeof(float))
        throw ValidationError("model matrix size does not match header: " + path);
    std::vector<float> floats(rest.size() / sizeof(float));
    std::memcpy(floats.data(), rest.data(), rest.size());
    m.centroids.assign(floats.begin(), floats.end());
    return m;
}

} // namespace appsess
