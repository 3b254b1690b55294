#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "appsess/embedding.hpp"

namespace appsess {

struct KMeansConfig {
    int k = 8;
    int restarts = 10;
    int max_iters = 300;
    double tol = 1e-6; // relative inertia improvement below this stops Lloyd
    std::uint64_t seed = 1;
};

struct SessionTypeModel {
    KMeansConfig config;
    int k = 0;
    int dim = 0;
    std::vector<double> centroids; // k x dim, row-major
    double inertia = 0.0;

    // Inertia after each Lloyd iteration, per restart. Diagnostic only.
    std::vector<std::vector<double>> inertia_trace;

    const double* centroid(int i) const {
        return centroids.data() + static_cast<std::size_t>(i) * dim;
    }
};

// Lloyd's algorithm with kmeans++ seeding. Runs `restarts` independent
// seeded runs and keeps the lowest inertia. A cluster that empties during
// iteration is reseeded to the point farthest from its assigned centroid.
// points is n x dim row-major; requires n >= k >= 1 and finite input.
SessionTypeModel kmeans_fit(std::span<const float> points, int dim, const KMeansConfig& config);

// Index of the nearest centroid in Euclidean distance, ties toward the
// lowest index.
int assign_type(const SessionTypeModel& model, std::span<const float> v);

// In-vocab app whose embedding is closest to the centroid; ties toward the
// lexicographically smallest app_id.
std::string nearest_app_to_centroid(const SessionTypeModel& model,
                                    const EmbeddingModel& embedding, int type_id);

void save_session_types(const SessionTypeModel& model, const std::string& path);
SessionTypeModel load_session_types(const std::string& path);

} // namespace appsess
