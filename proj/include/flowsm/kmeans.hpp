#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace flowsm {

struct ClusteringResult {
  std::vector<std::vector<double>> centroids;  // k vectors of dimension d
  std::vector<int> assignments;                // point index -> cluster id in [0,k)
  double inertia = 0.0;                        // sum of squared distances to assigned centroids
  int iterations = 0;                          // Lloyd iterations of the winning run
  std::vector<double> inertia_history;         // per-iteration inertia of the winning run
};

/// Lloyd's algorithm with k-means++ seeding from a pinned SplitMix64 stream.
/// Runs `n_init` independent seeded inits and keeps the lowest-inertia result
/// (earliest run wins ties), mirroring the common scikit-learn behaviour.
/// Ties in point-to-centroid distance go to the lowest cluster id; a cluster
/// emptied during assignment is reseeded with the point farthest from its
/// assigned centroid. Deterministic for fixed (points, k, seed).
/// Throws std::invalid_argument when n < k, k < 1, or inputs are non-finite.
ClusteringResult kmeans_fit(const std::vector<std::vector<double>>& points, int k,
                            std::uint64_t seed, int max_iter = 300, double tol = 1e-6,
                            int n_init = 10);

/// Index of the closest centroid (Euclidean); ties resolve to the lowest id.
/// Throws std::invalid_argument on dimension mismatch or empty centroid list.
int nearest_centroid(std::span<const double> point,
                     const std::vector<std::vector<double>>& centroids);

double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace flowsm
