#include "flowsm/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "flowsm/rng.hpp"

namespace flowsm {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double diff = a[i] - b[i];
    d += diff * diff;
  }
  return d;
}

int nearest_centroid(std::span<const double> point,
                     const std::vector<std::vector<double>>& centroids) {
  if (centroids.empty()) throw std::invalid_argument("nearest_centroid: no centroids");
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    if (centroids[c].size() != point.size()) {
      throw std::invalid_argument("nearest_centroid: dimension mismatch");
    }
    double d = squared_distance(point, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

namespace {

using Points = std::vector<std::vector<double>>;

std::vector<std::vector<double>> kmeanspp_init(const Points& points, int k, SplitMix64& rng) {
  const std::size_t n = points.size();
  std::vector<std::vector<double>> centroids;
  centroids.reserve(static_cast<std::size_t>(k));
  centroids.push_back(points[rng.next_below(n)]);

  std::vector<double> d2(n);
  for (int j = 1; j < k; ++j) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centroids) best = std::min(best, squared_distance(points[i], c));
      d2[i] = best;
      total += best;
    }
    if (total <= 0.0) {
      // all remaining points coincide with chosen centroids; duplicate one
      centroids.push_back(points[rng.next_below(n)]);
      continue;
    }
    double r = rng.next_double() * total;
    double cum = 0.0;
    std::size_t pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      cum += d2[i];
      if (cum > r && d2[i] > 0.0) {
        pick = i;
        break;
      }
    }
    centroids.push_back(points[pick]);
  }
  return centroids;
}

// Ties go to the lowest cluster id.
void assign_points(const Points& points, const std::vector<std::vector<double>>& centroids,
                   std::vector<int>& assignments) {
  for (std::size_t i = 0; i < points.size(); ++i) {
    assignments[i] = nearest_centroid(points[i], centroids);
  }
}

// Reseeds every empty cluster with the point farthest from its assigned
// centroid (lowest point index on ties); the point is moved to the empty
// cluster. Clusters are processed in ascending id; a stolen point is never
// taken from a singleton cluster.
void fix_empty_clusters(const Points& points, std::vector<std::vector<double>>& centroids,
                        std::vector<int>& assignments) {
  const int k = static_cast<int>(centroids.size());
  std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
  for (int a : assignments) ++sizes[static_cast<std::size_t>(a)];

  for (int c = 0; c < k; ++c) {
    if (sizes[static_cast<std::size_t>(c)] > 0) continue;
    double best_d = -1.0;
    std::size_t best_i = points.size();
    for (std::size_t i = 0; i < points.size(); ++i) {
      int a = assignments[i];
      if (sizes[static_cast<std::size_t>(a)] <= 1) continue;
      double d = squared_distance(points[i], centroids[static_cast<std::size_t>(a)]);
      if (d > best_d) {
        best_d = d;
        best_i = i;
      }
    }
    if (best_i == points.size()) continue;  // only singletons left; give up on this cluster
    --sizes[static_cast<std::size_t>(assignments[best_i])];
    centroids[static_cast<std::size_t>(c)] = points[best_i];
    assignments[best_i] = c;
    ++sizes[static_cast<std::size_t>(c)];
  }
}

double compute_inertia(const Points& points, const std::vector<std::vector<double>>& centroids,
                       const std::vector<int>& assignments) {
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    total += squared_distance(points[i], centroids[static_cast<std::size_t>(assignments[i])]);
  }
  return total;
}

ClusteringResult lloyd_run(const Points& points, int k, SplitMix64& rng, int max_iter,
                           double tol) {
  const std::size_t n = points.size();
  const std::size_t d = points[0].size();

  ClusteringResult res;
  res.centroids = kmeanspp_init(points, k, rng);
  res.assignments.assign(n, 0);

  for (int it = 0; it < max_iter; ++it) {
    assign_points(points, res.centroids, res.assignments);
    fix_empty_clusters(points, res.centroids, res.assignments);

    std::vector<std::vector<double>> means(static_cast<std::size_t>(k),
                                           std::vector<double>(d, 0.0));
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto c = static_cast<std::size_t>(res.assignments[i]);
      ++sizes[c];
      for (std::size_t j = 0; j < d; ++j) means[c][j] += points[i][j];
    }
    double movement = 0.0;
    for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
      if (sizes[c] == 0) {
        means[c] = res.centroids[c];  // unreachable after fix-up; keep in place
        continue;
      }
      for (std::size_t j = 0; j < d; ++j) means[c][j] /= static_cast<double>(sizes[c]);
      movement = std::max(movement, std::sqrt(squared_distance(means[c], res.centroids[c])));
    }
    res.centroids = std::move(means);
    res.iterations = it + 1;
    res.inertia_history.push_back(compute_inertia(points, res.centroids, res.assignments));
    if (movement < tol) break;
  }

  // Land on a fixed point: the returned assignment must be the nearest-centroid
  // assignment under the returned centroids, with no empty cluster.
  for (int guard = 0; guard <= k; ++guard) {
    assign_points(points, res.centroids, res.assignments);
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (int a : res.assignments) ++sizes[static_cast<std::size_t>(a)];
    if (std::find(sizes.begin(), sizes.end(), std::size_t{0}) == sizes.end()) break;
    fix_empty_clusters(points, res.centroids, res.assignments);
  }
  res.inertia = compute_inertia(points, res.centroids, res.assignments);
  res.inertia_history.push_back(res.inertia);
  return res;
}

}  // namespace

ClusteringResult kmeans_fit(const std::vector<std::vector<double>>& points, int k,
                            std::uint64_t seed, int max_iter, double tol, int n_init) {
  if (k < 1) throw std::invalid_argument("kmeans_fit: k must be >= 1");
  if (points.size() < static_cast<std::size_t>(k)) {
    throw std::invalid_argument("kmeans_fit: fewer points than clusters");
  }
  if (n_init < 1) throw std::invalid_argument("kmeans_fit: n_init must be >= 1");
  const std::size_t d = points[0].size();
  if (d == 0) throw std::invalid_argument("kmeans_fit: zero-dimensional points");
  for (const auto& p : points) {
    if (p.size() != d) throw std::invalid_argument("kmeans_fit: ragged point matrix");
    for (double x : p) {
      if (!std::isfinite(x)) throw std::invalid_argument("kmeans_fit: non-finite input");
    }
  }

  SplitMix64 rng(seed);
  ClusteringResult best;
  bool have_best = false;
  for (int run = 0; run < n_init; ++run) {
    ClusteringResult r = lloyd_run(points, k, rng, max_iter, tol);
    if (!have_best || r.inertia < best.inertia) {
      best = std::move(r);
      have_best = true;
    }
  }
  return best;
}

}  // namespace flowsm
