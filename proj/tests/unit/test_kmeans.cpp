#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "flowsm/kmeans.hpp"
#include "flowsm/rng.hpp"

using namespace flowsm;

namespace {

// Brute-force oracle: enumerate every assignment of n points to k clusters
// and return the lowest total within-cluster sum of squares.
double optimal_inertia(const std::vector<std::vector<double>>& points, int k) {
  const std::size_t n = points.size();
  const std::size_t d = points[0].size();
  std::vector<int> assign(n, 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    std::vector<std::vector<double>> sums(static_cast<std::size_t>(k), std::vector<double>(d, 0.0));
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[static_cast<std::size_t>(assign[i])];
      for (std::size_t j = 0; j < d; ++j) sums[static_cast<std::size_t>(assign[i])][j] += points[i][j];
    }
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      int c = assign[i];
      if (counts[static_cast<std::size_t>(c)] == 0) continue;
      for (std::size_t j = 0; j < d; ++j) {
        double mean = sums[static_cast<std::size_t>(c)][j] / counts[static_cast<std::size_t>(c)];
        double diff = points[i][j] - mean;
        inertia += diff * diff;
      }
    }
    best = std::min(best, inertia);
    // next assignment in base-k counting order
    std::size_t pos = 0;
    while (pos < n && ++assign[pos] == k) {
      assign[pos] = 0;
      ++pos;
    }
    if (pos == n) break;
  }
  return best;
}

}  // namespace

TEST_CASE("two separated points with k=2 become their own centroids") {
  std::vector<std::vector<double>> pts = {{0, 0}, {10, 10}};
  ClusteringResult r = kmeans_fit(pts, 2, 7);
  CHECK(r.inertia == doctest::Approx(0.0));
  CHECK(r.assignments[0] != r.assignments[1]);
  for (const auto& c : r.centroids) {
    CHECK(((c == std::vector<double>{0, 0}) || (c == std::vector<double>{10, 10})));
  }
}

TEST_CASE("k=1 gives the coordinate-wise mean") {
  std::vector<std::vector<double>> pts = {{1, 2}, {3, 4}, {5, 0}};
  ClusteringResult r = kmeans_fit(pts, 1, 3);
  CHECK(r.centroids[0][0] == doctest::Approx(3.0));
  CHECK(r.centroids[0][1] == doctest::Approx(2.0));
  for (int a : r.assignments) CHECK(a == 0);
}

TEST_CASE("two unit squares 100 apart split exactly, inertia 4.0") {
  std::vector<std::vector<double>> pts;
  for (double dx : {0.0, 100.0}) {
    pts.push_back({0 + dx, 0 + dx});
    pts.push_back({0 + dx, 1 + dx});
    pts.push_back({1 + dx, 0 + dx});
    pts.push_back({1 + dx, 1 + dx});
  }
  ClusteringResult r = kmeans_fit(pts, 2, 99);
  CHECK(r.inertia == doctest::Approx(4.0));  // 2 * (4 * 0.5)
  CHECK(r.inertia == doctest::Approx(optimal_inertia(pts, 2)));
  // the two quads are pure clusters
  for (int i = 0; i < 4; ++i) {
    CHECK(r.assignments[static_cast<std::size_t>(i)] == r.assignments[0]);
    CHECK(r.assignments[static_cast<std::size_t>(i + 4)] == r.assignments[4]);
  }
  CHECK(r.assignments[0] != r.assignments[4]);
}

TEST_CASE("nearest_centroid tie-breaking and errors") {
  std::vector<std::vector<double>> cs = {{1, 0}, {0, 2}, {5, 5}, {0, 0}};
  std::vector<double> at_c3 = {0, 0};
  CHECK(nearest_centroid(at_c3, cs) == 3);

  std::vector<std::vector<double>> sym = {{1, 0}, {-1, 0}};
  std::vector<double> equidistant = {0, 0};
  CHECK(nearest_centroid(equidistant, sym) == 0);  // tie -> lowest id

  std::vector<double> origin = {0, 0};
  std::vector<std::vector<double>> two = {{1, 0}, {0, 2}};
  CHECK(nearest_centroid(origin, two) == 0);  // 1 < 2

  std::vector<double> wrong_dim = {1, 2, 3};
  CHECK_THROWS_AS(nearest_centroid(wrong_dim, cs), std::invalid_argument);
  CHECK_THROWS_AS(nearest_centroid(origin, {}), std::invalid_argument);
}

TEST_CASE("kmeans_fit input validation") {
  std::vector<std::vector<double>> pts = {{0, 0}, {1, 1}};
  CHECK_THROWS_AS(kmeans_fit(pts, 3, 1), std::invalid_argument);  // n < k
  CHECK_THROWS_AS(kmeans_fit(pts, 0, 1), std::invalid_argument);
  std::vector<std::vector<double>> bad = {{0, 0}, {std::nan(""), 1}};
  CHECK_THROWS_AS(kmeans_fit(bad, 1, 1), std::invalid_argument);
  std::vector<std::vector<double>> inf_pt = {{0, 0}, {std::numeric_limits<double>::infinity(), 1}};
  CHECK_THROWS_AS(kmeans_fit(inf_pt, 1, 1), std::invalid_argument);
}

TEST_CASE("identical inputs and seed are bit-deterministic") {
  SplitMix64 gen(123);
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 40; ++i) pts.push_back({gen.next_double() * 10, gen.next_double() * 10});
  ClusteringResult a = kmeans_fit(pts, 4, 77);
  ClusteringResult b = kmeans_fit(pts, 4, 77);
  CHECK(a.centroids == b.centroids);
  CHECK(a.assignments == b.assignments);
  CHECK(a.inertia == b.inertia);
  CHECK(a.inertia_history == b.inertia_history);

  ClusteringResult c = kmeans_fit(pts, 4, 78);
  // different seed may legitimately converge elsewhere; determinism only
  // binds equal seeds, so just confirm the call ran
  CHECK(c.centroids.size() == 4);
}

TEST_CASE("final assignment is a fixed point of the returned centroids") {
  SplitMix64 gen(5);
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 30; ++i) {
    pts.push_back({gen.next_double() * 4, gen.next_double() * 4, gen.next_double() * 4});
  }
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    ClusteringResult r = kmeans_fit(pts, 5, seed);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      CHECK(nearest_centroid(pts[i], r.centroids) == r.assignments[i]);
    }
    // no empty cluster
    std::vector<int> sizes(5, 0);
    for (int a : r.assignments) ++sizes[static_cast<std::size_t>(a)];
    for (int s : sizes) CHECK(s > 0);
  }
}

TEST_CASE("per-iteration inertia is non-increasing") {
  SplitMix64 gen(9);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> pts;
    int n = 8 + static_cast<int>(gen.next_below(20));
    for (int i = 0; i < n; ++i) pts.push_back({gen.next_double(), gen.next_double()});
    ClusteringResult r = kmeans_fit(pts, 3, gen.next(), 300, 1e-6, 1);
    for (std::size_t i = 1; i < r.inertia_history.size(); ++i) {
      CHECK(r.inertia_history[i] <= r.inertia_history[i - 1]);
    }
  }
}

TEST_CASE("small instances reach the brute-force optimum") {
  SplitMix64 gen(2024);
  int hits = 0;
  const int trials = 40;
  for (int trial = 0; trial < trials; ++trial) {
    int k = 2 + static_cast<int>(gen.next_below(2));
    int n = k + static_cast<int>(gen.next_below(7));
    int d = 1 + static_cast<int>(gen.next_below(3));
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < n; ++i) {
      std::vector<double> p;
      for (int j = 0; j < d; ++j) p.push_back(gen.next_double() * 10);
      pts.push_back(std::move(p));
    }
    ClusteringResult r = kmeans_fit(pts, k, gen.next());
    if (std::abs(r.inertia - optimal_inertia(pts, k)) < 1e-9) ++hits;
  }
  CHECK(hits >= trials * 95 / 100);
}
