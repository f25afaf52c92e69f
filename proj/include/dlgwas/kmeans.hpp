#pragma once
// Lloyd's k-means with k-means++ seeding over the columns of a matrix.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "dlgwas/error.hpp"
#include "dlgwas/rng.hpp"

namespace dlgwas {

struct KMeansResult {
  std::vector<int> labels;    // 1..k, one per column
  Eigen::MatrixXd centroids;  // d x k, column c-1 is cluster c
  double wcss = 0.0;          // within-cluster sum of squared distances
};

struct KMeansOptions {
  int restarts = 10;
  int max_iterations = 300;
};

// Sum of squared distances of each column to the mean of its cluster.
inline double within_cluster_ss(const Eigen::MatrixXd& points, const std::vector<int>& labels, int k) {
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(points.rows(), k);
  std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    sums.col(labels[static_cast<std::size_t>(i)] - 1) += points.col(i);
    counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)] - 1)] += 1.0;
  }
  for (int c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] > 0) sums.col(c) /= counts[static_cast<std::size_t>(c)];
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    total += (points.col(i) - sums.col(labels[static_cast<std::size_t>(i)] - 1)).squaredNorm();
  }
  return total;
}

namespace detail {

inline std::size_t count_distinct_columns(const Eigen::MatrixXd& points, std::size_t stop_at) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(points.cols()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  auto less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index r = 0; r < points.rows(); ++r) {
      if (points(r, a) != points(r, b)) return points(r, a) < points(r, b);
    }
    return false;
  };
  std::sort(order.begin(), order.end(), less);
  std::size_t distinct = order.empty() ? 0 : 1;
  for (std::size_t i = 1; i < order.size() && distinct < stop_at; ++i) {
    if (less(order[i - 1], order[i])) ++distinct;
  }
  return distinct;
}

inline KMeansResult lloyd_once(const Eigen::MatrixXd& points, int k, Rng& rng, int max_iterations) {
  const Eigen::Index n = points.cols();
  Eigen::MatrixXd centroids(points.rows(), k);

  // k-means++ seeding.
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  centroids.col(0) = points.col(static_cast<Eigen::Index>(rng.below(static_cast<uint64_t>(n))));
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      auto& d = d2[static_cast<std::size_t>(i)];
      d = std::min(d, (points.col(i) - centroids.col(c - 1)).squaredNorm());
      total += d;
    }
    Eigen::Index pick = n - 1;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (Eigen::Index i = 0; i < n; ++i) {
        target -= d2[static_cast<std::size_t>(i)];
        if (target <= 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.below(static_cast<uint64_t>(n)));
    }
    centroids.col(c) = points.col(pick);
  }

  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  std::vector<double> dist(static_cast<std::size_t>(n), 0.0);
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (points.col(i) - centroids.col(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      dist[static_cast<std::size_t>(i)] = best_d;
      if (labels[static_cast<std::size_t>(i)] != best + 1) {
        labels[static_cast<std::size_t>(i)] = best + 1;
        changed = true;
      }
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(points.rows(), k);
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.col(labels[static_cast<std::size_t>(i)] - 1) += points.col(i);
      ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)] - 1)];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centroids.col(c) = sums.col(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
        continue;
      }
      // Empty cluster: move its centroid to the point farthest from its own.
      const auto far = std::max_element(dist.begin(), dist.end()) - dist.begin();
      centroids.col(c) = points.col(far);
      dist[static_cast<std::size_t>(far)] = 0.0;
      changed = true;
    }
    if (!changed && iter > 0) break;
  }

  KMeansResult out;
  out.labels = std::move(labels);
  out.centroids = std::move(centroids);
  out.wcss = within_cluster_ss(points, out.labels, k);
  return out;
}

// Relabels clusters so centroids are in lexicographic order of coordinates.
inline void canonicalize(KMeansResult& r) {
  const int k = static_cast<int>(r.centroids.cols());
  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    for (Eigen::Index d = 0; d < r.centroids.rows(); ++d) {
      if (r.centroids(d, a) != r.centroids(d, b)) return r.centroids(d, a) < r.centroids(d, b);
    }
    return a < b;
  });
  std::vector<int> new_label(static_cast<std::size_t>(k));
  Eigen::MatrixXd sorted(r.centroids.rows(), k);
  for (int pos = 0; pos < k; ++pos) {
    new_label[static_cast<std::size_t>(order[static_cast<std::size_t>(pos)])] = pos + 1;
    sorted.col(pos) = r.centroids.col(order[static_cast<std::size_t>(pos)]);
  }
  for (auto& l : r.labels) l = new_label[static_cast<std::size_t>(l - 1)];
  r.centroids = std::move(sorted);
}

}  // namespace detail

// Clusters the columns of `points` (d x n). Keeps the restart with the lowest
// WCSS; labels are ordered by centroid coordinates.
inline KMeansResult kmeans_columns(const Eigen::MatrixXd& points, int k, uint64_t seed, KMeansOptions options = {}) {
  if (k < 1) throw ConfigError("k-means needs k >= 1");
  if (static_cast<Eigen::Index>(k) > points.cols()) throw ConfigError("k-means needs k <= number of columns");
  if (detail::count_distinct_columns(points, static_cast<std::size_t>(k)) < static_cast<std::size_t>(k)) {
    throw DataError("k-means: fewer distinct columns than k = " + std::to_string(k) + " (degenerate clusters)");
  }
  KMeansResult best;
  best.wcss = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < options.restarts; ++restart) {
    Rng rng(seed, "kmeans.restart", static_cast<uint64_t>(restart));
    auto r = detail::lloyd_once(points, k, rng, options.max_iterations);
    if (r.wcss < best.wcss) best = std::move(r);
  }
  detail::canonicalize(best);
  return best;
}

}  // namespace dlgwas
