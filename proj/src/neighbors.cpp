#include "manifoldnet/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mfn {

double l2_distance_sq(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("l2_distance: dimension mismatch (" + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()) + ")");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    acc += diff * diff;
  }
  return acc;
}

double l2_distance(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(l2_distance_sq(a, b));
}

FeatureSet normalize_l2(const FeatureSet& fs) {
  FeatureSet out = fs;
  for (std::size_t i = 0; i < out.n_samples; ++i) {
    double* r = out.row(i);
    double sq = 0.0;
    for (std::size_t j = 0; j < out.dim; ++j) sq += r[j] * r[j];
    if (sq == 0.0) continue;
    const double inv = 1.0 / std::sqrt(sq);
    for (std::size_t j = 0; j < out.dim; ++j) r[j] *= inv;
  }
  return out;
}

std::vector<std::size_t> knn(const FeatureSet& fs, std::size_t query_index, std::size_t k) {
  const std::size_t n = fs.n_samples;
  if (query_index >= n) throw std::invalid_argument("knn: query index out of range");
  if (k < 1 || k > n - 1)
    throw std::invalid_argument("knn: k=" + std::to_string(k) + " out of range [1, " +
                                std::to_string(n - 1) + "]");
  const std::span<const double> q(fs.row(query_index), fs.dim);
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    if (i == query_index) continue;
    dist.emplace_back(l2_distance_sq(q, {fs.row(i), fs.dim}), i);
  }
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = dist[i].second;
  return out;
}

KMeansResult kmeans_lloyd(const FeatureSet& fs, std::vector<double> initial_centroids,
                          std::size_t z, std::size_t max_iter, double tol) {
  const std::size_t n = fs.n_samples;
  const std::size_t d = fs.dim;
  if (z < 1 || z > n) throw std::invalid_argument("kmeans: z out of range [1, N]");
  if (initial_centroids.size() != z * d)
    throw std::invalid_argument("kmeans: initial centroid shape mismatch");

  KMeansResult res;
  res.centroids = std::move(initial_centroids);
  res.assignments.assign(n, -1);
  std::vector<std::size_t> counts(z, 0);
  std::vector<double> sums(z * d, 0.0);
  double prev_inertia = std::numeric_limits<double>::infinity();

  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    // assignment step; ties go to the lowest cluster index
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const std::span<const double> x(fs.row(i), d);
      double best = std::numeric_limits<double>::infinity();
      std::int32_t best_c = 0;
      for (std::size_t c = 0; c < z; ++c) {
        const double dd = l2_distance_sq(x, {res.centroids.data() + c * d, d});
        if (dd < best) {
          best = dd;
          best_c = static_cast<std::int32_t>(c);
        }
      }
      if (res.assignments[i] != best_c) {
        res.assignments[i] = best_c;
        changed = true;
      }
    }

    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(res.assignments[i])];

    // reseed emptied clusters to the sample farthest from its assigned centroid
    bool reseeded = false;
    for (std::size_t c = 0; c < z; ++c) {
      if (counts[c] > 0) continue;
      double worst = -1.0;
      std::size_t victim = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t a = static_cast<std::size_t>(res.assignments[i]);
        if (counts[a] <= 1) continue;  // never empty another cluster
        const double dd =
            l2_distance_sq({fs.row(i), d}, {res.centroids.data() + a * d, d});
        if (dd > worst) {
          worst = dd;
          victim = i;
        }
      }
      --counts[static_cast<std::size_t>(res.assignments[victim])];
      res.assignments[victim] = static_cast<std::int32_t>(c);
      ++counts[c];
      reseeded = true;
      changed = true;
    }

    // update step: deterministic accumulation in sample order
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = static_cast<std::size_t>(res.assignments[i]);
      const double* x = fs.row(i);
      for (std::size_t j = 0; j < d; ++j) sums[c * d + j] += x[j];
    }
    for (std::size_t c = 0; c < z; ++c) {
      for (std::size_t j = 0; j < d; ++j) res.centroids[c * d + j] = sums[c * d + j] / counts[c];
    }

    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = static_cast<std::size_t>(res.assignments[i]);
      inertia += l2_distance_sq({fs.row(i), d}, {res.centroids.data() + c * d, d});
    }
    res.inertia = inertia;
    res.n_iterations = iter + 1;

    if (!changed) break;
    if (!reseeded && std::isfinite(prev_inertia)) {
      const double improvement = (prev_inertia - inertia) / std::max(prev_inertia, 1e-300);
      if (improvement < tol) break;
    }
    prev_inertia = inertia;
  }
  return res;
}

namespace {

std::vector<double> init_uniform(const FeatureSet& fs, std::size_t z, Rng& rng) {
  const auto picks = rng.sample_without_replacement(fs.n_samples, z);
  std::vector<double> centroids(z * fs.dim);
  for (std::size_t c = 0; c < z; ++c) {
    const double* x = fs.row(picks[c]);
    std::copy(x, x + fs.dim, centroids.begin() + static_cast<std::ptrdiff_t>(c * fs.dim));
  }
  return centroids;
}

std::vector<double> init_kmeanspp(const FeatureSet& fs, std::size_t z, Rng& rng) {
  const std::size_t n = fs.n_samples;
  const std::size_t d = fs.dim;
  std::vector<double> centroids;
  centroids.reserve(z * d);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());

  std::size_t first = static_cast<std::size_t>(rng.next_below(n));
  const double* x0 = fs.row(first);
  centroids.insert(centroids.end(), x0, x0 + d);
  for (std::size_t c = 1; c < z; ++c) {
    const std::span<const double> last(centroids.data() + (c - 1) * d, d);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], l2_distance_sq({fs.row(i), d}, last));
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.next_real() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<std::size_t>(rng.next_below(n));
    }
    const double* x = fs.row(pick);
    centroids.insert(centroids.end(), x, x + d);
  }
  return centroids;
}

}  // namespace

KMeansResult kmeans(const FeatureSet& fs, std::size_t z, Rng& rng, std::size_t max_iter,
                    double tol, KMeansInit init) {
  if (z < 1 || z > fs.n_samples)
    throw std::invalid_argument("kmeans: z=" + std::to_string(z) + " exceeds N=" +
                                std::to_string(fs.n_samples));
  auto centroids =
      init == KMeansInit::uniform ? init_uniform(fs, z, rng) : init_kmeanspp(fs, z, rng);
  return kmeans_lloyd(fs, std::move(centroids), z, max_iter, tol);
}

}  // namespace mfn
