#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "manifoldnet/data.hpp"
#include "manifoldnet/rng.hpp"

namespace mfn {

struct KMeansResult {
  std::vector<std::int32_t> assignments;  // per-sample cluster id in {0..z-1}
  std::vector<double> centroids;          // z * dim, row-major
  std::size_t n_iterations = 0;
  double inertia = 0.0;
};

enum class KMeansInit { uniform, kmeanspp };

inline constexpr std::size_t kKMeansMaxIterDefault = 100;
inline constexpr double kKMeansTolDefault = 1e-6;

double l2_distance(std::span<const double> a, std::span<const double> b);
double l2_distance_sq(std::span<const double> a, std::span<const double> b);

// Unit-normalizes each row; zero rows pass through unchanged.
FeatureSet normalize_l2(const FeatureSet& fs);

// Indices of the k nearest samples to sample query_index (query excluded),
// ascending by distance, ties by ascending index.
std::vector<std::size_t> knn(const FeatureSet& fs, std::size_t query_index, std::size_t k);

// Lloyd iterations from the given initial centroids (z * dim). An emptied
// cluster is reseeded to the sample farthest from its assigned centroid.
KMeansResult kmeans_lloyd(const FeatureSet& fs, std::vector<double> initial_centroids,
                          std::size_t z, std::size_t max_iter = kKMeansMaxIterDefault,
                          double tol = kKMeansTolDefault);

KMeansResult kmeans(const FeatureSet& fs, std::size_t z, Rng& rng,
                    std::size_t max_iter = kKMeansMaxIterDefault,
                    double tol = kKMeansTolDefault,
                    KMeansInit init = KMeansInit::uniform);

}  // namespace mfn
