#pragma once

#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "manifoldnet/data.hpp"
#include "manifoldnet/rng.hpp"

namespace fixtures {

// n_per_class isotropic Gaussian blobs around the given centers
inline mfn::FeatureSet blobs(const std::vector<std::vector<double>>& centers,
                             std::size_t n_per_class, double sigma, mfn::Rng& rng) {
  mfn::FeatureSet fs;
  fs.dim = centers.front().size();
  fs.n_classes = static_cast<std::int32_t>(centers.size());
  for (std::size_t c = 0; c < centers.size(); ++c) {
    for (std::size_t i = 0; i < n_per_class; ++i) {
      for (std::size_t j = 0; j < fs.dim; ++j)
        fs.features.push_back(centers[c][j] + sigma * rng.next_normal());
      fs.labels.push_back(static_cast<std::int32_t>(c));
      ++fs.n_samples;
    }
  }
  return fs;
}

// axis-aligned well-separated centers: center c = scale * e_c (d >= k)
inline std::vector<std::vector<double>> axis_centers(std::size_t k, std::size_t d, double scale) {
  std::vector<std::vector<double>> centers(k, std::vector<double>(d, 0.0));
  for (std::size_t c = 0; c < k; ++c) centers[c][c % d] = scale * (1.0 + c / d);
  return centers;
}

// classic interleaved half-circles, classes 0 and 1
inline mfn::FeatureSet two_moons(std::size_t n, double noise, mfn::Rng& rng) {
  mfn::FeatureSet fs;
  fs.dim = 2;
  fs.n_classes = 2;
  for (std::size_t i = 0; i < n; ++i) {
    const bool upper = (i % 2) == 0;
    const double t = std::numbers::pi * rng.next_real();
    double x, y;
    if (upper) {
      x = std::cos(t);
      y = std::sin(t);
    } else {
      x = 1.0 - std::cos(t);
      y = 0.5 - std::sin(t);
    }
    fs.features.push_back(x + noise * rng.next_normal());
    fs.features.push_back(y + noise * rng.next_normal());
    fs.labels.push_back(upper ? 0 : 1);
    ++fs.n_samples;
  }
  return fs;
}

// random features with float32-representable components (round-trip exact)
inline mfn::FeatureSet random_features(std::size_t n, std::size_t d, mfn::Rng& rng,
                                       bool with_labels, std::int32_t n_classes = 4) {
  mfn::FeatureSet fs;
  fs.n_samples = n;
  fs.dim = d;
  fs.features.resize(n * d);
  for (double& v : fs.features)
    v = static_cast<double>(static_cast<float>(rng.next_normal() * 10.0));
  if (with_labels) {
    fs.n_classes = n_classes;
    fs.labels.resize(n);
    for (auto& l : fs.labels) {
      l = static_cast<std::int32_t>(rng.next_below(static_cast<std::uint64_t>(n_classes) + 1)) - 1;
    }
  }
  return fs;
}

// scratch file in the test's working directory
inline std::string temp_path(const std::string& stem) { return "mfn_test_" + stem; }

}  // namespace fixtures
