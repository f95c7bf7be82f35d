#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "manifoldnet/data.hpp"
#include "manifoldnet/neighbors.hpp"
#include "manifoldnet/rng.hpp"

namespace mfn {

struct EmsConfig {
  std::size_t z = 30;           // pseudo-class count per trial
  std::size_t t = 90;           // trial count
  std::size_t k = 9;            // neighbors grown per seed
  double lr_reg = 1e-3;         // segmenter L2 strength
  std::size_t lr_iters = 500;   // segmenter iteration cap
  std::uint64_t master_seed = 0;
  // kmeans++ keeps seed coverage of sparse regions; plain uniform init
  // frequently leaves a well-separated mode without a seed
  KMeansInit kmeans_init = KMeansInit::kmeanspp;

  void validate(std::size_t n_samples) const;
};

// One trial's prototype training set: (sample index, pseudo-class) pairs.
struct SeedSet {
  std::size_t trial_id = 0;
  std::vector<std::pair<std::size_t, std::int32_t>> members;
};

struct LinearSegmenter {
  std::size_t n_classes = 0;
  std::size_t dim = 0;
  std::vector<double> weights;  // n_classes * dim
  std::vector<double> biases;   // n_classes
};

// Thrown when a trial's segmenter hits a non-finite loss; run_ems retries.
struct TrialFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One sample index per k-means cluster: the member nearest its centroid,
// ties by lowest index.
std::vector<std::size_t> select_seeds(const FeatureSet& fs, std::size_t z, Rng& rng,
                                      KMeansInit init = KMeansInit::kmeanspp);

SeedSet grow_seeds(const FeatureSet& fs, const std::vector<std::size_t>& seeds, std::size_t k);

// Multinomial logistic regression on the prototype set: softmax
// cross-entropy plus lr_reg * ||W||^2 (biases unregularized), full-batch
// gradient descent from zero init with backtracking step halving.
LinearSegmenter train_segmenter(const FeatureSet& fs, const SeedSet& seed_set,
                                const EmsConfig& cfg);

// Argmax class score per sample; ties by lowest class index.
std::vector<std::int32_t> segment_all(const FeatureSet& fs, const LinearSegmenter& seg);

PseudoLabelEnsemble run_ems(const FeatureSet& fs, const EmsConfig& cfg, std::size_t workers = 0);

}  // namespace mfn
