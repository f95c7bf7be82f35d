#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "manifoldnet/data.hpp"
#include "manifoldnet/ems.hpp"
#include "manifoldnet/net.hpp"

namespace mfn {

// Fraction of queries whose nearest gallery neighbor (L2) shares the query's
// label. With exclude_self the query's own gallery row is skipped (use for
// leave-one-out retrieval where queries == gallery).
double recall_at_1(const FeatureSet& queries, const FeatureSet& gallery, bool exclude_self);
double recall_at_1(const FeatureSet& set);  // leave-one-out within one set

// Sum over clusters of the majority true-class overlap, divided by N.
double purity(std::span<const std::int32_t> pseudo, std::span<const std::int32_t> truth);

// Mean per-trial purity of an ensemble against true labels, skipping
// unlabeled samples.
double ensemble_purity(const PseudoLabelEnsemble& ensemble, const FeatureSet& fs);

// Supervised-head argmax accuracy over the given (labeled) indices.
double accuracy(const NetworkParams& params, const FeatureSet& fs,
                std::span<const std::size_t> indices);

// Embeddings of every sample as a FeatureSet (labels carried over).
FeatureSet embed_all(const NetworkParams& params, const FeatureSet& fs);

struct MetricsReport {
  // NaN marks "not measured"; present values are fractions in [0,1]
  double accuracy = -1.0;
  double recall_at_1 = -1.0;
  double purity = -1.0;
  double baseline_accuracy = -1.0;
  double recall_at_1_before = -1.0;
  std::vector<double> round_test_accuracy;  // per refine round
  std::vector<std::pair<std::string, double>> extra;

  // key=value pairs in emission order, unmeasured fields omitted
  std::vector<std::pair<std::string, double>> to_lines() const;
};

struct ImitationSetup {
  FeatureSet teacher_features;  // defines the manifold for EMS
  FeatureSet student_features;  // network input, same row order
  EmsConfig ems_cfg;
  TrainConfig train_cfg;
  std::vector<std::size_t> hidden_dims = {64};
  Activation activation = Activation::relu;
  bool normalize = false;  // L2-normalize the EMS input space
  std::size_t workers = 0;
};

struct SemiSupSetup {
  FeatureSet features;
  SplitSpec split;
  EmsConfig ems_cfg;
  TrainConfig train_cfg;
  std::size_t refine_rounds = 3;
  std::vector<std::size_t> hidden_dims = {64};
  Activation activation = Activation::relu;
  bool normalize = false;  // L2-normalize round-1 EMS input
  std::size_t workers = 0;
};

struct ImitationResult {
  NetworkParams params;
  MetricsReport report;
};

struct SemiSupResult {
  NetworkParams params;
  MetricsReport report;
};

// EMS on the teacher's feature space, then manifold-only training of a
// student network; labels are used for retrieval evaluation only.
ImitationResult run_imitation(const ImitationSetup& setup);

// Iterative joint training: round 1 segments the raw input features, later
// rounds segment the just-trained embedding. Also trains a supervised-only
// baseline on the identical labeled batches.
SemiSupResult run_semisup(const SemiSupSetup& setup);

}  // namespace mfn
