#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "manifoldnet/data.hpp"
#include "manifoldnet/rng.hpp"

namespace mfn {

enum class Activation : std::uint8_t { relu = 0, tanh = 1 };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);

struct NetworkSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;
  Activation activation = Activation::relu;
  std::int32_t n_classes = 0;      // 0: no supervised head
  std::size_t n_trials = 0;        // pseudo head count
  std::int32_t n_pseudo_classes = 0;

  // width of the shared representation feeding all heads
  std::size_t embed_dim() const {
    return hidden_dims.empty() ? input_dim : hidden_dims.back();
  }
  void validate() const;

  bool operator==(const NetworkSpec&) const = default;
};

struct LinearLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> w;  // out * in, row-major
  std::vector<double> b;  // out

  bool operator==(const LinearLayer&) const = default;
};

// Shared backbone plus one supervised head and T pseudo heads. The backbone
// is stored once; every head reads the same representation.
struct NetworkParams {
  NetworkSpec spec;
  std::vector<LinearLayer> backbone;
  std::optional<LinearLayer> supervised_head;
  std::vector<LinearLayer> pseudo_heads;

  static NetworkParams zeros(const NetworkSpec& spec);
  // Glorot-uniform weights, zero biases.
  static NetworkParams glorot(const NetworkSpec& spec, Rng& rng);

  std::vector<double> flatten() const;
  void unflatten(std::span<const double> flat);

  bool operator==(const NetworkParams&) const = default;
};

struct ForwardResult {
  std::vector<double> embedding;          // shared representation
  std::vector<double> supervised_scores;  // empty if no supervised head
  std::vector<double> pseudo_scores;      // n_trials * n_pseudo_classes
};

ForwardResult forward(const NetworkParams& params, std::span<const double> x);
std::vector<double> embed(const NetworkParams& params, std::span<const double> x);

enum class LambdaMode { fixed, auto_balance };

struct TrainConfig {
  double lambda_s = 5e-4;
  double lambda_m = 5e-4;
  double lambda = 1.0;
  LambdaMode lambda_mode = LambdaMode::fixed;
  double learning_rate = 0.01;
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  // 0: derived from the larger stream. A positive value pins the step count,
  // which keeps batch schedules identical across runs with different streams.
  std::size_t steps_per_epoch = 0;

  void validate() const;
};

// Sum of softmax cross-entropy over the batch plus lambda_s times the
// squared L2 norm of backbone and supervised-head weights (no biases).
double loss_supervised(const NetworkParams& params, const FeatureSet& fs,
                       std::span<const std::size_t> indices, double lambda_s);

// Double sum over trials and batch samples, plus lambda_m times the squared
// L2 norm of backbone weights (once) and each pseudo head's weights.
// only_trial >= 0 restricts the data term and head penalty to that trial.
double loss_manifold(const NetworkParams& params, const FeatureSet& inputs,
                     const PseudoLabelEnsemble& ensemble, std::span<const std::size_t> indices,
                     double lambda_m, std::ptrdiff_t only_trial = -1);

double loss_joint(const NetworkParams& params, const FeatureSet& labeled_fs,
                  std::span<const std::size_t> labeled_indices, const FeatureSet& pseudo_inputs,
                  const PseudoLabelEnsemble& ensemble, std::span<const std::size_t> pseudo_indices,
                  const TrainConfig& cfg);

// Analytic gradients, accumulated into grads (same shape as params) with the
// given scale. Each returns the corresponding loss value.
double grad_supervised(const NetworkParams& params, const FeatureSet& fs,
                       std::span<const std::size_t> indices, double lambda_s,
                       NetworkParams& grads, double scale = 1.0);
double grad_manifold(const NetworkParams& params, const FeatureSet& inputs,
                     const PseudoLabelEnsemble& ensemble, std::span<const std::size_t> indices,
                     double lambda_m, NetworkParams& grads, double scale = 1.0,
                     std::ptrdiff_t only_trial = -1);

struct SupervisedStream {
  const FeatureSet* features = nullptr;
  std::vector<std::size_t> indices;

  bool empty() const { return features == nullptr || indices.empty(); }
};

struct ManifoldStream {
  const FeatureSet* inputs = nullptr;  // network inputs, may differ from the EMS space
  const PseudoLabelEnsemble* ensemble = nullptr;
  std::vector<std::size_t> indices;

  bool empty() const { return inputs == nullptr || ensemble == nullptr || indices.empty(); }
};

struct TrainResult {
  NetworkParams params;
  std::vector<double> epoch_loss;  // full-stream objective after each epoch
  double lambda_used = 1.0;
  // stream losses at the auto-balance measurement (NaN when not balancing)
  double balance_loss_s = 0.0;
  double balance_loss_m = 0.0;
};

// Mini-batch SGD. Mode follows the streams: supervised-only, manifold-only,
// or joint when both are non-empty (one batch per stream per step, cycling
// independently).
TrainResult train(NetworkParams params, const SupervisedStream& sup, const ManifoldStream& man,
                  const TrainConfig& cfg);

NetworkParams load_model(const std::string& path);
void save_model(const NetworkParams& params, const std::string& path);

}  // namespace mfn
