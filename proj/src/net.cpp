#include "manifoldnet/net.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace mfn {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

double apply_activation(Activation a, double z) {
  return a == Activation::relu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

// derivative expressed through the post-activation value
double activation_grad(Activation a, double h) {
  return a == Activation::relu ? (h > 0.0 ? 1.0 : 0.0) : 1.0 - h * h;
}

void linear_forward(const LinearLayer& layer, std::span<const double> x, double* out) {
  for (std::size_t r = 0; r < layer.out; ++r) {
    double s = layer.b[r];
    const double* w = layer.w.data() + r * layer.in;
    for (std::size_t j = 0; j < layer.in; ++j) s += w[j] * x[j];
    out[r] = s;
  }
}

// returns cross-entropy of target under softmax(scores); fills probs
double softmax_ce(std::span<const double> scores, std::int32_t target, std::vector<double>& probs) {
  probs.resize(scores.size());
  double max_s = -std::numeric_limits<double>::infinity();
  for (const double s : scores) max_s = std::max(max_s, s);
  double sum_exp = 0.0;
  for (std::size_t c = 0; c < scores.size(); ++c) {
    probs[c] = std::exp(scores[c] - max_s);
    sum_exp += probs[c];
  }
  for (double& p : probs) p /= sum_exp;
  return max_s + std::log(sum_exp) - scores[static_cast<std::size_t>(target)];
}

// h[0] = x, h[l] = act(W_l h[l-1] + b_l)
void backbone_forward(const NetworkParams& params, std::span<const double> x,
                      std::vector<std::vector<double>>& h) {
  h.resize(params.backbone.size() + 1);
  h[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < params.backbone.size(); ++l) {
    const LinearLayer& layer = params.backbone[l];
    h[l + 1].resize(layer.out);
    linear_forward(layer, h[l], h[l + 1].data());
    for (double& v : h[l + 1]) v = apply_activation(params.spec.activation, v);
  }
}

// propagates d(loss)/d(embedding) down the backbone, accumulating gradients
void backbone_backward(const NetworkParams& params, const std::vector<std::vector<double>>& h,
                       std::vector<double> dh, NetworkParams& grads, double scale) {
  for (std::size_t li = params.backbone.size(); li-- > 0;) {
    const LinearLayer& layer = params.backbone[li];
    LinearLayer& g = grads.backbone[li];
    // through the activation of layer li
    for (std::size_t r = 0; r < layer.out; ++r)
      dh[r] *= activation_grad(params.spec.activation, h[li + 1][r]);
    const std::vector<double>& in = h[li];
    for (std::size_t r = 0; r < layer.out; ++r) {
      const double dz = dh[r];
      g.b[r] += scale * dz;
      double* gw = g.w.data() + r * layer.in;
      for (std::size_t j = 0; j < layer.in; ++j) gw[j] += scale * dz * in[j];
    }
    if (li == 0) break;
    std::vector<double> prev(layer.in, 0.0);
    for (std::size_t r = 0; r < layer.out; ++r) {
      const double dz = dh[r];
      const double* w = layer.w.data() + r * layer.in;
      for (std::size_t j = 0; j < layer.in; ++j) prev[j] += w[j] * dz;
    }
    dh = std::move(prev);
  }
}

void head_backward(const LinearLayer& head, const std::vector<double>& rep,
                   const std::vector<double>& dscore, LinearLayer& ghead,
                   std::vector<double>& drep, double scale) {
  for (std::size_t r = 0; r < head.out; ++r) {
    const double ds = dscore[r];
    ghead.b[r] += scale * ds;
    double* gw = ghead.w.data() + r * head.in;
    const double* w = head.w.data() + r * head.in;
    for (std::size_t j = 0; j < head.in; ++j) {
      gw[j] += scale * ds * rep[j];
      drep[j] += w[j] * ds;
    }
  }
}

double weight_sq(const LinearLayer& layer) {
  double acc = 0.0;
  for (const double w : layer.w) acc += w * w;
  return acc;
}

void add_decay(const LinearLayer& layer, LinearLayer& grad, double coeff) {
  for (std::size_t i = 0; i < layer.w.size(); ++i) grad.w[i] += coeff * layer.w[i];
}

LinearLayer make_layer(std::size_t in, std::size_t out) {
  LinearLayer l;
  l.in = in;
  l.out = out;
  l.w.assign(in * out, 0.0);
  l.b.assign(out, 0.0);
  return l;
}

void glorot_fill(LinearLayer& layer, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
  for (double& w : layer.w) w = (2.0 * rng.next_real() - 1.0) * bound;
}

}  // namespace

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  fail("unknown activation '" + name + "' (expected relu or tanh)");
}

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

void NetworkSpec::validate() const {
  if (input_dim < 1) fail("NetworkSpec: input_dim must be >= 1");
  for (const std::size_t w : hidden_dims)
    if (w < 1) fail("NetworkSpec: hidden widths must be >= 1");
  if (n_classes < 0) fail("NetworkSpec: n_classes must be >= 0");
  if (n_trials > 0 && n_pseudo_classes < 2)
    fail("NetworkSpec: pseudo heads require n_pseudo_classes >= 2");
}

NetworkParams NetworkParams::zeros(const NetworkSpec& spec) {
  spec.validate();
  NetworkParams p;
  p.spec = spec;
  std::size_t in = spec.input_dim;
  for (const std::size_t out : spec.hidden_dims) {
    p.backbone.push_back(make_layer(in, out));
    in = out;
  }
  if (spec.n_classes > 0)
    p.supervised_head = make_layer(spec.embed_dim(), static_cast<std::size_t>(spec.n_classes));
  for (std::size_t t = 0; t < spec.n_trials; ++t)
    p.pseudo_heads.push_back(
        make_layer(spec.embed_dim(), static_cast<std::size_t>(spec.n_pseudo_classes)));
  return p;
}

NetworkParams NetworkParams::glorot(const NetworkSpec& spec, Rng& rng) {
  NetworkParams p = zeros(spec);
  for (auto& layer : p.backbone) glorot_fill(layer, rng);
  if (p.supervised_head) glorot_fill(*p.supervised_head, rng);
  for (auto& head : p.pseudo_heads) glorot_fill(head, rng);
  return p;
}

std::vector<double> NetworkParams::flatten() const {
  std::vector<double> flat;
  auto push = [&](const LinearLayer& l) {
    flat.insert(flat.end(), l.w.begin(), l.w.end());
    flat.insert(flat.end(), l.b.begin(), l.b.end());
  };
  for (const auto& l : backbone) push(l);
  if (supervised_head) push(*supervised_head);
  for (const auto& l : pseudo_heads) push(l);
  return flat;
}

void NetworkParams::unflatten(std::span<const double> flat) {
  std::size_t pos = 0;
  auto pull = [&](LinearLayer& l) {
    std::copy(flat.begin() + pos, flat.begin() + pos + l.w.size(), l.w.begin());
    pos += l.w.size();
    std::copy(flat.begin() + pos, flat.begin() + pos + l.b.size(), l.b.begin());
    pos += l.b.size();
  };
  for (auto& l : backbone) pull(l);
  if (supervised_head) pull(*supervised_head);
  for (auto& l : pseudo_heads) pull(l);
  if (pos != flat.size()) fail("NetworkParams::unflatten: size mismatch");
}

ForwardResult forward(const NetworkParams& params, std::span<const double> x) {
  if (x.size() != params.spec.input_dim) fail("forward: input dimension mismatch");
  std::vector<std::vector<double>> h;
  backbone_forward(params, x, h);
  ForwardResult res;
  res.embedding = h.back();
  if (params.supervised_head) {
    res.supervised_scores.resize(params.supervised_head->out);
    linear_forward(*params.supervised_head, res.embedding, res.supervised_scores.data());
  }
  res.pseudo_scores.resize(params.pseudo_heads.size() *
                           static_cast<std::size_t>(params.spec.n_pseudo_classes));
  for (std::size_t t = 0; t < params.pseudo_heads.size(); ++t) {
    linear_forward(params.pseudo_heads[t], res.embedding,
                   res.pseudo_scores.data() + t * params.pseudo_heads[t].out);
  }
  return res;
}

std::vector<double> embed(const NetworkParams& params, std::span<const double> x) {
  if (x.size() != params.spec.input_dim) fail("embed: input dimension mismatch");
  std::vector<std::vector<double>> h;
  backbone_forward(params, x, h);
  return h.back();
}

void TrainConfig::validate() const {
  if (lambda_s < 0 || lambda_m < 0) fail("TrainConfig: weight decays must be >= 0");
  if (lambda < 0) fail("TrainConfig: lambda must be >= 0");
  if (learning_rate <= 0) fail("TrainConfig: learning_rate must be > 0");
  if (epochs < 1) fail("TrainConfig: epochs must be >= 1");
  if (batch_size < 1) fail("TrainConfig: batch_size must be >= 1");
}

double grad_supervised(const NetworkParams& params, const FeatureSet& fs,
                       std::span<const std::size_t> indices, double lambda_s,
                       NetworkParams& grads, double scale) {
  if (!params.supervised_head) fail("loss_supervised: network has no supervised head");
  const LinearLayer& head = *params.supervised_head;
  double loss = 0.0;
  std::vector<std::vector<double>> h;
  std::vector<double> scores(head.out), probs;
  for (const std::size_t i : indices) {
    const auto label = fs.label(i);
    if (!label) fail("loss_supervised: sample " + std::to_string(i) + " has no label");
    if (*label >= params.spec.n_classes) fail("loss_supervised: label out of range");
    backbone_forward(params, {fs.row(i), fs.dim}, h);
    const std::vector<double>& rep = h.back();
    linear_forward(head, rep, scores.data());
    loss += softmax_ce(scores, *label, probs);
    probs[static_cast<std::size_t>(*label)] -= 1.0;  // dL/dscores
    std::vector<double> drep(rep.size(), 0.0);
    head_backward(head, rep, probs, *grads.supervised_head, drep, scale);
    backbone_backward(params, h, std::move(drep), grads, scale);
  }
  // decay on weights of theta_s: backbone plus supervised head
  double reg = weight_sq(head);
  for (const auto& l : params.backbone) reg += weight_sq(l);
  loss += lambda_s * reg;
  add_decay(head, *grads.supervised_head, scale * 2.0 * lambda_s);
  for (std::size_t l = 0; l < params.backbone.size(); ++l)
    add_decay(params.backbone[l], grads.backbone[l], scale * 2.0 * lambda_s);
  return loss;
}

double loss_supervised(const NetworkParams& params, const FeatureSet& fs,
                       std::span<const std::size_t> indices, double lambda_s) {
  if (!params.supervised_head) fail("loss_supervised: network has no supervised head");
  const LinearLayer& head = *params.supervised_head;
  double loss = 0.0;
  std::vector<std::vector<double>> h;
  std::vector<double> scores(head.out), probs;
  for (const std::size_t i : indices) {
    const auto label = fs.label(i);
    if (!label) fail("loss_supervised: sample " + std::to_string(i) + " has no label");
    backbone_forward(params, {fs.row(i), fs.dim}, h);
    linear_forward(head, h.back(), scores.data());
    loss += softmax_ce(scores, *label, probs);
  }
  double reg = weight_sq(head);
  for (const auto& l : params.backbone) reg += weight_sq(l);
  return loss + lambda_s * reg;
}

double grad_manifold(const NetworkParams& params, const FeatureSet& inputs,
                     const PseudoLabelEnsemble& ensemble, std::span<const std::size_t> indices,
                     double lambda_m, NetworkParams& grads, double scale,
                     std::ptrdiff_t only_trial) {
  if (params.pseudo_heads.size() != ensemble.n_trials)
    fail("loss_manifold: head count does not match ensemble trials");
  const std::size_t z = static_cast<std::size_t>(params.spec.n_pseudo_classes);
  double loss = 0.0;
  std::vector<std::vector<double>> h;
  std::vector<double> scores(z), probs;
  for (const std::size_t i : indices) {
    backbone_forward(params, {inputs.row(i), inputs.dim}, h);
    const std::vector<double>& rep = h.back();
    std::vector<double> drep(rep.size(), 0.0);
    for (std::size_t t = 0; t < params.pseudo_heads.size(); ++t) {
      if (only_trial >= 0 && static_cast<std::size_t>(only_trial) != t) continue;
      const LinearLayer& head = params.pseudo_heads[t];
      linear_forward(head, rep, scores.data());
      const std::int32_t target = ensemble.at(i, t);
      loss += softmax_ce(scores, target, probs);
      probs[static_cast<std::size_t>(target)] -= 1.0;
      head_backward(head, rep, probs, grads.pseudo_heads[t], drep, scale);
    }
    backbone_backward(params, h, std::move(drep), grads, scale);
  }
  double reg = 0.0;
  for (const auto& l : params.backbone) reg += weight_sq(l);
  for (std::size_t l = 0; l < params.backbone.size(); ++l)
    add_decay(params.backbone[l], grads.backbone[l], scale * 2.0 * lambda_m);
  for (std::size_t t = 0; t < params.pseudo_heads.size(); ++t) {
    if (only_trial >= 0 && static_cast<std::size_t>(only_trial) != t) continue;
    reg += weight_sq(params.pseudo_heads[t]);
    add_decay(params.pseudo_heads[t], grads.pseudo_heads[t], scale * 2.0 * lambda_m);
  }
  return loss + lambda_m * reg;
}

double loss_manifold(const NetworkParams& params, const FeatureSet& inputs,
                     const PseudoLabelEnsemble& ensemble, std::span<const std::size_t> indices,
                     double lambda_m, std::ptrdiff_t only_trial) {
  if (params.pseudo_heads.size() != ensemble.n_trials)
    fail("loss_manifold: head count does not match ensemble trials");
  const std::size_t z = static_cast<std::size_t>(params.spec.n_pseudo_classes);
  double loss = 0.0;
  std::vector<std::vector<double>> h;
  std::vector<double> scores(z), probs;
  for (const std::size_t i : indices) {
    backbone_forward(params, {inputs.row(i), inputs.dim}, h);
    for (std::size_t t = 0; t < params.pseudo_heads.size(); ++t) {
      if (only_trial >= 0 && static_cast<std::size_t>(only_trial) != t) continue;
      linear_forward(params.pseudo_heads[t], h.back(), scores.data());
      loss += softmax_ce(scores, ensemble.at(i, t), probs);
    }
  }
  double reg = 0.0;
  for (const auto& l : params.backbone) reg += weight_sq(l);
  for (std::size_t t = 0; t < params.pseudo_heads.size(); ++t) {
    if (only_trial >= 0 && static_cast<std::size_t>(only_trial) != t) continue;
    reg += weight_sq(params.pseudo_heads[t]);
  }
  return loss + lambda_m * reg;
}

double loss_joint(const NetworkParams& params, const FeatureSet& labeled_fs,
                  std::span<const std::size_t> labeled_indices, const FeatureSet& pseudo_inputs,
                  const PseudoLabelEnsemble& ensemble, std::span<const std::size_t> pseudo_indices,
                  const TrainConfig& cfg) {
  double loss = 0.0;
  if (!labeled_indices.empty())
    loss += loss_supervised(params, labeled_fs, labeled_indices, cfg.lambda_s);
  if (!pseudo_indices.empty())
    loss += cfg.lambda * loss_manifold(params, pseudo_inputs, ensemble, pseudo_indices,
                                       cfg.lambda_m);
  return loss;
}

namespace {

// endless shuffled pass over a fixed index set
class BatchCycler {
 public:
  BatchCycler(std::vector<std::size_t> indices, std::uint64_t seed)
      : order_(std::move(indices)), rng_(seed) {
    rng_.shuffle(order_);
  }

  std::vector<std::size_t> next(std::size_t batch_size) {
    std::vector<std::size_t> batch;
    batch.reserve(batch_size);
    while (batch.size() < batch_size) {
      if (cursor_ == order_.size()) {
        rng_.shuffle(order_);
        cursor_ = 0;
      }
      batch.push_back(order_[cursor_++]);
    }
    return batch;
  }

 private:
  std::vector<std::size_t> order_;
  Rng rng_;
  std::size_t cursor_ = 0;
};

void sgd_step(NetworkParams& params, const NetworkParams& grads, double lr) {
  auto step = [&](LinearLayer& l, const LinearLayer& g) {
    for (std::size_t i = 0; i < l.w.size(); ++i) l.w[i] -= lr * g.w[i];
    for (std::size_t i = 0; i < l.b.size(); ++i) l.b[i] -= lr * g.b[i];
  };
  for (std::size_t l = 0; l < params.backbone.size(); ++l) step(params.backbone[l], grads.backbone[l]);
  if (params.supervised_head) step(*params.supervised_head, *grads.supervised_head);
  for (std::size_t t = 0; t < params.pseudo_heads.size(); ++t)
    step(params.pseudo_heads[t], grads.pseudo_heads[t]);
}

void zero_params(NetworkParams& p) {
  auto zero = [](LinearLayer& l) {
    std::fill(l.w.begin(), l.w.end(), 0.0);
    std::fill(l.b.begin(), l.b.end(), 0.0);
  };
  for (auto& l : p.backbone) zero(l);
  if (p.supervised_head) zero(*p.supervised_head);
  for (auto& l : p.pseudo_heads) zero(l);
}

}  // namespace

TrainResult train(NetworkParams params, const SupervisedStream& sup, const ManifoldStream& man,
                  const TrainConfig& cfg) {
  cfg.validate();
  const bool have_sup = !sup.empty();
  const bool have_man = !man.empty();
  if (!have_sup && !have_man) fail("train: both streams empty");
  if (have_man && man.ensemble->n_trials != params.pseudo_heads.size())
    fail("train: ensemble trial count does not match pseudo heads");

  TrainResult res;
  res.lambda_used = cfg.lambda;
  res.balance_loss_s = std::numeric_limits<double>::quiet_NaN();
  res.balance_loss_m = std::numeric_limits<double>::quiet_NaN();

  double lambda = cfg.lambda;
  const bool balancing = cfg.lambda_mode == LambdaMode::auto_balance && have_sup && have_man;
  if (balancing) lambda = 1.0;  // warmup value, replaced after the first epoch

  auto full_loss = [&](const NetworkParams& p) {
    double loss = 0.0;
    if (have_sup) loss += loss_supervised(p, *sup.features, sup.indices, cfg.lambda_s);
    if (have_man)
      loss += (have_sup ? lambda : 1.0) *
              loss_manifold(p, *man.inputs, *man.ensemble, man.indices, cfg.lambda_m);
    return loss;
  };

  res.epoch_loss.push_back(full_loss(params));

  BatchCycler sup_cycler(have_sup ? sup.indices : std::vector<std::size_t>{},
                         Rng::derive(cfg.seed, 1));
  BatchCycler man_cycler(have_man ? man.indices : std::vector<std::size_t>{},
                         Rng::derive(cfg.seed, 2));
  const std::size_t stream_max = std::max(have_sup ? sup.indices.size() : 0,
                                          have_man ? man.indices.size() : 0);
  const std::size_t steps_per_epoch = cfg.steps_per_epoch > 0
                                          ? cfg.steps_per_epoch
                                          : (stream_max + cfg.batch_size - 1) / cfg.batch_size;

  NetworkParams grads = NetworkParams::zeros(params.spec);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      zero_params(grads);
      double step_loss = 0.0;
      if (have_sup) {
        const auto batch = sup_cycler.next(std::min(cfg.batch_size, sup.indices.size()));
        step_loss += grad_supervised(params, *sup.features, batch, cfg.lambda_s, grads, 1.0);
      }
      if (have_man) {
        const auto batch = man_cycler.next(std::min(cfg.batch_size, man.indices.size()));
        const double scale = have_sup ? lambda : 1.0;
        step_loss += scale * grad_manifold(params, *man.inputs, *man.ensemble, batch,
                                           cfg.lambda_m, grads, scale);
      }
      if (!std::isfinite(step_loss))
        fail("train: non-finite loss at epoch " + std::to_string(epoch) + ", step " +
             std::to_string(step));
      sgd_step(params, grads, cfg.learning_rate);
    }
    if (balancing && epoch == 0) {
      const double ls = loss_supervised(params, *sup.features, sup.indices, cfg.lambda_s);
      const double lm = loss_manifold(params, *man.inputs, *man.ensemble, man.indices,
                                      cfg.lambda_m);
      lambda = lm > 0.0 ? ls / lm : 1.0;
      res.balance_loss_s = ls;
      res.balance_loss_m = lm;
      res.lambda_used = lambda;
    }
    const double epoch_loss = full_loss(params);
    if (!std::isfinite(epoch_loss))
      fail("train: non-finite loss after epoch " + std::to_string(epoch));
    res.epoch_loss.push_back(epoch_loss);
  }
  if (!balancing) res.lambda_used = have_sup && have_man ? lambda : 1.0;
  res.params = std::move(params);
  return res;
}

namespace {

constexpr char kModelMagic[4] = {'M', 'F', 'M', 'D'};
constexpr std::uint32_t kModelVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& path, const char* what) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) fail(path + ": truncated model file while reading " + what);
  return value;
}

void write_tensor(std::ostream& out, const std::vector<double>& v) {
  std::vector<float> raw(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) raw[i] = static_cast<float>(v[i]);
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(float)));
}

void read_tensor(std::istream& in, const std::string& path, std::vector<double>& v) {
  std::vector<float> raw(v.size());
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size() * sizeof(float)));
  if (!in) fail(path + ": model tensor shape mismatch (truncated payload)");
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(raw[i]);
}

}  // namespace

void save_model(const NetworkParams& params, const std::string& path) {
  params.spec.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(path + ": cannot open for writing");
  out.write(kModelMagic, 4);
  write_pod(out, kModelVersion);
  write_pod(out, static_cast<std::uint32_t>(params.spec.input_dim));
  write_pod(out, static_cast<std::uint32_t>(params.spec.hidden_dims.size()));
  for (const std::size_t w : params.spec.hidden_dims)
    write_pod(out, static_cast<std::uint32_t>(w));
  write_pod(out, static_cast<std::uint8_t>(params.spec.activation));
  write_pod(out, static_cast<std::uint32_t>(params.spec.n_classes));
  write_pod(out, static_cast<std::uint32_t>(params.spec.n_trials));
  write_pod(out, static_cast<std::uint32_t>(params.spec.n_pseudo_classes));
  auto dump = [&](const LinearLayer& l) {
    write_tensor(out, l.w);
    write_tensor(out, l.b);
  };
  for (const auto& l : params.backbone) dump(l);
  if (params.supervised_head) dump(*params.supervised_head);
  for (const auto& l : params.pseudo_heads) dump(l);
  if (!out) fail(path + ": write failed");
}

NetworkParams load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path + ": cannot open for reading");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kModelMagic, 4) != 0)
    fail(path + ": bad magic, not a model file");
  if (read_pod<std::uint32_t>(in, path, "version") != kModelVersion)
    fail(path + ": unsupported model version");
  NetworkSpec spec;
  spec.input_dim = read_pod<std::uint32_t>(in, path, "input_dim");
  const auto n_hidden = read_pod<std::uint32_t>(in, path, "hidden layer count");
  for (std::uint32_t i = 0; i < n_hidden; ++i)
    spec.hidden_dims.push_back(read_pod<std::uint32_t>(in, path, "hidden width"));
  const auto act = read_pod<std::uint8_t>(in, path, "activation");
  if (act > 1) fail(path + ": unknown activation id " + std::to_string(act));
  spec.activation = static_cast<Activation>(act);
  spec.n_classes = static_cast<std::int32_t>(read_pod<std::uint32_t>(in, path, "class count"));
  spec.n_trials = read_pod<std::uint32_t>(in, path, "trial count");
  spec.n_pseudo_classes =
      static_cast<std::int32_t>(read_pod<std::uint32_t>(in, path, "pseudo class count"));
  spec.validate();

  NetworkParams params = NetworkParams::zeros(spec);
  // a spec-only file (no tensor payload) loads as a zero-initialized network
  if (in.peek() == std::char_traits<char>::eof()) return params;
  auto slurp = [&](LinearLayer& l) {
    read_tensor(in, path, l.w);
    read_tensor(in, path, l.b);
  };
  for (auto& l : params.backbone) slurp(l);
  if (params.supervised_head) slurp(*params.supervised_head);
  for (auto& l : params.pseudo_heads) slurp(l);
  in.peek();
  if (!in.eof()) fail(path + ": model tensor shape mismatch (trailing bytes)");
  return params;
}

}  // namespace mfn
