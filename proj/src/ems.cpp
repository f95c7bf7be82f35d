#include "manifoldnet/ems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "manifoldnet/parallel.hpp"

namespace mfn {

void EmsConfig::validate(std::size_t n_samples) const {
  if (z < 2) throw std::invalid_argument("ems.z must be >= 2");
  if (t < 1) throw std::invalid_argument("ems.t must be >= 1");
  if (z > n_samples)
    throw std::invalid_argument("ems.z=" + std::to_string(z) + " exceeds N=" +
                                std::to_string(n_samples));
  if (z * (k + 1) > n_samples)
    throw std::invalid_argument("ems: prototype sets do not fit, z*(k+1)=" +
                                std::to_string(z * (k + 1)) + " > N=" +
                                std::to_string(n_samples));
  if (lr_reg < 0.0) throw std::invalid_argument("ems.lr_reg must be >= 0");
  if (lr_iters < 1) throw std::invalid_argument("ems.lr_iters must be >= 1");
}

std::vector<std::size_t> select_seeds(const FeatureSet& fs, std::size_t z, Rng& rng,
                                      KMeansInit init) {
  const KMeansResult km = kmeans(fs, z, rng, kKMeansMaxIterDefault, kKMeansTolDefault, init);
  const std::size_t d = fs.dim;
  std::vector<std::size_t> seeds(z);
  std::vector<double> best(z, std::numeric_limits<double>::infinity());
  std::vector<bool> found(z, false);
  // nearest member of each cluster to its centroid; clusters are nonempty
  // after reseeding, so seeds are distinct
  for (std::size_t i = 0; i < fs.n_samples; ++i) {
    const std::size_t c = static_cast<std::size_t>(km.assignments[i]);
    const double dd = l2_distance_sq({fs.row(i), d}, {km.centroids.data() + c * d, d});
    if (dd < best[c]) {  // strict: ties keep the lowest index
      best[c] = dd;
      seeds[c] = i;
      found[c] = true;
    }
  }
  for (std::size_t c = 0; c < z; ++c) {
    if (!found[c]) throw std::runtime_error("select_seeds: empty cluster " + std::to_string(c));
  }
  return seeds;
}

SeedSet grow_seeds(const FeatureSet& fs, const std::vector<std::size_t>& seeds, std::size_t k) {
  if (k > fs.n_samples - 1) throw std::invalid_argument("grow_seeds: k exceeds N-1");
  SeedSet set;
  set.members.reserve(seeds.size() * (k + 1));
  for (std::size_t c = 0; c < seeds.size(); ++c) {
    const auto cls = static_cast<std::int32_t>(c);
    set.members.emplace_back(seeds[c], cls);
    if (k == 0) continue;
    for (const std::size_t nb : knn(fs, seeds[c], k)) set.members.emplace_back(nb, cls);
  }
  return set;
}

namespace {

// softmax cross-entropy objective over the prototype set, log-sum-exp form
double segmenter_loss(const FeatureSet& fs, const SeedSet& set, const LinearSegmenter& seg,
                      double reg) {
  const std::size_t z = seg.n_classes;
  const std::size_t d = seg.dim;
  double loss = 0.0;
  std::vector<double> scores(z);
  for (const auto& [idx, cls] : set.members) {
    const double* x = fs.row(idx);
    double max_s = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < z; ++c) {
      double s = seg.biases[c];
      const double* w = seg.weights.data() + c * d;
      for (std::size_t j = 0; j < d; ++j) s += w[j] * x[j];
      scores[c] = s;
      max_s = std::max(max_s, s);
    }
    double sum_exp = 0.0;
    for (std::size_t c = 0; c < z; ++c) sum_exp += std::exp(scores[c] - max_s);
    loss += max_s + std::log(sum_exp) - scores[static_cast<std::size_t>(cls)];
  }
  double w2 = 0.0;
  for (const double w : seg.weights) w2 += w * w;
  return loss + reg * w2;
}

void segmenter_gradient(const FeatureSet& fs, const SeedSet& set, const LinearSegmenter& seg,
                        double reg, std::vector<double>& gw, std::vector<double>& gb) {
  const std::size_t z = seg.n_classes;
  const std::size_t d = seg.dim;
  std::fill(gw.begin(), gw.end(), 0.0);
  std::fill(gb.begin(), gb.end(), 0.0);
  std::vector<double> p(z);
  for (const auto& [idx, cls] : set.members) {
    const double* x = fs.row(idx);
    double max_s = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < z; ++c) {
      double s = seg.biases[c];
      const double* w = seg.weights.data() + c * d;
      for (std::size_t j = 0; j < d; ++j) s += w[j] * x[j];
      p[c] = s;
      max_s = std::max(max_s, s);
    }
    double sum_exp = 0.0;
    for (std::size_t c = 0; c < z; ++c) {
      p[c] = std::exp(p[c] - max_s);
      sum_exp += p[c];
    }
    for (std::size_t c = 0; c < z; ++c) {
      const double delta = p[c] / sum_exp - (static_cast<std::int32_t>(c) == cls ? 1.0 : 0.0);
      gb[c] += delta;
      double* g = gw.data() + c * d;
      for (std::size_t j = 0; j < d; ++j) g[j] += delta * x[j];
    }
  }
  for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += 2.0 * reg * seg.weights[i];
}

}  // namespace

LinearSegmenter train_segmenter(const FeatureSet& fs, const SeedSet& seed_set,
                                const EmsConfig& cfg) {
  if (seed_set.members.empty()) throw std::invalid_argument("train_segmenter: empty seed set");
  LinearSegmenter seg;
  seg.n_classes = cfg.z;
  seg.dim = fs.dim;
  seg.weights.assign(cfg.z * fs.dim, 0.0);
  seg.biases.assign(cfg.z, 0.0);

  std::vector<double> gw(seg.weights.size()), gb(seg.biases.size());
  double loss = segmenter_loss(fs, seed_set, seg, cfg.lr_reg);
  if (!std::isfinite(loss)) throw TrialFailure("train_segmenter: non-finite initial loss");
  double step = 1.0;
  LinearSegmenter trial = seg;
  for (std::size_t iter = 0; iter < cfg.lr_iters; ++iter) {
    segmenter_gradient(fs, seed_set, seg, cfg.lr_reg, gw, gb);
    double accepted_loss = loss;
    bool accepted = false;
    while (step > 1e-18) {
      for (std::size_t i = 0; i < trial.weights.size(); ++i)
        trial.weights[i] = seg.weights[i] - step * gw[i];
      for (std::size_t i = 0; i < trial.biases.size(); ++i)
        trial.biases[i] = seg.biases[i] - step * gb[i];
      const double cand = segmenter_loss(fs, seed_set, trial, cfg.lr_reg);
      if (std::isfinite(cand) && cand <= loss) {
        accepted_loss = cand;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no descent direction at machine precision
    seg.weights.swap(trial.weights);
    seg.biases.swap(trial.biases);
    const double improvement = loss - accepted_loss;
    loss = accepted_loss;
    if (!std::isfinite(loss)) throw TrialFailure("train_segmenter: non-finite loss");
    if (improvement <= 1e-12 * std::max(1.0, std::abs(loss))) break;
  }
  return seg;
}

std::vector<std::int32_t> segment_all(const FeatureSet& fs, const LinearSegmenter& seg) {
  if (seg.dim != fs.dim) throw std::invalid_argument("segment_all: dimension mismatch");
  const std::size_t z = seg.n_classes;
  const std::size_t d = seg.dim;
  std::vector<std::int32_t> out(fs.n_samples);
  for (std::size_t i = 0; i < fs.n_samples; ++i) {
    const double* x = fs.row(i);
    double best = -std::numeric_limits<double>::infinity();
    std::int32_t best_c = 0;
    for (std::size_t c = 0; c < z; ++c) {
      double s = seg.biases[c];
      const double* w = seg.weights.data() + c * d;
      for (std::size_t j = 0; j < d; ++j) s += w[j] * x[j];
      if (s > best) {  // strict: ties keep the lowest class
        best = s;
        best_c = static_cast<std::int32_t>(c);
      }
    }
    out[i] = best_c;
  }
  return out;
}

PseudoLabelEnsemble run_ems(const FeatureSet& fs, const EmsConfig& cfg, std::size_t workers) {
  cfg.validate(fs.n_samples);
  PseudoLabelEnsemble ens;
  ens.n_samples = fs.n_samples;
  ens.n_trials = cfg.t;
  ens.n_pseudo_classes = static_cast<std::int32_t>(cfg.z);
  ens.labels.assign(fs.n_samples * cfg.t, 0);

  parallel_for(cfg.t, workers, [&](std::size_t t) {
    const std::uint64_t trial_seed = Rng::derive(cfg.master_seed, t);
    std::vector<std::int32_t> column;
    bool done = false;
    for (std::size_t attempt = 0; attempt <= 3 && !done; ++attempt) {
      const std::uint64_t seed = attempt == 0 ? trial_seed : Rng::derive(trial_seed, attempt);
      Rng rng(seed);
      try {
        const auto seeds = select_seeds(fs, cfg.z, rng, cfg.kmeans_init);
        const SeedSet set = grow_seeds(fs, seeds, cfg.k);
        const LinearSegmenter seg = train_segmenter(fs, set, cfg);
        column = segment_all(fs, seg);
        done = true;
      } catch (const TrialFailure&) {
        if (attempt == 3)
          throw std::runtime_error("run_ems: trial " + std::to_string(t) +
                                   " failed after 3 retries (non-finite segmenter loss)");
      }
    }
    for (std::size_t i = 0; i < fs.n_samples; ++i) ens.at(i, t) = column[i];
  });
  return ens;
}

}  // namespace mfn
