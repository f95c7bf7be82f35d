#include "manifoldnet/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "manifoldnet/neighbors.hpp"
#include "manifoldnet/parallel.hpp"

namespace mfn {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

}  // namespace

double recall_at_1(const FeatureSet& queries, const FeatureSet& gallery, bool exclude_self) {
  if (gallery.n_samples == 0) fail("recall_at_1: empty gallery");
  if (queries.dim != gallery.dim) fail("recall_at_1: embedding dimension mismatch");
  if (!queries.has_labels() || !gallery.has_labels()) fail("recall_at_1: labels required");
  if (exclude_self && queries.n_samples != gallery.n_samples)
    fail("recall_at_1: self-exclusion requires queries == gallery");

  std::vector<std::uint8_t> hit(queries.n_samples, 0);
  parallel_for(queries.n_samples, 0, [&](std::size_t q) {
    const std::span<const double> x(queries.row(q), queries.dim);
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_i = gallery.n_samples;
    for (std::size_t i = 0; i < gallery.n_samples; ++i) {
      if (exclude_self && i == q) continue;
      const double dd = l2_distance_sq(x, {gallery.row(i), gallery.dim});
      if (dd < best) {
        best = dd;
        best_i = i;
      }
    }
    if (best_i == gallery.n_samples) fail("recall_at_1: gallery exhausted by self-exclusion");
    hit[q] = gallery.labels[best_i] == queries.labels[q] ? 1 : 0;
  });
  std::size_t hits = 0;
  for (const auto h : hit) hits += h;
  return static_cast<double>(hits) / static_cast<double>(queries.n_samples);
}

double recall_at_1(const FeatureSet& set) { return recall_at_1(set, set, true); }

double purity(std::span<const std::int32_t> pseudo, std::span<const std::int32_t> truth) {
  if (pseudo.size() != truth.size()) fail("purity: length mismatch");
  if (pseudo.empty()) fail("purity: empty input");
  std::map<std::int32_t, std::map<std::int32_t, std::size_t>> overlap;
  for (std::size_t i = 0; i < pseudo.size(); ++i) ++overlap[pseudo[i]][truth[i]];
  std::size_t agree = 0;
  for (const auto& [cluster, counts] : overlap) {
    std::size_t best = 0;
    for (const auto& [cls, count] : counts) best = std::max(best, count);
    agree += best;
  }
  return static_cast<double>(agree) / static_cast<double>(pseudo.size());
}

double ensemble_purity(const PseudoLabelEnsemble& ensemble, const FeatureSet& fs) {
  if (!fs.has_labels()) fail("ensemble_purity: labels required");
  if (ensemble.n_samples != fs.n_samples) fail("ensemble_purity: sample count mismatch");
  std::vector<std::int32_t> truth, pseudo;
  double total = 0.0;
  for (std::size_t t = 0; t < ensemble.n_trials; ++t) {
    truth.clear();
    pseudo.clear();
    for (std::size_t i = 0; i < fs.n_samples; ++i) {
      if (!fs.label(i)) continue;
      truth.push_back(fs.labels[i]);
      pseudo.push_back(ensemble.at(i, t));
    }
    total += purity(pseudo, truth);
  }
  return total / static_cast<double>(ensemble.n_trials);
}

double accuracy(const NetworkParams& params, const FeatureSet& fs,
                std::span<const std::size_t> indices) {
  if (!params.supervised_head) fail("accuracy: network has no supervised head");
  if (indices.empty()) fail("accuracy: empty index set");
  std::size_t correct = 0;
  for (const std::size_t i : indices) {
    const auto label = fs.label(i);
    if (!label) fail("accuracy: sample " + std::to_string(i) + " has no label");
    const ForwardResult out = forward(params, {fs.row(i), fs.dim});
    std::size_t best = 0;
    for (std::size_t c = 1; c < out.supervised_scores.size(); ++c)
      if (out.supervised_scores[c] > out.supervised_scores[best]) best = c;
    if (static_cast<std::int32_t>(best) == *label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(indices.size());
}

FeatureSet embed_all(const NetworkParams& params, const FeatureSet& fs) {
  FeatureSet out;
  out.n_samples = fs.n_samples;
  out.dim = params.spec.embed_dim();
  out.labels = fs.labels;
  out.n_classes = fs.n_classes;
  out.features.resize(out.n_samples * out.dim);
  parallel_for(fs.n_samples, 0, [&](std::size_t i) {
    const auto rep = embed(params, {fs.row(i), fs.dim});
    std::copy(rep.begin(), rep.end(), out.features.begin() + static_cast<std::ptrdiff_t>(i * out.dim));
  });
  return out;
}

std::vector<std::pair<std::string, double>> MetricsReport::to_lines() const {
  std::vector<std::pair<std::string, double>> lines;
  auto put = [&](const char* key, double v) {
    if (v >= 0.0) lines.emplace_back(key, v);
  };
  put("accuracy", accuracy);
  put("recall_at_1_before", recall_at_1_before);
  put("recall_at_1", recall_at_1);
  put("purity", purity);
  put("baseline_accuracy", baseline_accuracy);
  for (std::size_t r = 0; r < round_test_accuracy.size(); ++r)
    lines.emplace_back("round_" + std::to_string(r + 1) + "_test_accuracy",
                       round_test_accuracy[r]);
  for (const auto& [k, v] : extra) lines.emplace_back(k, v);
  return lines;
}

ImitationResult run_imitation(const ImitationSetup& setup) {
  const FeatureSet& teacher = setup.teacher_features;
  const FeatureSet& student = setup.student_features;
  if (teacher.n_samples != student.n_samples)
    fail("run_imitation: teacher and student sample counts differ");
  const FeatureSet& eval_labels = student.has_labels() ? student : teacher;
  if (!eval_labels.has_labels())
    fail("run_imitation: labels required on teacher or student for retrieval evaluation");
  setup.ems_cfg.validate(teacher.n_samples);
  setup.train_cfg.validate();

  MetricsReport report;
  {
    FeatureSet before = student;
    before.labels = eval_labels.labels;
    before.n_classes = eval_labels.n_classes;
    report.recall_at_1_before = recall_at_1(before);
  }

  // pseudo-labels from the teacher's manifold; teacher is unused afterwards
  PseudoLabelEnsemble ensemble;
  if (setup.normalize) {
    ensemble = run_ems(normalize_l2(teacher), setup.ems_cfg, setup.workers);
  } else {
    ensemble = run_ems(teacher, setup.ems_cfg, setup.workers);
  }
  if (eval_labels.has_labels()) {
    FeatureSet labeled = teacher;
    labeled.labels = eval_labels.labels;
    labeled.n_classes = eval_labels.n_classes;
    report.purity = ensemble_purity(ensemble, labeled);
  }

  NetworkSpec spec;
  spec.input_dim = student.dim;
  spec.hidden_dims = setup.hidden_dims;
  spec.activation = setup.activation;
  spec.n_classes = 0;
  spec.n_trials = setup.ems_cfg.t;
  spec.n_pseudo_classes = static_cast<std::int32_t>(setup.ems_cfg.z);

  Rng init_rng(Rng::derive(setup.train_cfg.seed, 1000));
  NetworkParams params = NetworkParams::glorot(spec, init_rng);

  ManifoldStream man;
  man.inputs = &student;
  man.ensemble = &ensemble;
  man.indices.resize(student.n_samples);
  for (std::size_t i = 0; i < man.indices.size(); ++i) man.indices[i] = i;

  TrainResult trained = train(std::move(params), SupervisedStream{}, man, setup.train_cfg);

  FeatureSet emb = embed_all(trained.params, student);
  emb.labels = eval_labels.labels;
  emb.n_classes = eval_labels.n_classes;
  report.recall_at_1 = recall_at_1(emb);
  report.extra.emplace_back("final_train_loss", trained.epoch_loss.back());

  return ImitationResult{std::move(trained.params), std::move(report)};
}

SemiSupResult run_semisup(const SemiSupSetup& setup) {
  const FeatureSet& fs = setup.features;
  const SplitSpec& split = setup.split;
  split.validate(fs.n_samples);
  if (!fs.has_labels()) fail("run_semisup: features carry no labels");
  if (fs.n_classes < 2) fail("run_semisup: need at least two classes");
  if (split.labeled_indices.empty()) fail("run_semisup: empty labeled split");
  if (split.test_indices.empty()) fail("run_semisup: empty test split");
  for (const std::size_t i : split.labeled_indices)
    if (!fs.label(i)) fail("run_semisup: labeled index " + std::to_string(i) + " has no label");
  setup.train_cfg.validate();
  if (setup.refine_rounds < 1) fail("run_semisup: refine_rounds must be >= 1");
  const bool have_unlabeled = !split.unlabeled_indices.empty();
  if (have_unlabeled) setup.ems_cfg.validate(split.unlabeled_indices.size());

  NetworkSpec spec;
  spec.input_dim = fs.dim;
  spec.hidden_dims = setup.hidden_dims;
  spec.activation = setup.activation;
  spec.n_classes = fs.n_classes;
  spec.n_trials = have_unlabeled ? setup.ems_cfg.t : 0;
  spec.n_pseudo_classes = have_unlabeled ? static_cast<std::int32_t>(setup.ems_cfg.z) : 0;

  Rng init_rng(Rng::derive(setup.train_cfg.seed, 1000));
  NetworkParams joint_params = NetworkParams::glorot(spec, init_rng);

  // the baseline shares the joint run's init and labeled batch schedule
  NetworkSpec baseline_spec = spec;
  baseline_spec.n_trials = 0;
  baseline_spec.n_pseudo_classes = 0;
  NetworkParams baseline_params = NetworkParams::zeros(baseline_spec);
  baseline_params.backbone = joint_params.backbone;
  baseline_params.supervised_head = joint_params.supervised_head;

  SupervisedStream sup;
  sup.features = &fs;
  sup.indices = split.labeled_indices;

  const FeatureSet unlabeled_raw =
      have_unlabeled ? subset(fs, split.unlabeled_indices) : FeatureSet{};

  const std::size_t joint_steps =
      (std::max(split.labeled_indices.size(),
                have_unlabeled ? split.unlabeled_indices.size() : std::size_t{0}) +
       setup.train_cfg.batch_size - 1) /
      setup.train_cfg.batch_size;

  MetricsReport report;
  double lambda_sum = 0.0;
  for (std::size_t round = 0; round < setup.refine_rounds; ++round) {
    TrainConfig round_cfg = setup.train_cfg;
    round_cfg.seed = Rng::derive(setup.train_cfg.seed, round);
    round_cfg.steps_per_epoch = joint_steps;

    if (have_unlabeled) {
      // round 1 segments the input features; later rounds segment the
      // just-trained representation
      FeatureSet rep_space;
      if (round == 0) {
        rep_space = setup.normalize ? normalize_l2(unlabeled_raw) : unlabeled_raw;
      } else {
        rep_space = normalize_l2(embed_all(joint_params, unlabeled_raw));
      }
      EmsConfig ems_cfg = setup.ems_cfg;
      ems_cfg.master_seed = Rng::derive(setup.ems_cfg.master_seed, round);
      const PseudoLabelEnsemble ensemble = run_ems(rep_space, ems_cfg, setup.workers);

      // pseudo heads answer a fresh segmentation each round
      Rng head_rng(Rng::derive(setup.train_cfg.seed, 2000 + round));
      for (auto& head : joint_params.pseudo_heads) {
        const double bound = std::sqrt(6.0 / static_cast<double>(head.in + head.out));
        for (double& w : head.w) w = (2.0 * head_rng.next_real() - 1.0) * bound;
        std::fill(head.b.begin(), head.b.end(), 0.0);
      }

      ManifoldStream man;
      man.inputs = &unlabeled_raw;
      man.ensemble = &ensemble;
      man.indices.resize(unlabeled_raw.n_samples);
      for (std::size_t i = 0; i < man.indices.size(); ++i) man.indices[i] = i;

      TrainResult trained = train(std::move(joint_params), sup, man, round_cfg);
      joint_params = std::move(trained.params);
      lambda_sum += trained.lambda_used;
      report.extra.emplace_back("round_" + std::to_string(round + 1) + "_lambda",
                                trained.lambda_used);
    } else {
      TrainResult trained = train(std::move(joint_params), sup, ManifoldStream{}, round_cfg);
      joint_params = std::move(trained.params);
    }
    report.round_test_accuracy.push_back(accuracy(joint_params, fs, split.test_indices));
  }

  {
    TrainConfig base_cfg = setup.train_cfg;
    base_cfg.epochs = setup.train_cfg.epochs * setup.refine_rounds;
    base_cfg.steps_per_epoch = joint_steps;
    // same shuffling stream as the joint run's first-round supervised cycler
    base_cfg.seed = Rng::derive(setup.train_cfg.seed, 0);
    TrainResult base = train(std::move(baseline_params), sup, ManifoldStream{}, base_cfg);
    report.baseline_accuracy = accuracy(base.params, fs, split.test_indices);
  }

  report.accuracy = report.round_test_accuracy.back();
  if (have_unlabeled)
    report.extra.emplace_back("mean_lambda",
                              lambda_sum / static_cast<double>(setup.refine_rounds));
  return SemiSupResult{std::move(joint_params), std::move(report)};
}

}  // namespace mfn
