#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "manifoldnet/tasks.hpp"

using namespace mfn;

namespace {

// brute-force recall@1 oracle: full distance matrix, (distance, index) sort
double recall_oracle(const FeatureSet& set) {
  std::size_t hits = 0;
  for (std::size_t q = 0; q < set.n_samples; ++q) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_i = set.n_samples;
    for (std::size_t i = 0; i < set.n_samples; ++i) {
      if (i == q) continue;
      double d = 0.0;
      for (std::size_t j = 0; j < set.dim; ++j) {
        const double diff = set.row(i)[j] - set.row(q)[j];
        d += diff * diff;
      }
      if (d < best || (d == best && i < best_i)) {
        best = d;
        best_i = i;
      }
    }
    if (set.labels[best_i] == set.labels[q]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(set.n_samples);
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

}  // namespace

TEST_CASE("recall@1: two tight well-separated pairs score 1") {
  FeatureSet fs;
  fs.n_samples = 4;
  fs.dim = 1;
  fs.features = {0.0, 0.1, 10.0, 10.1};
  fs.labels = {0, 0, 1, 1};
  fs.n_classes = 2;
  CHECK(recall_at_1(fs) == 1.0);
}

TEST_CASE("recall@1: alternating labels on a line score 0") {
  FeatureSet fs;
  fs.n_samples = 4;
  fs.dim = 1;
  fs.features = {0.0, 1.0, 2.0, 3.0};
  fs.labels = {0, 1, 0, 1};
  fs.n_classes = 2;
  CHECK(recall_at_1(fs) == 0.0);
}

TEST_CASE("recall@1: separate query and gallery sets, no self-exclusion") {
  FeatureSet gallery;
  gallery.n_samples = 2;
  gallery.dim = 1;
  gallery.features = {0.0, 10.0};
  gallery.labels = {0, 1};
  gallery.n_classes = 2;
  FeatureSet queries;
  queries.n_samples = 3;
  queries.dim = 1;
  queries.features = {1.0, 9.0, 4.0};  // 4.0 is nearer 0.0, label 0 != 1
  queries.labels = {0, 1, 1};
  queries.n_classes = 2;
  CHECK(recall_at_1(queries, gallery, false) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("recall@1: exclude_self flips the trivial self-match") {
  FeatureSet fs;
  fs.n_samples = 2;
  fs.dim = 1;
  fs.features = {0.0, 1.0};
  fs.labels = {0, 1};
  fs.n_classes = 2;
  // with self-matching every query finds itself
  CHECK(recall_at_1(fs, fs, false) == 1.0);
  // leave-one-out: the only other point has the wrong label
  CHECK(recall_at_1(fs, fs, true) == 0.0);
}

TEST_CASE("property: recall@1 equals the brute-force oracle on random instances") {
  Rng rng(31);
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = 3 + rng.next_below(30);
    const std::size_t d = 1 + rng.next_below(5);
    FeatureSet fs = fixtures::random_features(n, d, rng, false);
    fs.n_classes = 3;
    fs.labels.resize(n);
    for (auto& l : fs.labels) l = static_cast<std::int32_t>(rng.next_below(3));
    CHECK(recall_at_1(fs) == doctest::Approx(recall_oracle(fs)).epsilon(1e-15));
  }
}

TEST_CASE("purity hand examples") {
  const std::vector<std::int32_t> truth = {0, 0, 1, 1};
  CHECK(purity(std::vector<std::int32_t>{0, 0, 1, 1}, truth) == 1.0);
  CHECK(purity(std::vector<std::int32_t>{1, 1, 0, 0}, truth) == 1.0);  // relabeling is free
  CHECK(purity(std::vector<std::int32_t>{0, 1, 0, 1}, truth) == 0.5);
  CHECK(purity(std::vector<std::int32_t>{0, 0, 0, 0}, truth) == 0.5);
  // every sample its own cluster is trivially pure
  CHECK(purity(std::vector<std::int32_t>{0, 1, 2, 3}, truth) == 1.0);
}

TEST_CASE("purity: majority overlap, 2 clusters over 3 classes") {
  // cluster 0 holds {0,0,1} -> 2; cluster 1 holds {2,2,1,1} -> 2; (2+2)/7
  const std::vector<std::int32_t> pseudo = {0, 0, 0, 1, 1, 1, 1};
  const std::vector<std::int32_t> truth = {0, 0, 1, 2, 2, 1, 1};
  CHECK(purity(pseudo, truth) == doctest::Approx(4.0 / 7.0).epsilon(1e-15));
}

TEST_CASE("ensemble_purity averages per-trial purity and skips unlabeled rows") {
  FeatureSet fs;
  fs.n_samples = 4;
  fs.dim = 1;
  fs.features = {0, 1, 2, 3};
  fs.labels = {0, 0, 1, -1};  // last row unlabeled
  fs.n_classes = 2;
  PseudoLabelEnsemble e;
  e.n_samples = 4;
  e.n_trials = 2;
  e.n_pseudo_classes = 2;
  // trial 0 perfect on the labeled rows; trial 1 puts everything in one cluster
  e.labels = {0, 0, 0, 1, 1, 0, 0, 1};  // sample-major: rows (t0,t1)
  // labeled rows: t0 = {0,0,1} pure; t1 = {0,1,0} -> majority 2/3
  CHECK(ensemble_purity(e, fs) == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0).epsilon(1e-12));
}

TEST_CASE("accuracy: zero network predicts class 0 everywhere") {
  NetworkSpec spec;
  spec.input_dim = 2;
  spec.n_classes = 3;
  const NetworkParams p = NetworkParams::zeros(spec);
  FeatureSet fs;
  fs.n_samples = 4;
  fs.dim = 2;
  fs.features = {1, 2, 3, 4, 5, 6, 7, 8};
  fs.labels = {0, 1, 0, 2};
  fs.n_classes = 3;
  CHECK(accuracy(p, fs, iota_indices(4)) == 0.5);
}

TEST_CASE("embed_all: identity-width backbone carries labels through") {
  Rng rng(33);
  NetworkSpec spec;
  spec.input_dim = 3;
  spec.hidden_dims = {5};
  spec.n_classes = 2;
  const NetworkParams p = NetworkParams::glorot(spec, rng);
  FeatureSet fs = fixtures::random_features(6, 3, rng, true, 2);
  const FeatureSet emb = embed_all(p, fs);
  CHECK(emb.n_samples == 6);
  CHECK(emb.dim == 5);
  CHECK(emb.labels == fs.labels);
  CHECK(emb.n_classes == fs.n_classes);
  for (std::size_t i = 0; i < 6; ++i) {
    const auto one = embed(p, std::span<const double>(fs.row(i), 3));
    for (std::size_t j = 0; j < 5; ++j) CHECK(emb.row(i)[j] == one[j]);
  }
}

TEST_CASE("MetricsReport::to_lines omits unmeasured fields and keys rounds") {
  MetricsReport r;
  r.accuracy = 0.9;
  r.round_test_accuracy = {0.5, 0.75};
  r.extra.emplace_back("mean_lambda", 2.0);
  const auto lines = r.to_lines();
  REQUIRE(lines.size() == 4);
  CHECK(lines[0].first == "accuracy");
  CHECK(lines[0].second == 0.9);
  bool saw_r1 = false, saw_r2 = false, saw_extra = false;
  for (const auto& [k, v] : lines) {
    if (k == "round_1_test_accuracy") saw_r1 = v == 0.5;
    if (k == "round_2_test_accuracy") saw_r2 = v == 0.75;
    if (k == "mean_lambda") saw_extra = v == 2.0;
    CHECK(k != "recall_at_1");  // unmeasured
  }
  CHECK(saw_r1);
  CHECK(saw_r2);
  CHECK(saw_extra);
}

TEST_CASE("run_imitation improves recall@1 when the student is a noisy teacher") {
  Rng rng(35);
  // clean teacher blobs; student = teacher plus heavy isotropic noise
  const FeatureSet teacher = fixtures::blobs(fixtures::axis_centers(3, 8, 10.0), 40, 0.5, rng);
  FeatureSet student = teacher;
  for (auto& v : student.features) v += 6.0 * rng.next_normal();

  ImitationSetup setup;
  setup.teacher_features = teacher;
  setup.student_features = student;
  setup.ems_cfg.z = 3;
  setup.ems_cfg.t = 8;
  setup.ems_cfg.k = 6;
  setup.ems_cfg.master_seed = 7;
  setup.train_cfg.epochs = 30;
  setup.train_cfg.learning_rate = 0.005;
  setup.train_cfg.batch_size = 32;
  setup.train_cfg.seed = 7;
  setup.hidden_dims = {32};

  const ImitationResult res = run_imitation(setup);
  CHECK(res.report.recall_at_1_before < 1.0);
  CHECK(res.report.recall_at_1 > res.report.recall_at_1_before);
  CHECK(res.report.purity >= 0.9);  // EMS on clean blobs should be near-pure
  CHECK(res.params.spec.n_trials == 8);
  CHECK(!res.params.spec.hidden_dims.empty());
}

TEST_CASE("run_imitation: 'before' metric is a property of the student features alone") {
  Rng rng(36);
  const FeatureSet teacher = fixtures::blobs(fixtures::axis_centers(2, 4, 8.0), 20, 0.4, rng);
  FeatureSet student = teacher;
  for (auto& v : student.features) v += 2.0 * rng.next_normal();

  ImitationSetup setup;
  setup.teacher_features = teacher;
  setup.student_features = student;
  setup.ems_cfg.z = 2;
  setup.ems_cfg.t = 3;
  setup.ems_cfg.k = 4;
  setup.train_cfg.epochs = 2;
  const ImitationResult res = run_imitation(setup);
  CHECK(res.report.recall_at_1_before ==
        doctest::Approx(recall_at_1(student)).epsilon(1e-15));
}

TEST_CASE("run_semisup: reports per-round accuracy, lambda, and a baseline") {
  Rng rng(37);
  FeatureSet fs = fixtures::blobs(fixtures::axis_centers(2, 4, 8.0), 60, 0.6, rng);
  SplitSpec split;
  // 4 labels per class; blobs() lays classes out contiguously
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 4; ++i) split.labeled_indices.push_back(c * 60 + i);
  for (std::size_t i = 0; i < fs.n_samples; ++i) {
    if (i % 60 < 4) continue;
    if (i % 5 == 4) split.test_indices.push_back(i);
    else split.unlabeled_indices.push_back(i);
  }
  split.validate(fs.n_samples);

  SemiSupSetup setup;
  setup.features = fs;
  setup.split = split;
  setup.ems_cfg.z = 4;
  setup.ems_cfg.t = 6;
  setup.ems_cfg.k = 5;
  setup.ems_cfg.master_seed = 11;
  setup.train_cfg.epochs = 8;
  setup.train_cfg.learning_rate = 0.01;
  setup.train_cfg.batch_size = 16;
  setup.train_cfg.seed = 11;
  setup.train_cfg.lambda_mode = LambdaMode::auto_balance;
  setup.refine_rounds = 2;
  setup.hidden_dims = {16};

  const SemiSupResult res = run_semisup(setup);
  REQUIRE(res.report.round_test_accuracy.size() == 2);
  CHECK(res.report.accuracy == res.report.round_test_accuracy.back());
  CHECK(res.report.accuracy >= 0.0);
  CHECK(res.report.accuracy <= 1.0);
  CHECK(res.report.baseline_accuracy >= 0.0);
  bool saw_lambda = false, saw_mean = false;
  for (const auto& [k, v] : res.report.extra) {
    if (k == "round_1_lambda") saw_lambda = v > 0.0;
    if (k == "mean_lambda") saw_mean = v > 0.0;
  }
  CHECK(saw_lambda);
  CHECK(saw_mean);
  CHECK(res.params.spec.n_classes == 2);
  // easy blobs with auto-balance: the joint model should classify well
  CHECK(res.report.accuracy >= 0.9);
}

TEST_CASE("run_semisup is deterministic for a fixed seed") {
  Rng rng(38);
  FeatureSet fs = fixtures::blobs(fixtures::axis_centers(2, 3, 6.0), 30, 0.5, rng);
  SplitSpec split;
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 3; ++i) split.labeled_indices.push_back(c * 30 + i);
  for (std::size_t i = 0; i < fs.n_samples; ++i) {
    if (i % 30 < 3) continue;
    if (i % 4 == 3) split.test_indices.push_back(i);
    else split.unlabeled_indices.push_back(i);
  }

  SemiSupSetup setup;
  setup.features = fs;
  setup.split = split;
  setup.ems_cfg.z = 3;
  setup.ems_cfg.t = 4;
  setup.ems_cfg.k = 3;
  setup.ems_cfg.master_seed = 5;
  setup.train_cfg.epochs = 4;
  setup.train_cfg.batch_size = 8;
  setup.train_cfg.seed = 5;
  setup.refine_rounds = 2;
  setup.hidden_dims = {8};

  const SemiSupResult a = run_semisup(setup);
  const SemiSupResult b = run_semisup(setup);
  CHECK(a.params == b.params);
  CHECK(a.report.round_test_accuracy == b.report.round_test_accuracy);
  CHECK(a.report.baseline_accuracy == b.report.baseline_accuracy);

  // worker count must not change the outcome
  SemiSupSetup wide = setup;
  wide.workers = 8;
  const SemiSupResult c = run_semisup(wide);
  CHECK(a.params == c.params);
}

TEST_CASE("run_semisup rejects an empty labeled split") {
  Rng rng(39);
  SemiSupSetup setup;
  setup.features = fixtures::blobs(fixtures::axis_centers(2, 3, 6.0), 10, 0.5, rng);
  for (std::size_t i = 0; i < setup.features.n_samples; ++i)
    setup.split.unlabeled_indices.push_back(i);
  CHECK_THROWS(run_semisup(setup));
}
