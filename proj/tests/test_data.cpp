#include <doctest.h>

#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "manifoldnet/data.hpp"

using namespace mfn;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("csv load: 3 rows, d=2, no labels") {
  const std::string path = fixtures::temp_path("plain.csv");
  {
    std::ofstream out(path);
    out << "id,label,f0,f1\n0,,1.0,2.0\n1,,3.0,4.0\n2,-1,5.0,6.0\n";
  }
  const FeatureSet fs = load_features(path);
  CHECK(fs.n_samples == 3);
  CHECK(fs.dim == 2);
  CHECK_FALSE(fs.has_labels());
  CHECK(fs.features[2] == 3.0);
  for (std::size_t i = 0; i < 3; ++i) CHECK_FALSE(fs.label(i).has_value());
}

TEST_CASE("csv load: label column populated, -1 means unlabeled") {
  const std::string path = fixtures::temp_path("labeled.csv");
  {
    std::ofstream out(path);
    out << "id,label,f0\n0,0,1.5\n1,1,2.5\n2,-1,3.5\n3,0,4.5\n";
  }
  const FeatureSet fs = load_features(path);
  CHECK(fs.n_classes == 2);
  CHECK(fs.label(0) == 0);
  CHECK(fs.label(1) == 1);
  CHECK_FALSE(fs.label(2).has_value());
}

TEST_CASE("csv errors carry the row number") {
  const std::string path = fixtures::temp_path("bad.csv");

  SUBCASE("dimension mismatch") {
    std::ofstream(path) << "id,label,f0,f1\n0,,1.0,2.0\n1,,3.0\n";
    CHECK_THROWS_WITH_AS(load_features(path), doctest::Contains("row 2"), std::runtime_error);
  }
  SUBCASE("non-finite value") {
    std::ofstream(path) << "id,label,f0\n0,,1.0\n1,,nan\n";
    CHECK_THROWS_WITH_AS(load_features(path), doctest::Contains("row 2"), std::runtime_error);
  }
  SUBCASE("malformed header") {
    std::ofstream(path) << "id,f0\n0,1.0\n";
    CHECK_THROWS_WITH_AS(load_features(path), doctest::Contains("header"), std::runtime_error);
  }
}

TEST_CASE("binary load: unlabeled sentinel in the label array") {
  const std::string path = fixtures::temp_path("mixed.mfnt");
  FeatureSet fs;
  fs.n_samples = 4;
  fs.dim = 3;
  fs.features = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
  fs.labels = {0, 1, -1, 0};
  fs.n_classes = 2;
  save_features(fs, path, FileFormat::binary);
  const FeatureSet back = load_features(path, FileFormat::binary);
  CHECK(back == fs);
  CHECK_FALSE(back.label(2).has_value());
  CHECK(back.label(3) == 0);
}

TEST_CASE("binary load rejects label >= declared C with row number") {
  const std::string path = fixtures::temp_path("badlabel.mfnt");
  FeatureSet fs;
  fs.n_samples = 2;
  fs.dim = 1;
  fs.features = {1.0, 2.0};
  fs.labels = {0, 1};
  fs.n_classes = 2;
  save_features(fs, path, FileFormat::binary);
  // corrupt label of row 1 to 7 (header is 4+4+8+4+1+4 = 25 bytes, features 8)
  {
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(25 + 8 + 4);
    const std::int32_t bad = 7;
    f.write(reinterpret_cast<const char*>(&bad), 4);
  }
  CHECK_THROWS_WITH_AS(load_features(path, FileFormat::binary), doctest::Contains("row 1"),
                       std::runtime_error);
}

TEST_CASE("single sample round trip") {
  FeatureSet fs;
  fs.n_samples = 1;
  fs.dim = 1;
  fs.features = {0.0};
  const std::string path = fixtures::temp_path("one.mfnt");
  save_features(fs, path, FileFormat::binary);
  CHECK(load_features(path, FileFormat::binary) == fs);
}

TEST_CASE("binary save is bit-exact: save(load(p)) == p") {
  mfn::Rng rng(7);
  const FeatureSet fs = fixtures::random_features(1000, 64, rng, true);
  const std::string p1 = fixtures::temp_path("rt1.mfnt");
  const std::string p2 = fixtures::temp_path("rt2.mfnt");
  save_features(fs, p1, FileFormat::binary);
  save_features(load_features(p1, FileFormat::binary), p2, FileFormat::binary);
  CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("property: load(save(x)) == x over random fixtures, both formats") {
  mfn::Rng rng(123);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = 1 + rng.next_below(40);
    const std::size_t d = 1 + rng.next_below(12);
    const bool with_labels = rng.next_below(2) == 0;
    FeatureSet fs = fixtures::random_features(n, d, rng, with_labels);
    if (with_labels) {
      // csv cannot carry a class count beyond the labels; pin C = max+1
      std::int32_t max_label = 0;
      bool any = false;
      for (auto& l : fs.labels)
        if (l >= 0) {
          max_label = std::max(max_label, l);
          any = true;
        }
      if (!any) fs.labels[0] = max_label;
      fs.n_classes = max_label + 1;
    }
    for (const auto format : {FileFormat::binary, FileFormat::csv}) {
      const std::string path =
          fixtures::temp_path(format == FileFormat::csv ? "prop.csv" : "prop.mfnt");
      save_features(fs, path, format);
      CHECK(load_features(path, format) == fs);
    }
  }
}

TEST_CASE("pseudo labels: tiny round trip") {
  PseudoLabelEnsemble e;
  e.n_samples = 2;
  e.n_trials = 1;
  e.n_pseudo_classes = 2;
  e.labels = {0, 1};
  const std::string path = fixtures::temp_path("tiny.mfpl");
  save_pseudo(e, path);
  CHECK(load_pseudo(path) == e);
}

TEST_CASE("pseudo labels: entry >= Z rejected naming (row, trial)") {
  PseudoLabelEnsemble e;
  e.n_samples = 2;
  e.n_trials = 2;
  e.n_pseudo_classes = 2;
  e.labels = {0, 1, 1, 0};
  const std::string path = fixtures::temp_path("badz.mfpl");
  save_pseudo(e, path);
  {
    // header 4+4+8+4+4 = 24 bytes; corrupt entry (1,1) to Z
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(24 + 3 * 4);
    const std::int32_t bad = 2;
    f.write(reinterpret_cast<const char*>(&bad), 4);
  }
  CHECK_THROWS_WITH_AS(load_pseudo(path), doctest::Contains("(row 1, trial 1)"),
                       std::runtime_error);
}

TEST_CASE("pseudo labels: magic mismatch") {
  const std::string path = fixtures::temp_path("notpl.mfpl");
  std::ofstream(path, std::ios::binary) << "XXXXgarbage";
  CHECK_THROWS_WITH_AS(load_pseudo(path), doctest::Contains("magic"), std::runtime_error);
}

TEST_CASE("property: pseudo ensemble round trip at paper shape") {
  mfn::Rng rng(99);
  PseudoLabelEnsemble e;
  e.n_samples = 100;
  e.n_trials = 90;
  e.n_pseudo_classes = 30;
  e.labels.resize(e.n_samples * e.n_trials);
  for (auto& l : e.labels) l = static_cast<std::int32_t>(rng.next_below(30));
  const std::string path = fixtures::temp_path("big.mfpl");
  save_pseudo(e, path);
  CHECK(load_pseudo(path) == e);
}

TEST_CASE("split file: sections, disjointness, bounds") {
  const std::string path = fixtures::temp_path("split.txt");
  SplitSpec s;
  s.labeled_indices = {0, 1};
  s.unlabeled_indices = {2, 3, 4};
  s.test_indices = {5};
  save_split(s, path);
  const SplitSpec back = load_split(path, 6);
  CHECK(back.labeled_indices == s.labeled_indices);
  CHECK(back.unlabeled_indices == s.unlabeled_indices);
  CHECK(back.test_indices == s.test_indices);

  CHECK_THROWS_WITH_AS(load_split(path, 5), doctest::Contains("out of range"),
                       std::runtime_error);
  std::ofstream(path) << "[labeled]\n1\n[test]\n1\n";
  CHECK_THROWS_WITH_AS(load_split(path, 4), doctest::Contains("more than one section"),
                       std::runtime_error);
}

TEST_CASE("rejection is total: invalid values never load silently repaired") {
  const std::string path = fixtures::temp_path("inf.csv");
  std::ofstream(path) << "id,label,f0\n0,,inf\n";
  CHECK_THROWS(load_features(path));
}

TEST_CASE("subset keeps order and labels") {
  mfn::Rng rng(5);
  const FeatureSet fs = fixtures::random_features(10, 3, rng, true);
  const FeatureSet sub = subset(fs, {7, 2, 2});
  CHECK(sub.n_samples == 3);
  CHECK(sub.features[0] == fs.features[7 * 3]);
  CHECK(sub.features[3] == fs.features[2 * 3]);
  CHECK(sub.labels[1] == fs.labels[2]);
}
