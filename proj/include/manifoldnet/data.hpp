#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mfn {

// N feature vectors of dimension d, row-major, with optional class labels.
// Label storage uses -1 for "unlabeled"; use label(i) to avoid touching
// the sentinel directly.
struct FeatureSet {
  std::size_t n_samples = 0;
  std::size_t dim = 0;
  std::vector<double> features;     // n_samples * dim, row-major
  std::vector<std::int32_t> labels; // empty if fully unlabeled, else length n_samples
  std::int32_t n_classes = 0;       // 0 if no labels declared

  const double* row(std::size_t i) const { return features.data() + i * dim; }
  double* row(std::size_t i) { return features.data() + i * dim; }

  bool has_labels() const { return !labels.empty(); }
  std::optional<std::int32_t> label(std::size_t i) const {
    if (labels.empty() || labels[i] < 0) return std::nullopt;
    return labels[i];
  }

  // Throws std::runtime_error on any invariant violation.
  void validate() const;

  bool operator==(const FeatureSet&) const = default;
};

// N x T matrix of pseudo-class ids in {0..Z-1}, sample-major.
struct PseudoLabelEnsemble {
  std::size_t n_samples = 0;
  std::size_t n_trials = 0;
  std::int32_t n_pseudo_classes = 0;
  std::vector<std::int32_t> labels;  // n_samples * n_trials, trial-minor

  std::int32_t at(std::size_t sample, std::size_t trial) const {
    return labels[sample * n_trials + trial];
  }
  std::int32_t& at(std::size_t sample, std::size_t trial) {
    return labels[sample * n_trials + trial];
  }

  void validate() const;

  bool operator==(const PseudoLabelEnsemble&) const = default;
};

// Disjoint index lists carving one FeatureSet into labeled / unlabeled / test.
struct SplitSpec {
  std::vector<std::size_t> labeled_indices;
  std::vector<std::size_t> unlabeled_indices;
  std::vector<std::size_t> test_indices;

  void validate(std::size_t n_samples) const;
};

enum class FileFormat { csv, binary };

FileFormat format_from_path(const std::string& path);

FeatureSet load_features(const std::string& path, FileFormat format);
FeatureSet load_features(const std::string& path);  // format by extension
void save_features(const FeatureSet& fs, const std::string& path, FileFormat format);
void save_features(const FeatureSet& fs, const std::string& path);

PseudoLabelEnsemble load_pseudo(const std::string& path);
void save_pseudo(const PseudoLabelEnsemble& ensemble, const std::string& path);

SplitSpec load_split(const std::string& path, std::size_t n_samples);
void save_split(const SplitSpec& split, const std::string& path);

// Row-subset in the given index order; labels and n_classes carry over.
FeatureSet subset(const FeatureSet& fs, const std::vector<std::size_t>& indices);

}  // namespace mfn
