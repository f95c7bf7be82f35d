#include "manifoldnet/data.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian; big-endian hosts are unsupported");

namespace mfn {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

constexpr char kFeatureMagic[4] = {'M', 'F', 'N', 'T'};
constexpr char kPseudoMagic[4] = {'M', 'F', 'P', 'L'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& path, const char* what) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) fail(path + ": truncated file while reading " + what);
  return value;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path + ": cannot open for reading");
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(path + ": cannot open for writing");
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

FeatureSet load_features_csv(const std::string& path) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) fail(path + ": empty file");
  const auto header = split_csv_line(line);
  if (header.size() < 3 || trim(header[0]) != "id" || trim(header[1]) != "label")
    fail(path + ": malformed header, expected id,label,f0,...");
  const std::size_t dim = header.size() - 2;
  for (std::size_t j = 0; j < dim; ++j) {
    if (trim(header[2 + j]) != "f" + std::to_string(j))
      fail(path + ": malformed header, expected column f" + std::to_string(j));
  }

  FeatureSet fs;
  fs.dim = dim;
  bool any_label = false;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row_no;
    const auto fields = split_csv_line(line);
    if (fields.size() != dim + 2)
      fail(path + ": row " + std::to_string(row_no) + ": expected " +
           std::to_string(dim + 2) + " fields, got " + std::to_string(fields.size()));
    const std::string label_str = trim(fields[1]);
    std::int32_t label = -1;
    if (!label_str.empty() && label_str != "-1") {
      char* end = nullptr;
      const long v = std::strtol(label_str.c_str(), &end, 10);
      if (end == label_str.c_str() || *end != '\0' || v < 0)
        fail(path + ": row " + std::to_string(row_no) + ": bad label '" + label_str + "'");
      label = static_cast<std::int32_t>(v);
      any_label = true;
    }
    fs.labels.push_back(label);
    for (std::size_t j = 0; j < dim; ++j) {
      const std::string cell = trim(fields[2 + j]);
      char* end = nullptr;
      const float v = std::strtof(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0')
        fail(path + ": row " + std::to_string(row_no) + ": bad feature value '" + cell + "'");
      if (!std::isfinite(v))
        fail(path + ": row " + std::to_string(row_no) + ": non-finite feature value");
      fs.features.push_back(static_cast<double>(v));
    }
    ++fs.n_samples;
  }
  if (fs.n_samples == 0) fail(path + ": no data rows");
  if (!any_label) {
    fs.labels.clear();
    fs.n_classes = 0;
  } else {
    std::int32_t max_label = -1;
    for (const auto l : fs.labels) max_label = std::max(max_label, l);
    fs.n_classes = max_label + 1;
  }
  fs.validate();
  return fs;
}

void save_features_csv(const FeatureSet& fs, const std::string& path) {
  std::ofstream out = open_output(path);
  out << "id,label";
  for (std::size_t j = 0; j < fs.dim; ++j) out << ",f" << j;
  out << "\n";
  char buf[64];
  for (std::size_t i = 0; i < fs.n_samples; ++i) {
    out << i << ',';
    if (fs.has_labels()) out << fs.labels[i];
    else out << -1;
    for (std::size_t j = 0; j < fs.dim; ++j) {
      // %.9g round-trips float32 exactly; features are float32 on disk
      std::snprintf(buf, sizeof(buf), "%.9g", static_cast<float>(fs.features[i * fs.dim + j]));
      out << ',' << buf;
    }
    out << "\n";
  }
  if (!out) fail(path + ": write failed");
}

FeatureSet load_features_binary(const std::string& path) {
  std::ifstream in = open_input(path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kFeatureMagic, 4) != 0)
    fail(path + ": bad magic, not a feature file");
  if (read_pod<std::uint32_t>(in, path, "version") != kVersion)
    fail(path + ": unsupported version");
  const auto n = read_pod<std::uint64_t>(in, path, "sample count");
  const auto d = read_pod<std::uint32_t>(in, path, "dimension");
  const auto has_labels = read_pod<std::uint8_t>(in, path, "label flag");
  const auto n_classes = read_pod<std::uint32_t>(in, path, "class count");
  if (n == 0 || d == 0) fail(path + ": empty feature set");

  FeatureSet fs;
  fs.n_samples = static_cast<std::size_t>(n);
  fs.dim = d;
  fs.n_classes = static_cast<std::int32_t>(n_classes);
  fs.features.resize(fs.n_samples * fs.dim);
  std::vector<float> raw(fs.n_samples * fs.dim);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size() * sizeof(float)));
  if (!in) fail(path + ": truncated feature payload");
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!std::isfinite(raw[i]))
      fail(path + ": row " + std::to_string(i / fs.dim) + ": non-finite feature value");
    fs.features[i] = static_cast<double>(raw[i]);
  }
  if (has_labels) {
    fs.labels.resize(fs.n_samples);
    in.read(reinterpret_cast<char*>(fs.labels.data()),
            static_cast<std::streamsize>(fs.labels.size() * sizeof(std::int32_t)));
    if (!in) fail(path + ": truncated label payload");
    for (std::size_t i = 0; i < fs.labels.size(); ++i) {
      if (fs.labels[i] >= fs.n_classes || fs.labels[i] < -1)
        fail(path + ": row " + std::to_string(i) + ": label " + std::to_string(fs.labels[i]) +
             " out of range for C=" + std::to_string(fs.n_classes));
    }
  } else if (n_classes != 0) {
    fail(path + ": class count declared without labels");
  }
  fs.validate();
  return fs;
}

void save_features_binary(const FeatureSet& fs, const std::string& path) {
  std::ofstream out = open_output(path);
  out.write(kFeatureMagic, 4);
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint64_t>(fs.n_samples));
  write_pod(out, static_cast<std::uint32_t>(fs.dim));
  write_pod(out, static_cast<std::uint8_t>(fs.has_labels() ? 1 : 0));
  write_pod(out, static_cast<std::uint32_t>(fs.has_labels() ? fs.n_classes : 0));
  std::vector<float> raw(fs.features.size());
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = static_cast<float>(fs.features[i]);
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(float)));
  if (fs.has_labels()) {
    out.write(reinterpret_cast<const char*>(fs.labels.data()),
              static_cast<std::streamsize>(fs.labels.size() * sizeof(std::int32_t)));
  }
  if (!out) fail(path + ": write failed");
}

}  // namespace

void FeatureSet::validate() const {
  if (n_samples < 1 || dim < 1) fail("FeatureSet: n_samples and dim must be >= 1");
  if (features.size() != n_samples * dim) fail("FeatureSet: feature storage size mismatch");
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (!std::isfinite(features[i]))
      fail("FeatureSet: non-finite feature at row " + std::to_string(i / dim));
  }
  if (!labels.empty()) {
    if (labels.size() != n_samples) fail("FeatureSet: label count mismatch");
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < -1 || labels[i] >= n_classes)
        fail("FeatureSet: label out of range at row " + std::to_string(i));
    }
  }
}

void PseudoLabelEnsemble::validate() const {
  if (labels.size() != n_samples * n_trials) fail("PseudoLabelEnsemble: storage size mismatch");
  for (std::size_t i = 0; i < n_samples; ++i) {
    for (std::size_t t = 0; t < n_trials; ++t) {
      const auto v = at(i, t);
      if (v < 0 || v >= n_pseudo_classes)
        fail("PseudoLabelEnsemble: entry " + std::to_string(v) + " out of range at (row " +
             std::to_string(i) + ", trial " + std::to_string(t) + ")");
    }
  }
}

void SplitSpec::validate(std::size_t n_samples) const {
  std::set<std::size_t> seen;
  auto check = [&](const std::vector<std::size_t>& v, const char* name) {
    for (const auto idx : v) {
      if (idx >= n_samples)
        fail(std::string("SplitSpec: index ") + std::to_string(idx) + " in [" + name +
             "] out of range");
      if (!seen.insert(idx).second)
        fail(std::string("SplitSpec: index ") + std::to_string(idx) +
             " appears in more than one section");
    }
  };
  check(labeled_indices, "labeled");
  check(unlabeled_indices, "unlabeled");
  check(test_indices, "test");
}

FileFormat format_from_path(const std::string& path) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0) return FileFormat::csv;
  return FileFormat::binary;
}

FeatureSet load_features(const std::string& path, FileFormat format) {
  return format == FileFormat::csv ? load_features_csv(path) : load_features_binary(path);
}

FeatureSet load_features(const std::string& path) {
  return load_features(path, format_from_path(path));
}

void save_features(const FeatureSet& fs, const std::string& path, FileFormat format) {
  fs.validate();
  if (format == FileFormat::csv) save_features_csv(fs, path);
  else save_features_binary(fs, path);
}

void save_features(const FeatureSet& fs, const std::string& path) {
  save_features(fs, path, format_from_path(path));
}

PseudoLabelEnsemble load_pseudo(const std::string& path) {
  std::ifstream in = open_input(path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kPseudoMagic, 4) != 0)
    fail(path + ": bad magic, not a pseudo-label file");
  if (read_pod<std::uint32_t>(in, path, "version") != kVersion)
    fail(path + ": unsupported version");
  PseudoLabelEnsemble e;
  e.n_samples = static_cast<std::size_t>(read_pod<std::uint64_t>(in, path, "sample count"));
  e.n_trials = read_pod<std::uint32_t>(in, path, "trial count");
  e.n_pseudo_classes = static_cast<std::int32_t>(read_pod<std::uint32_t>(in, path, "class count"));
  e.labels.resize(e.n_samples * e.n_trials);
  in.read(reinterpret_cast<char*>(e.labels.data()),
          static_cast<std::streamsize>(e.labels.size() * sizeof(std::int32_t)));
  if (!in) fail(path + ": truncated pseudo-label payload");
  try {
    e.validate();
  } catch (const std::exception& ex) {
    fail(path + ": " + ex.what());
  }
  return e;
}

void save_pseudo(const PseudoLabelEnsemble& ensemble, const std::string& path) {
  ensemble.validate();
  std::ofstream out = open_output(path);
  out.write(kPseudoMagic, 4);
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint64_t>(ensemble.n_samples));
  write_pod(out, static_cast<std::uint32_t>(ensemble.n_trials));
  write_pod(out, static_cast<std::uint32_t>(ensemble.n_pseudo_classes));
  out.write(reinterpret_cast<const char*>(ensemble.labels.data()),
            static_cast<std::streamsize>(ensemble.labels.size() * sizeof(std::int32_t)));
  if (!out) fail(path + ": write failed");
}

SplitSpec load_split(const std::string& path, std::size_t n_samples) {
  std::ifstream in = open_input(path);
  SplitSpec split;
  std::vector<std::size_t>* current = nullptr;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    if (s == "[labeled]") current = &split.labeled_indices;
    else if (s == "[unlabeled]") current = &split.unlabeled_indices;
    else if (s == "[test]") current = &split.test_indices;
    else {
      if (!current)
        fail(path + ": line " + std::to_string(line_no) + ": index before any section header");
      char* end = nullptr;
      const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
      if (end == s.c_str() || *end != '\0')
        fail(path + ": line " + std::to_string(line_no) + ": bad index '" + s + "'");
      current->push_back(static_cast<std::size_t>(v));
    }
  }
  split.validate(n_samples);
  return split;
}

FeatureSet subset(const FeatureSet& fs, const std::vector<std::size_t>& indices) {
  if (indices.empty()) fail("subset: empty index list");
  FeatureSet out;
  out.n_samples = indices.size();
  out.dim = fs.dim;
  out.n_classes = fs.n_classes;
  out.features.reserve(out.n_samples * out.dim);
  if (fs.has_labels()) out.labels.reserve(out.n_samples);
  for (const std::size_t i : indices) {
    if (i >= fs.n_samples) fail("subset: index " + std::to_string(i) + " out of range");
    const double* r = fs.row(i);
    out.features.insert(out.features.end(), r, r + fs.dim);
    if (fs.has_labels()) out.labels.push_back(fs.labels[i]);
  }
  return out;
}

void save_split(const SplitSpec& split, const std::string& path) {
  std::ofstream out = open_output(path);
  out << "[labeled]\n";
  for (const auto i : split.labeled_indices) out << i << "\n";
  out << "[unlabeled]\n";
  for (const auto i : split.unlabeled_indices) out << i << "\n";
  out << "[test]\n";
  for (const auto i : split.test_indices) out << i << "\n";
  if (!out) fail(path + ": write failed");
}

}  // namespace mfn
