#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "manifoldnet/ems.hpp"
#include "manifoldnet/net.hpp"

namespace mfn {

// Effective configuration of one CLI run. Defaults reflect the library
// defaults (Z=30, T=90, K=9, weight decay 5e-4); a config file overrides
// them and command-line overrides win over the file.
struct RunConfig {
  std::string command;

  struct Paths {
    std::string input;
    std::string teacher;
    std::string student;
    std::string pseudo;
    std::string model;
    std::string split;
    std::string out;
    std::string report;
  } paths;

  EmsConfig ems;
  TrainConfig train_cfg;
  std::vector<std::size_t> hidden_dims = {64};
  Activation activation = Activation::relu;
  bool normalize = false;
  std::size_t refine_rounds = 3;
  std::size_t workers = 0;
  std::uint64_t seed = 0;
  std::string train_mode = "auto";  // auto | supervised | manifold | joint

  // applies one `section.key = value` setting; throws naming the key
  void apply(const std::string& key, const std::string& value);

  void validate() const;

  // full `section.key = value` echo, sufficient to reproduce the run
  std::string echo() const;

  // report prefix: io.report, else io.out, else the command name
  std::string report_prefix() const;
};

// Defaults, then MANIFOLDNET_SEED (if set), then the config file (optional,
// line-oriented `section.key = value`, '#' comments), then overrides in order.
RunConfig parse_config(const std::string& config_path,
                       const std::vector<std::pair<std::string, std::string>>& overrides);

}  // namespace mfn
