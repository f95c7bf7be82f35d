#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "manifoldnet/config.hpp"
#include "manifoldnet/data.hpp"
#include "manifoldnet/ems.hpp"
#include "manifoldnet/neighbors.hpp"
#include "manifoldnet/net.hpp"
#include "manifoldnet/tasks.hpp"

namespace {

using mfn::RunConfig;

struct Collected {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;
};

// registers --config plus every dotted config key on a subcommand; values
// land in the override list in command-line order
void register_options(CLI::App* cmd, Collected& c) {
  cmd->add_option("--config", c.config_path, "config file (section.key = value lines)");
  static const std::vector<std::string> keys = {
      "ems.z",           "ems.t",
      "ems.k",           "ems.lr_reg",
      "ems.lr_iters",    "ems.init",
      "train.lambda_s",  "train.lambda_m",
      "train.lambda",    "train.lambda_mode",
      "train.learning_rate", "train.epochs",
      "train.batch_size", "train.mode",
      "net.hidden_dims", "net.activation",
      "run.seed",        "run.workers",
      "run.normalize",   "run.refine_rounds",
      "io.input",        "io.teacher",
      "io.student",      "io.pseudo",
      "io.model",        "io.split",
      "io.out",          "io.report"};
  for (const auto& key : keys) {
    cmd->add_option_function<std::string>(
        "--" + key, [&c, key](const std::string& v) { c.overrides.emplace_back(key, v); });
  }
  // short aliases for the common flags
  cmd->add_option_function<std::string>(
      "--seed", [&c](const std::string& v) { c.overrides.emplace_back("run.seed", v); });
  cmd->add_option_function<std::string>(
      "--workers", [&c](const std::string& v) { c.overrides.emplace_back("run.workers", v); });
  cmd->add_flag_callback("--normalize",
                         [&c] { c.overrides.emplace_back("run.normalize", "true"); });
  auto alias = [&](const char* flag, const char* key) {
    cmd->add_option_function<std::string>(
        flag, [&c, key](const std::string& v) { c.overrides.emplace_back(key, v); });
  };
  alias("--input", "io.input");
  alias("--teacher", "io.teacher");
  alias("--student", "io.student");
  alias("--pseudo", "io.pseudo");
  alias("--model", "io.model");
  alias("--split", "io.split");
  alias("--out", "io.out");
  alias("--report", "io.report");
}

void require_path(const std::string& path, const char* what) {
  if (path.empty()) throw std::runtime_error(std::string("missing required path: ") + what);
  std::ifstream probe(path);
  if (!probe) throw std::runtime_error(path + ": input path does not exist (" + what + ")");
}

void write_report(const RunConfig& cfg, const mfn::MetricsReport& report) {
  const std::string prefix = cfg.report_prefix();
  {
    std::ofstream out(prefix + ".config");
    out << cfg.echo();
  }
  const auto lines = report.to_lines();
  {
    std::ofstream out(prefix + ".metrics");
    char buf[64];
    for (const auto& [key, value] : lines) {
      std::snprintf(buf, sizeof(buf), "%.17g", value);
      out << key << "=" << buf << "\n";
      std::cout << key << "=" << buf << "\n";
    }
  }
  {
    nlohmann::json j;
    for (const auto& [key, value] : lines) j[key] = value;
    if (!report.round_test_accuracy.empty())
      j["round_test_accuracy"] = report.round_test_accuracy;
    std::ofstream out(prefix + ".json");
    out << j.dump(2) << "\n";
  }
}

RunConfig finish_config(Collected& c, const std::string& command) {
  if (!c.config_path.empty()) require_path(c.config_path, "--config");
  RunConfig cfg = mfn::parse_config(c.config_path, c.overrides);
  cfg.command = command;
  cfg.ems.master_seed = cfg.seed;
  cfg.train_cfg.seed = cfg.seed;
  return cfg;
}

int cmd_segment(Collected& c) {
  RunConfig cfg = finish_config(c, "segment");
  require_path(cfg.paths.input, "--input");
  if (cfg.paths.out.empty()) throw std::runtime_error("segment: missing --out");
  mfn::FeatureSet fs = mfn::load_features(cfg.paths.input);
  if (cfg.normalize) fs = mfn::normalize_l2(fs);
  const mfn::PseudoLabelEnsemble ens = mfn::run_ems(fs, cfg.ems, cfg.workers);
  mfn::save_pseudo(ens, cfg.paths.out);
  mfn::MetricsReport report;
  if (fs.has_labels()) report.purity = mfn::ensemble_purity(ens, fs);
  report.extra.emplace_back("n_samples", static_cast<double>(ens.n_samples));
  report.extra.emplace_back("n_trials", static_cast<double>(ens.n_trials));
  write_report(cfg, report);
  return 0;
}

std::vector<std::size_t> labeled_indices_of(const mfn::FeatureSet& fs) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < fs.n_samples; ++i)
    if (fs.label(i)) idx.push_back(i);
  return idx;
}

int cmd_train(Collected& c) {
  RunConfig cfg = finish_config(c, "train");
  require_path(cfg.paths.input, "--input");
  if (cfg.paths.out.empty()) throw std::runtime_error("train: missing --out");
  const mfn::FeatureSet fs = mfn::load_features(cfg.paths.input);

  mfn::PseudoLabelEnsemble ens;
  const bool have_pseudo = !cfg.paths.pseudo.empty();
  if (have_pseudo) {
    require_path(cfg.paths.pseudo, "--pseudo");
    ens = mfn::load_pseudo(cfg.paths.pseudo);
    if (ens.n_samples != fs.n_samples)
      throw std::runtime_error("train: pseudo-label sample count does not match features");
  }
  mfn::SupervisedStream sup;
  const auto labeled = labeled_indices_of(fs);
  bool use_sup = !labeled.empty();
  bool use_man = have_pseudo;
  if (cfg.train_mode == "supervised") use_man = false;
  else if (cfg.train_mode == "manifold") use_sup = false;
  else if (cfg.train_mode == "joint" && (!use_sup || !use_man))
    throw std::runtime_error("train: joint mode needs labels and --pseudo");
  if (!use_sup && !use_man)
    throw std::runtime_error("train: no labels and no --pseudo, nothing to train on");

  mfn::NetworkSpec spec;
  spec.input_dim = fs.dim;
  spec.hidden_dims = cfg.hidden_dims;
  spec.activation = cfg.activation;
  spec.n_classes = use_sup ? fs.n_classes : 0;
  spec.n_trials = use_man ? ens.n_trials : 0;
  spec.n_pseudo_classes = use_man ? ens.n_pseudo_classes : 0;

  mfn::Rng init_rng(mfn::Rng::derive(cfg.seed, 1000));
  mfn::NetworkParams params = mfn::NetworkParams::glorot(spec, init_rng);

  if (use_sup) {
    sup.features = &fs;
    sup.indices = labeled;
  }
  mfn::ManifoldStream man;
  if (use_man) {
    man.inputs = &fs;
    man.ensemble = &ens;
    man.indices.resize(fs.n_samples);
    for (std::size_t i = 0; i < man.indices.size(); ++i) man.indices[i] = i;
  }
  const mfn::TrainResult result = mfn::train(std::move(params), sup, man, cfg.train_cfg);
  mfn::save_model(result.params, cfg.paths.out);

  mfn::MetricsReport report;
  report.extra.emplace_back("final_loss", result.epoch_loss.back());
  report.extra.emplace_back("initial_loss", result.epoch_loss.front());
  report.extra.emplace_back("lambda_used", result.lambda_used);
  write_report(cfg, report);
  return 0;
}

int cmd_evaluate(Collected& c) {
  RunConfig cfg = finish_config(c, "evaluate");
  require_path(cfg.paths.input, "--input");
  require_path(cfg.paths.model, "--model");
  const mfn::FeatureSet fs = mfn::load_features(cfg.paths.input);
  const mfn::NetworkParams params = mfn::load_model(cfg.paths.model);
  if (!fs.has_labels()) throw std::runtime_error("evaluate: features carry no labels");

  mfn::MetricsReport report;
  const auto labeled = labeled_indices_of(fs);
  if (params.supervised_head && !labeled.empty())
    report.accuracy = mfn::accuracy(params, fs, labeled);
  const mfn::FeatureSet emb = mfn::embed_all(params, fs);
  report.recall_at_1 = mfn::recall_at_1(emb);
  report.recall_at_1_before = mfn::recall_at_1(fs);
  write_report(cfg, report);
  return 0;
}

int cmd_imitate(Collected& c) {
  RunConfig cfg = finish_config(c, "imitate");
  require_path(cfg.paths.teacher, "--teacher");
  require_path(cfg.paths.student, "--student");
  mfn::ImitationSetup setup;
  setup.teacher_features = mfn::load_features(cfg.paths.teacher);
  setup.student_features = mfn::load_features(cfg.paths.student);
  setup.ems_cfg = cfg.ems;
  setup.train_cfg = cfg.train_cfg;
  setup.hidden_dims = cfg.hidden_dims;
  setup.activation = cfg.activation;
  setup.normalize = cfg.normalize;
  setup.workers = cfg.workers;
  mfn::ImitationResult result = mfn::run_imitation(setup);
  if (!cfg.paths.out.empty()) mfn::save_model(result.params, cfg.paths.out + ".mfmd");
  write_report(cfg, result.report);
  return 0;
}

int cmd_semisup(Collected& c) {
  RunConfig cfg = finish_config(c, "semisup");
  require_path(cfg.paths.input, "--input");
  require_path(cfg.paths.split, "--split");
  mfn::SemiSupSetup setup;
  setup.features = mfn::load_features(cfg.paths.input);
  setup.split = mfn::load_split(cfg.paths.split, setup.features.n_samples);
  setup.ems_cfg = cfg.ems;
  setup.train_cfg = cfg.train_cfg;
  setup.refine_rounds = cfg.refine_rounds;
  setup.hidden_dims = cfg.hidden_dims;
  setup.activation = cfg.activation;
  setup.normalize = cfg.normalize;
  setup.workers = cfg.workers;
  mfn::SemiSupResult result = mfn::run_semisup(setup);
  if (!cfg.paths.out.empty()) mfn::save_model(result.params, cfg.paths.out + ".mfmd");
  write_report(cfg, result.report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"manifoldnet: ensemble manifold segmentation and two-stream training"};
  app.require_subcommand(1);

  Collected segment_c, train_c, evaluate_c, imitate_c, semisup_c;
  CLI::App* segment = app.add_subcommand("segment", "generate a pseudo-label ensemble");
  CLI::App* train = app.add_subcommand("train", "train the two-stream network");
  CLI::App* evaluate = app.add_subcommand("evaluate", "accuracy and retrieval metrics");
  CLI::App* imitate = app.add_subcommand("imitate", "model imitation harness");
  CLI::App* semisup = app.add_subcommand("semisup", "semi-supervised harness");
  register_options(segment, segment_c);
  register_options(train, train_c);
  register_options(evaluate, evaluate_c);
  register_options(imitate, imitate_c);
  register_options(semisup, semisup_c);

  CLI11_PARSE(app, argc, argv);

  try {
    if (segment->parsed()) return cmd_segment(segment_c);
    if (train->parsed()) return cmd_train(train_c);
    if (evaluate->parsed()) return cmd_evaluate(evaluate_c);
    if (imitate->parsed()) return cmd_imitate(imitate_c);
    if (semisup->parsed()) return cmd_semisup(semisup_c);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand given\n";
  return 1;
}
