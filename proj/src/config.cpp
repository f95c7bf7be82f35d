#include "manifoldnet/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mfn {

namespace {

[[noreturn]] void key_fail(const std::string& key, const std::string& msg) {
  throw std::invalid_argument("config key '" + key + "': " + msg);
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

long long parse_int(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const long long v = std::strtoll(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0') key_fail(key, "unparsable integer '" + value + "'");
  return v;
}

std::size_t parse_count(const std::string& key, const std::string& value, long long min_value) {
  const long long v = parse_int(key, value);
  if (v < min_value)
    key_fail(key, "value " + value + " below minimum " + std::to_string(min_value));
  return static_cast<std::size_t>(v);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0' || value.find('-') != std::string::npos)
    key_fail(key, "unparsable seed '" + value + "'");
  return v;
}

double parse_real(const std::string& key, const std::string& value, bool require_positive) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0') key_fail(key, "unparsable number '" + value + "'");
  if (require_positive && v <= 0.0) key_fail(key, "must be > 0");
  if (v < 0.0) key_fail(key, "must be >= 0");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  key_fail(key, "expected a boolean, got '" + value + "'");
}

std::vector<std::size_t> parse_dims(const std::string& key, const std::string& value) {
  std::vector<std::size_t> dims;
  std::stringstream ss(value);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (part.empty()) continue;
    dims.push_back(parse_count(key, part, 1));
  }
  return dims;
}

}  // namespace

void RunConfig::apply(const std::string& key, const std::string& value) {
  if (key == "ems.z") ems.z = parse_count(key, value, 2);
  else if (key == "ems.t") ems.t = parse_count(key, value, 1);
  else if (key == "ems.k") ems.k = parse_count(key, value, 0);
  else if (key == "ems.lr_reg") ems.lr_reg = parse_real(key, value, false);
  else if (key == "ems.lr_iters") ems.lr_iters = parse_count(key, value, 1);
  else if (key == "ems.init") {
    if (value == "uniform") ems.kmeans_init = KMeansInit::uniform;
    else if (value == "kmeans++") ems.kmeans_init = KMeansInit::kmeanspp;
    else key_fail(key, "expected uniform or kmeans++, got '" + value + "'");
  } else if (key == "train.lambda_s") train_cfg.lambda_s = parse_real(key, value, false);
  else if (key == "train.lambda_m") train_cfg.lambda_m = parse_real(key, value, false);
  else if (key == "train.lambda") train_cfg.lambda = parse_real(key, value, false);
  else if (key == "train.lambda_mode") {
    if (value == "fixed") train_cfg.lambda_mode = LambdaMode::fixed;
    else if (value == "auto_balance") train_cfg.lambda_mode = LambdaMode::auto_balance;
    else key_fail(key, "expected fixed or auto_balance, got '" + value + "'");
  } else if (key == "train.learning_rate") train_cfg.learning_rate = parse_real(key, value, true);
  else if (key == "train.epochs") train_cfg.epochs = parse_count(key, value, 1);
  else if (key == "train.batch_size") train_cfg.batch_size = parse_count(key, value, 1);
  else if (key == "train.mode") {
    if (value != "auto" && value != "supervised" && value != "manifold" && value != "joint")
      key_fail(key, "expected auto, supervised, manifold or joint");
    train_mode = value;
  } else if (key == "net.hidden_dims") hidden_dims = parse_dims(key, value);
  else if (key == "net.activation") {
    try {
      activation = activation_from_string(value);
    } catch (const std::exception& e) {
      key_fail(key, e.what());
    }
  }
  else if (key == "run.seed") seed = parse_u64(key, value);
  else if (key == "run.workers") workers = parse_count(key, value, 0);
  else if (key == "run.normalize") normalize = parse_bool(key, value);
  else if (key == "run.refine_rounds") refine_rounds = parse_count(key, value, 1);
  else if (key == "io.input") paths.input = value;
  else if (key == "io.teacher") paths.teacher = value;
  else if (key == "io.student") paths.student = value;
  else if (key == "io.pseudo") paths.pseudo = value;
  else if (key == "io.model") paths.model = value;
  else if (key == "io.split") paths.split = value;
  else if (key == "io.out") paths.out = value;
  else if (key == "io.report") paths.report = value;
  else key_fail(key, "unknown key");
}

void RunConfig::validate() const {
  if (ems.z < 2) throw std::invalid_argument("config key 'ems.z': must be >= 2");
  if (ems.t < 1) throw std::invalid_argument("config key 'ems.t': must be >= 1");
  train_cfg.validate();
  for (const std::size_t w : hidden_dims)
    if (w < 1) throw std::invalid_argument("config key 'net.hidden_dims': widths must be >= 1");
}

std::string RunConfig::echo() const {
  std::ostringstream out;
  out << "ems.z = " << ems.z << "\n";
  out << "ems.t = " << ems.t << "\n";
  out << "ems.k = " << ems.k << "\n";
  out << "ems.lr_reg = " << ems.lr_reg << "\n";
  out << "ems.lr_iters = " << ems.lr_iters << "\n";
  out << "ems.init = " << (ems.kmeans_init == KMeansInit::uniform ? "uniform" : "kmeans++")
      << "\n";
  out << "train.lambda_s = " << train_cfg.lambda_s << "\n";
  out << "train.lambda_m = " << train_cfg.lambda_m << "\n";
  out << "train.lambda = " << train_cfg.lambda << "\n";
  out << "train.lambda_mode = "
      << (train_cfg.lambda_mode == LambdaMode::fixed ? "fixed" : "auto_balance") << "\n";
  out << "train.learning_rate = " << train_cfg.learning_rate << "\n";
  out << "train.epochs = " << train_cfg.epochs << "\n";
  out << "train.batch_size = " << train_cfg.batch_size << "\n";
  out << "train.mode = " << train_mode << "\n";
  out << "net.hidden_dims = ";
  for (std::size_t i = 0; i < hidden_dims.size(); ++i)
    out << (i ? "," : "") << hidden_dims[i];
  out << "\n";
  out << "net.activation = " << to_string(activation) << "\n";
  out << "run.seed = " << seed << "\n";
  out << "run.workers = " << workers << "\n";
  out << "run.normalize = " << (normalize ? "true" : "false") << "\n";
  out << "run.refine_rounds = " << refine_rounds << "\n";
  auto path = [&](const char* key, const std::string& v) {
    if (!v.empty()) out << key << " = " << v << "\n";
  };
  path("io.input", paths.input);
  path("io.teacher", paths.teacher);
  path("io.student", paths.student);
  path("io.pseudo", paths.pseudo);
  path("io.model", paths.model);
  path("io.split", paths.split);
  path("io.out", paths.out);
  path("io.report", paths.report);
  return out.str();
}

std::string RunConfig::report_prefix() const {
  if (!paths.report.empty()) return paths.report;
  if (!paths.out.empty()) return paths.out;
  return command.empty() ? "run" : command;
}

RunConfig parse_config(const std::string& config_path,
                       const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig cfg;
  if (const char* env_seed = std::getenv("MANIFOLDNET_SEED")) {
    cfg.apply("run.seed", env_seed);
  }
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw std::runtime_error(config_path + ": cannot open config file");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string s = trim(line);
      if (s.empty() || s[0] == '#') continue;
      const std::size_t eq = s.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error(config_path + ": line " + std::to_string(line_no) +
                                 ": expected 'section.key = value'");
      cfg.apply(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
    }
  }
  for (const auto& [key, value] : overrides) cfg.apply(key, value);
  cfg.validate();
  return cfg;
}

}  // namespace mfn
