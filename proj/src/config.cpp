#include "pseudosup/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "pseudosup/checkpoint.hpp"

namespace pseudosup {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(value);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_real(const std::string& key, const std::string& v) {
  double out = 0;
  if (!parse_real(v, out) || !std::isfinite(out)) throw ConfigError(key, "expected a number, got '" + v + "'");
  return out;
}

long long to_integer(const std::string& key, const std::string& v) {
  long long out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError(key, "expected an integer, got '" + v + "'");
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  const long long x = to_integer(key, v);
  if (x < INT32_MIN || x > INT32_MAX) throw ConfigError(key, "integer out of range");
  return static_cast<int>(x);
}

std::uint64_t to_seed(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError(key, "expected a non-negative integer seed, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key, "expected true/false, got '" + v + "'");
}

std::optional<GridDims> to_grid(const std::string& key, const std::string& v) {
  if (v == "none" || v.empty()) return std::nullopt;
  const auto x = v.find('x');
  if (x == std::string::npos) throw ConfigError(key, "expected <h>x<w> or none, got '" + v + "'");
  GridDims g{to_int(key, trim(v.substr(0, x))), to_int(key, trim(v.substr(x + 1)))};
  if (g.height < 1 || g.width < 1) throw ConfigError(key, "grid dims must be positive");
  return g;
}

std::string grid_text(const std::optional<GridDims>& g) {
  if (!g) return "none";
  return std::to_string(g->height) + "x" + std::to_string(g->width);
}

template <typename T, typename Fmt>
std::string join(const std::vector<T>& xs, Fmt fmt) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    out += fmt(xs[i]);
  }
  return out;
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::pseudo_sup: return "pseudo_sup";
    case Method::pseudo_sup_aug: return "pseudo_sup_aug";
    case Method::supervised: return "supervised";
    case Method::self_training: return "self_training";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  if (s == "pseudo_sup") return Method::pseudo_sup;
  if (s == "pseudo_sup_aug") return Method::pseudo_sup_aug;
  if (s == "supervised") return Method::supervised;
  if (s == "self_training") return Method::self_training;
  throw ConfigError("experiment.method", "unknown method '" + s + "'");
}

bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
  return method == o.method && data_path == o.data_path && synthetic == o.synthetic && multimodal == o.multimodal &&
         label_fraction == o.label_fraction && fractions.train == o.fractions.train &&
         fractions.validation == o.fractions.validation && fractions.test == o.fractions.test &&
         engine == o.engine && confidence_threshold == o.confidence_threshold && seeds == o.seeds &&
         output_dir == o.output_dir && beta_grid == o.beta_grid && gamma_grid == o.gamma_grid &&
         compare_methods == o.compare_methods;
}

void set_field(ExperimentConfig& cfg, const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  auto& e = cfg.engine;
  auto& syn = cfg.synthetic;
  if (key == "experiment.method") {
    try {
      cfg.method = parse_method(v);
    } catch (const ConfigError&) {
      throw ConfigError(key, "unknown method '" + v + "'");
    }
  } else if (key == "experiment.seeds") {
    cfg.seeds.clear();
    for (const auto& s : split_list(v)) cfg.seeds.push_back(to_seed(key, s));
  } else if (key == "experiment.output_dir") {
    cfg.output_dir = v;
  } else if (key == "experiment.confidence_threshold") {
    if (v == "none") cfg.confidence_threshold.reset();
    else cfg.confidence_threshold = to_real(key, v);
  } else if (key == "experiment.methods") {
    cfg.compare_methods.clear();
    for (const auto& m : split_list(v)) {
      try {
        cfg.compare_methods.push_back(parse_method(m));
      } catch (const ConfigError&) {
        throw ConfigError(key, "unknown method '" + m + "'");
      }
    }
  } else if (key == "data.path") {
    cfg.data_path = v == "none" ? "" : v;
  } else if (key == "data.n_per_class") {
    syn.n_per_class = to_int(key, v);
  } else if (key == "data.dim") {
    syn.dim = to_int(key, v);
  } else if (key == "data.separation") {
    syn.separation = to_real(key, v);
  } else if (key == "data.grid") {
    syn.grid = to_grid(key, v);
  } else if (key == "data.multimodal") {
    cfg.multimodal = to_bool(key, v);
  } else if (key == "data.multimodal_grid") {
    auto g = to_grid(key, v);
    if (!g) throw ConfigError(key, "multimodal grid is required");
    syn.multimodal_grid = *g;
  } else if (key == "data.secondary_len") {
    syn.secondary_len = to_int(key, v);
  } else if (key == "data.label_fraction") {
    cfg.label_fraction = to_real(key, v);
  } else if (key == "data.fractions") {
    const auto parts = split_list(v);
    if (parts.size() != 3) throw ConfigError(key, "expected three fractions train, val, test");
    cfg.fractions = SplitFractions{to_real(key, parts[0]), to_real(key, parts[1]), to_real(key, parts[2])};
  } else if (key == "engine.beta") {
    e.beta = to_int(key, v);
  } else if (key == "engine.gamma") {
    e.gamma = to_real(key, v);
  } else if (key == "engine.policy_lr") {
    e.policy_lr = to_real(key, v);
  } else if (key == "engine.classifier_lr") {
    e.classifier_lr = to_real(key, v);
  } else if (key == "engine.weight_decay") {
    e.weight_decay = to_real(key, v);
  } else if (key == "engine.epochs") {
    e.epochs = to_int(key, v);
  } else if (key == "engine.batch_labeled") {
    e.batch_labeled = to_int(key, v);
  } else if (key == "engine.batch_unlabeled") {
    e.batch_unlabeled = to_int(key, v);
  } else if (key == "engine.batch_val") {
    e.batch_val = to_int(key, v);
  } else if (key == "engine.warmup_steps") {
    e.warmup_steps = to_int(key, v);
  } else if (key == "engine.pseudo_loss_weight") {
    e.pseudo_loss_weight = to_real(key, v);
  } else if (key == "engine.hidden_dims") {
    e.hidden_dims.clear();
    for (const auto& h : split_list(v)) e.hidden_dims.push_back(to_int(key, h));
  } else if (key == "engine.policy_init") {
    if (v == "clone") e.policy_init = PolicyInit::clone_classifier;
    else if (v == "random") e.policy_init = PolicyInit::random;
    else throw ConfigError(key, "expected clone or random, got '" + v + "'");
  } else if (key == "engine.crop_scale_min") {
    e.crop_scale.min = to_real(key, v);
  } else if (key == "engine.crop_scale_max") {
    e.crop_scale.max = to_real(key, v);
  } else if (key == "ablation.betas") {
    cfg.beta_grid.clear();
    for (const auto& b : split_list(v)) cfg.beta_grid.push_back(to_int(key, b));
  } else if (key == "ablation.gammas") {
    cfg.gamma_grid.clear();
    for (const auto& g : split_list(v)) cfg.gamma_grid.push_back(to_real(key, g));
  } else {
    throw ConfigError(key, "unknown config field");
  }
}

ExperimentConfig parse_config(std::istream& is) {
  ExperimentConfig cfg;
  std::string section;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("unterminated section header", line_no);
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no);
    if (section.empty()) throw ParseError("key outside of a [section]", line_no);
    set_field(cfg, section + "." + trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config", "cannot open " + path);
  return parse_config(is);
}

std::string to_config_text(const ExperimentConfig& cfg) {
  const auto& e = cfg.engine;
  const auto& syn = cfg.synthetic;
  std::ostringstream os;
  os << "[experiment]\n"
     << "method = " << to_string(cfg.method) << '\n'
     << "seeds = " << join(cfg.seeds, [](std::uint64_t s) { return std::to_string(s); }) << '\n'
     << "output_dir = " << cfg.output_dir << '\n'
     << "confidence_threshold = " << (cfg.confidence_threshold ? format_real(*cfg.confidence_threshold) : "none")
     << '\n'
     << "methods = " << join(cfg.compare_methods, [](Method m) { return to_string(m); }) << '\n'
     << "\n[data]\n"
     << "path = " << (cfg.data_path.empty() ? "none" : cfg.data_path) << '\n'
     << "n_per_class = " << syn.n_per_class << '\n'
     << "dim = " << syn.dim << '\n'
     << "separation = " << format_real(syn.separation) << '\n'
     << "grid = " << grid_text(syn.grid) << '\n'
     << "multimodal = " << (cfg.multimodal ? "true" : "false") << '\n'
     << "multimodal_grid = " << grid_text(syn.multimodal_grid) << '\n'
     << "secondary_len = " << syn.secondary_len << '\n'
     << "label_fraction = " << format_real(cfg.label_fraction) << '\n'
     << "fractions = " << format_real(cfg.fractions.train) << ", " << format_real(cfg.fractions.validation) << ", "
     << format_real(cfg.fractions.test) << '\n'
     << "\n[engine]\n"
     << "beta = " << e.beta << '\n'
     << "gamma = " << format_real(e.gamma) << '\n'
     << "policy_lr = " << format_real(e.policy_lr) << '\n'
     << "classifier_lr = " << format_real(e.classifier_lr) << '\n'
     << "weight_decay = " << format_real(e.weight_decay) << '\n'
     << "epochs = " << e.epochs << '\n'
     << "batch_labeled = " << e.batch_labeled << '\n'
     << "batch_unlabeled = " << e.batch_unlabeled << '\n'
     << "batch_val = " << e.batch_val << '\n'
     << "warmup_steps = " << e.warmup_steps << '\n'
     << "pseudo_loss_weight = " << format_real(e.pseudo_loss_weight) << '\n'
     << "hidden_dims = " << join(e.hidden_dims, [](Eigen::Index h) { return std::to_string(h); }) << '\n'
     << "policy_init = " << (e.policy_init == PolicyInit::clone_classifier ? "clone" : "random") << '\n'
     << "crop_scale_min = " << format_real(e.crop_scale.min) << '\n'
     << "crop_scale_max = " << format_real(e.crop_scale.max) << '\n'
     << "# optimizer constants (fixed): beta1 = 0.9, beta2 = 0.999, epsilon = 1e-08\n"
     << "\n[ablation]\n"
     << "betas = " << join(cfg.beta_grid, [](int b) { return std::to_string(b); }) << '\n'
     << "gammas = " << join(cfg.gamma_grid, [](double g) { return format_real(g); }) << '\n';
  return os.str();
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.seeds.empty()) throw ConfigError("experiment.seeds", "at least one seed is required");
  if (cfg.output_dir.empty()) throw ConfigError("experiment.output_dir", "must not be empty");
  if (cfg.method == Method::self_training) {
    if (!cfg.confidence_threshold)
      throw ConfigError("experiment.confidence_threshold", "required for method self_training");
  }
  if (cfg.confidence_threshold && !(*cfg.confidence_threshold > 0.5 && *cfg.confidence_threshold <= 1.0))
    throw ConfigError("experiment.confidence_threshold", "must be in (0.5, 1]");
  if (!(cfg.label_fraction > 0.0 && cfg.label_fraction <= 1.0))
    throw ConfigError("data.label_fraction", "must be in (0, 1]");
  if (std::abs(cfg.fractions.train + cfg.fractions.validation + cfg.fractions.test - 1.0) > 1e-9)
    throw ConfigError("data.fractions", "must sum to 1");
  if (cfg.data_path.empty()) {
    if (cfg.synthetic.n_per_class < 1) throw ConfigError("data.n_per_class", "must be >= 1");
    if (cfg.synthetic.dim < 1) throw ConfigError("data.dim", "must be >= 1");
    if (!(cfg.synthetic.separation >= 0)) throw ConfigError("data.separation", "must be >= 0");
    if (cfg.synthetic.grid && cfg.synthetic.grid->size() != cfg.synthetic.dim)
      throw ConfigError("data.grid", "height*width must equal data.dim");
    if (cfg.multimodal && cfg.synthetic.secondary_len < kVisualFieldLocations)
      throw ConfigError("data.secondary_len", "must be >= 52");
  }
  const auto& e = cfg.engine;
  if (e.beta < 1) throw ConfigError("engine.beta", "must be >= 1");
  if (!(e.gamma >= 0 && e.gamma <= 1)) throw ConfigError("engine.gamma", "must be in [0, 1]");
  if (!(e.policy_lr > 0)) throw ConfigError("engine.policy_lr", "must be > 0");
  if (!(e.classifier_lr > 0)) throw ConfigError("engine.classifier_lr", "must be > 0");
  if (!(e.weight_decay >= 0)) throw ConfigError("engine.weight_decay", "must be >= 0");
  if (e.epochs < 0) throw ConfigError("engine.epochs", "must be >= 0");
  if (e.warmup_steps < 0) throw ConfigError("engine.warmup_steps", "must be >= 0");
  if (e.batch_labeled < 1) throw ConfigError("engine.batch_labeled", "must be >= 1");
  if (e.batch_unlabeled < 1) throw ConfigError("engine.batch_unlabeled", "must be >= 1");
  if (e.batch_val < 1) throw ConfigError("engine.batch_val", "must be >= 1");
  if (!(e.pseudo_loss_weight >= 0)) throw ConfigError("engine.pseudo_loss_weight", "must be >= 0");
  for (auto h : e.hidden_dims)
    if (h < 1) throw ConfigError("engine.hidden_dims", "must be positive");
  if (!(e.crop_scale.min > 0 && e.crop_scale.min <= e.crop_scale.max && e.crop_scale.max <= 1))
    throw ConfigError("engine.crop_scale_min", "crop scale range must satisfy 0 < min <= max <= 1");
  for (std::size_t i = 0; i < cfg.compare_methods.size(); ++i)
    for (std::size_t j = i + 1; j < cfg.compare_methods.size(); ++j)
      if (cfg.compare_methods[i] == cfg.compare_methods[j])
        throw ConfigError("experiment.methods", "method listed twice: " + to_string(cfg.compare_methods[i]));
  if (cfg.beta_grid.empty()) throw ConfigError("ablation.betas", "must not be empty");
  for (int b : cfg.beta_grid)
    if (b < 1) throw ConfigError("ablation.betas", "every beta must be >= 1");
  if (cfg.gamma_grid.empty()) throw ConfigError("ablation.gammas", "must not be empty");
  for (double g : cfg.gamma_grid)
    if (!(g >= 0 && g <= 1)) throw ConfigError("ablation.gammas", "every gamma must be in [0, 1]");
}

}  // namespace pseudosup
