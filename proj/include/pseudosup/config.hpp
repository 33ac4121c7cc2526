#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "pseudosup/data.hpp"
#include "pseudosup/engine.hpp"

namespace pseudosup {

enum class Method { pseudo_sup, pseudo_sup_aug, supervised, self_training };

std::string to_string(Method m);
Method parse_method(const std::string& s);

/// Inline synthetic dataset description (used when no data path is given).
struct SyntheticSpec {
  int n_per_class = 1500;
  int dim = 20;
  double separation = 1.0;
  std::optional<GridDims> grid;
  GridDims multimodal_grid{4, 5};
  Eigen::Index secondary_len = 104;

  bool operator==(const SyntheticSpec&) const = default;
};

struct ExperimentConfig {
  Method method = Method::pseudo_sup;
  std::string data_path;  // empty: generate from `synthetic`
  SyntheticSpec synthetic;
  bool multimodal = false;
  double label_fraction = 0.5;
  SplitFractions fractions{2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0};
  EngineConfig engine;
  std::optional<double> confidence_threshold;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string output_dir = "out";
  std::vector<int> beta_grid{10, 50, 100};
  std::vector<double> gamma_grid{0.0, 0.5, 0.9, 1.0};
  std::vector<Method> compare_methods{Method::supervised, Method::pseudo_sup};

  bool operator==(const ExperimentConfig& o) const;
};

/// Invalid configuration; `field()` names the offending `section.key`.
class ConfigError : public InvalidInput {
 public:
  ConfigError(std::string field, const std::string& message)
      : InvalidInput(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Sets one field from its textual value. `key` is `section.name`.
void set_field(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// `key = value` lines under `[section]` headers; `#` starts a comment.
ExperimentConfig parse_config(std::istream& is);
ExperimentConfig parse_config_file(const std::string& path);

/// Canonical text form; `parse_config(to_config_text(c)) == c`.
std::string to_config_text(const ExperimentConfig& cfg);

/// Cross-field checks (required fields, ranges). Throws ConfigError.
void validate(const ExperimentConfig& cfg);

}  // namespace pseudosup
