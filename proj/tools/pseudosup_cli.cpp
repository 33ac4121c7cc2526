// pseudosup: experiment front-end for the pseudo-supervisor SSL library.
//
//   pseudosup run      --config exp.cfg [--method supervised] [--seeds 1,2,3] ...
//   pseudosup ablate   --config exp.cfg [--betas 10,50,100] [--gammas 0,0.5,0.9,1]
//   pseudosup compare  --config exp.cfg [--methods supervised,pseudo_sup]
//   pseudosup gen-data --out data.txt [--seed 7] [--dim 20] ...
//   pseudosup analyze-corr --data data.txt --output-dir corr/
//
// Exit codes: 0 success, 2 configuration error, 3 runtime error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "pseudosup/config.hpp"
#include "pseudosup/dataset_io.hpp"
#include "pseudosup/experiment.hpp"
#include "pseudosup/metrics.hpp"

using namespace pseudosup;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

// Flag name -> config key. Every flag overrides the value loaded from --config.
const std::vector<std::pair<std::string, std::string>> kOverrides = {
    {"--method", "experiment.method"},
    {"--seeds", "experiment.seeds"},
    {"--output-dir", "experiment.output_dir"},
    {"--threshold", "experiment.confidence_threshold"},
    {"--methods", "experiment.methods"},
    {"--data", "data.path"},
    {"--n-per-class", "data.n_per_class"},
    {"--dim", "data.dim"},
    {"--separation", "data.separation"},
    {"--grid", "data.grid"},
    {"--multimodal", "data.multimodal"},
    {"--multimodal-grid", "data.multimodal_grid"},
    {"--secondary-len", "data.secondary_len"},
    {"--label-fraction", "data.label_fraction"},
    {"--fractions", "data.fractions"},
    {"--beta", "engine.beta"},
    {"--gamma", "engine.gamma"},
    {"--policy-lr", "engine.policy_lr"},
    {"--classifier-lr", "engine.classifier_lr"},
    {"--weight-decay", "engine.weight_decay"},
    {"--epochs", "engine.epochs"},
    {"--batch-labeled", "engine.batch_labeled"},
    {"--batch-unlabeled", "engine.batch_unlabeled"},
    {"--batch-val", "engine.batch_val"},
    {"--warmup-steps", "engine.warmup_steps"},
    {"--pseudo-loss-weight", "engine.pseudo_loss_weight"},
    {"--hidden-dims", "engine.hidden_dims"},
    {"--policy-init", "engine.policy_init"},
    {"--crop-scale-min", "engine.crop_scale_min"},
    {"--crop-scale-max", "engine.crop_scale_max"},
    {"--betas", "ablation.betas"},
    {"--gammas", "ablation.gammas"},
};

struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> values;  // config key -> raw value
};

void add_config_flags(CLI::App* cmd, ConfigFlags& flags) {
  cmd->add_option("--config", flags.config_path, "key = value experiment config file");
  for (const auto& [flag, key] : kOverrides) {
    cmd->add_option_function<std::string>(
        flag, [&flags, key = key](const std::string& v) { flags.values[key] = v; }, "overrides " + key);
  }
}

ExperimentConfig resolve(const ConfigFlags& flags) {
  ExperimentConfig cfg;
  if (!flags.config_path.empty()) {
    try {
      cfg = parse_config_file(flags.config_path);
    } catch (const ParseError& e) {
      throw ConfigError("config", e.what());
    }
  }
  for (const auto& [flag, key] : kOverrides) {
    if (auto it = flags.values.find(key); it != flags.values.end()) set_field(cfg, key, it->second);
  }
  validate(cfg);
  return cfg;
}

void print_summary(const MethodSummary& s) {
  std::cout << to_string(s.method) << ": AUC " << s.auc.mean << " +- " << s.auc.stddev << ", Acc " << s.accuracy.mean
            << " +- " << s.accuracy.stddev << ", F1 " << s.f1.mean << " +- " << s.f1.stddev << " (" << s.runs.size()
            << " seeds, sample std)\n";
}

int cmd_run(const ConfigFlags& flags) {
  const ExperimentConfig cfg = resolve(flags);
  print_summary(run_experiment(cfg));
  std::cout << "wrote " << cfg.output_dir << "/summary.csv\n";
  return 0;
}

int cmd_ablate(const ConfigFlags& flags) {
  const ExperimentConfig cfg = resolve(flags);
  const AblationResult r = run_ablation(cfg);
  for (const auto& c : r.cells) {
    std::cout << "beta=" << c.beta << " gamma=" << c.gamma << " AUC " << c.auc.mean << " +- " << c.auc.stddev
              << ((c.beta == kDefaultBeta && c.gamma == kDefaultGamma) ? "  (default)" : "") << '\n';
  }
  std::cout << "wrote " << cfg.output_dir << "/ablation.csv\n";
  return 0;
}

int cmd_compare(const ConfigFlags& flags) {
  const ExperimentConfig cfg = resolve(flags);
  for (const auto& s : compare_methods(cfg)) print_summary(s);
  std::cout << "wrote " << cfg.output_dir << "/comparison.csv\n";
  return 0;
}

int cmd_gen_data(const ConfigFlags& flags, const std::string& out, std::uint64_t seed) {
  const ExperimentConfig cfg = resolve(flags);
  if (!cfg.data_path.empty()) throw ConfigError("data.path", "gen-data generates synthetic data; drop --data");
  const DatasetSplits splits = build_splits(cfg, seed);
  save_dataset(out, splits);
  std::cout << "wrote " << out << ": " << splits.labeled_train.size() << " labeled, " << splits.unlabeled_train.size()
            << " unlabeled, " << splits.validation.size() << " val, " << splits.test.size() << " test\n";
  return 0;
}

int cmd_analyze_corr(const ConfigFlags& flags, int bins, std::uint64_t seed) {
  const ExperimentConfig cfg = resolve(flags);
  const DatasetSplits splits = build_splits(cfg, seed);
  std::vector<Sample> labeled;
  for (const auto* part : {&splits.labeled_train, &splits.validation, &splits.test})
    labeled.insert(labeled.end(), part->begin(), part->end());
  const CorrelationDensity d = correlation_density(labeled, bins);

  const std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  std::ofstream within(dir / "within_density.csv");
  std::ofstream between(dir / "between_density.csv");
  if (!within || !between) throw std::runtime_error("cannot write to " + dir.string());
  write_density_csv(within, d.within_hist);
  write_density_csv(between, d.between_hist);

  const auto w = mean_and_sample_std(d.within_group);
  const auto b = mean_and_sample_std(d.between_group);
  std::ofstream summary(dir / "correlation_summary.csv");
  summary << "group,pairs,mean,std\n"
          << "within," << d.within_group.size() << ',' << w.mean << ',' << w.stddev << '\n'
          << "between," << d.between_group.size() << ',' << b.mean << ',' << b.stddev << '\n'
          << "skipped_zero_variance," << d.skipped_pairs << ",,\n";
  std::cout << "within-group mean r " << w.mean << " (" << d.within_group.size() << " pairs), between-group mean r "
            << b.mean << " (" << d.between_group.size() << " pairs), skipped " << d.skipped_pairs << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudo-supervisor semi-supervised learning experiments"};
  app.require_subcommand(1);

  ConfigFlags run_flags, ablate_flags, compare_flags, gen_flags, corr_flags;
  auto* run = app.add_subcommand("run", "train one method over all seeds");
  add_config_flags(run, run_flags);
  auto* ablate = app.add_subcommand("ablate", "beta x gamma grid of pseudo-supervisor runs");
  add_config_flags(ablate, ablate_flags);
  auto* compare = app.add_subcommand("compare", "several methods on shared splits");
  add_config_flags(compare, compare_flags);

  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset file");
  add_config_flags(gen, gen_flags);
  std::string gen_out;
  std::uint64_t gen_seed = 1;
  gen->add_option("--out", gen_out, "dataset file to write")->required();
  gen->add_option("--seed", gen_seed, "generation and split seed");

  auto* corr = app.add_subcommand("analyze-corr", "within- vs between-group correlation densities");
  add_config_flags(corr, corr_flags);
  int bins = 50;
  std::uint64_t corr_seed = 1;
  corr->add_option("--bins", bins, "histogram bins over [-1, 1]")->check(CLI::PositiveNumber);
  corr->add_option("--seed", corr_seed, "seed for synthetic data");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (run->parsed()) return cmd_run(run_flags);
    if (ablate->parsed()) return cmd_ablate(ablate_flags);
    if (compare->parsed()) return cmd_compare(compare_flags);
    if (gen->parsed()) return cmd_gen_data(gen_flags, gen_out, gen_seed);
    if (corr->parsed()) return cmd_analyze_corr(corr_flags, bins, corr_seed);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}
