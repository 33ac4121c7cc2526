#include "pseudosup/experiment.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "pseudosup/checkpoint.hpp"
#include "pseudosup/dataset_io.hpp"

namespace fs = std::filesystem;

namespace pseudosup {

namespace {

void write_text_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

std::string hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

fs::path cell_dir(const ExperimentConfig& cfg, Method method, std::uint64_t seed) {
  return fs::path(cfg.output_dir) / to_string(method) / std::to_string(seed);
}

SeedOutcome run_cell(const ExperimentConfig& cfg, Method method, const DatasetSplits& splits, std::uint64_t hash,
                     std::uint64_t seed, const fs::path& dir) {
  const TrainResult result = run_method(method, splits, cfg, seed);
  std::ostringstream history;
  write_history_csv(history, result.history);
  write_text_file(dir / "history.csv", history.str());
  write_text_file(dir / "metrics.csv", "seed,split_hash," + metrics_csv_header() + "\n" + std::to_string(seed) + "," +
                                           hex(hash) + "," + metrics_csv_row(result.test_metrics) + "\n");
  std::ostringstream ckpt;
  save_checkpoint(ckpt, result.classifier);
  write_text_file(dir / "classifier.ckpt", ckpt.str());
  if (result.policy) {
    std::ostringstream pckpt;
    save_checkpoint(pckpt, *result.policy);
    write_text_file(dir / "policy.ckpt", pckpt.str());
  }
  return SeedOutcome{seed, hash, result.test_metrics};
}

}  // namespace

DatasetSplits build_splits(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (!cfg.data_path.empty()) return load_dataset(cfg.data_path);
  const auto& syn = cfg.synthetic;
  std::vector<Sample> samples =
      cfg.multimodal ? generate_multimodal_gaussians(syn.n_per_class, syn.multimodal_grid, syn.separation,
                                                     syn.secondary_len, seed)
                     : generate_overlapping_gaussians(syn.n_per_class, syn.dim, syn.separation, seed, syn.grid);
  return split_dataset(samples, cfg.label_fraction, cfg.fractions, seed);
}

EngineConfig engine_for(const ExperimentConfig& cfg, std::uint64_t seed) {
  EngineConfig e = cfg.engine;
  e.seed = seed;
  return e;
}

TrainResult run_method(Method method, const DatasetSplits& splits, const ExperimentConfig& cfg, std::uint64_t seed) {
  EngineConfig e = engine_for(cfg, seed);
  switch (method) {
    case Method::supervised:
      e.augment = false;
      return train_supervised_only(splits, e);
    case Method::pseudo_sup:
      e.augment = false;
      return train(splits, e);
    case Method::pseudo_sup_aug:
      e.augment = true;
      return train(splits, e);
    case Method::self_training:
      if (!cfg.confidence_threshold)
        throw ConfigError("experiment.confidence_threshold", "required for method self_training");
      e.augment = false;
      return train_self_training(splits, e, *cfg.confidence_threshold);
  }
  throw std::logic_error("unhandled method");
}

MethodSummary summarize(Method method, std::vector<SeedOutcome> runs) {
  MethodSummary s;
  s.method = method;
  std::vector<double> acc, f1, auc;
  for (const auto& r : runs) {
    acc.push_back(r.metrics.accuracy);
    f1.push_back(r.metrics.f1);
    auc.push_back(r.metrics.auc);
  }
  s.accuracy = mean_and_sample_std(acc);
  s.f1 = mean_and_sample_std(f1);
  s.auc = mean_and_sample_std(auc);
  s.runs = std::move(runs);
  return s;
}

std::string summary_csv_header() {
  return "method,n_seeds,accuracy_mean,accuracy_std,f1_mean,f1_std,auc_mean,auc_std";
}

std::string summary_csv_row(const MethodSummary& s) {
  return to_string(s.method) + "," + std::to_string(s.runs.size()) + "," + format_real(s.accuracy.mean) + "," +
         format_real(s.accuracy.stddev) + "," + format_real(s.f1.mean) + "," + format_real(s.f1.stddev) + "," +
         format_real(s.auc.mean) + "," + format_real(s.auc.stddev);
}

MethodSummary run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  std::vector<SeedOutcome> runs;
  for (auto seed : cfg.seeds) {
    const DatasetSplits splits = build_splits(cfg, seed);
    runs.push_back(run_cell(cfg, cfg.method, splits, split_hash(splits), seed, cell_dir(cfg, cfg.method, seed)));
  }
  MethodSummary summary = summarize(cfg.method, std::move(runs));
  write_text_file(fs::path(cfg.output_dir) / "summary.csv", summary_csv_header() + "\n" + summary_csv_row(summary) + "\n");
  write_text_file(fs::path(cfg.output_dir) / "config.echo", to_config_text(cfg));
  return summary;
}

AblationResult run_ablation(const ExperimentConfig& cfg) {
  validate(cfg);
  const Method method = cfg.method == Method::pseudo_sup_aug ? Method::pseudo_sup_aug : Method::pseudo_sup;
  AblationResult result;
  std::map<std::uint64_t, DatasetSplits> splits_by_seed;
  for (auto seed : cfg.seeds) splits_by_seed.emplace(seed, build_splits(cfg, seed));

  for (int beta : cfg.beta_grid) {
    for (double gamma : cfg.gamma_grid) {
      ExperimentConfig cell = cfg;
      cell.engine.beta = beta;
      cell.engine.gamma = gamma;
      std::vector<double> aucs;
      for (auto seed : cfg.seeds) {
        const TrainResult r = run_method(method, splits_by_seed.at(seed), cell, seed);
        result.rows.push_back(AblationRow{beta, gamma, seed, r.test_metrics});
        aucs.push_back(r.test_metrics.auc);
      }
      result.cells.push_back(AblationCell{beta, gamma, mean_and_sample_std(aucs)});
    }
  }

  std::ostringstream longform, mean, pivot;
  longform << "beta,gamma,seed,accuracy,f1,auc\n";
  for (const auto& r : result.rows)
    longform << r.beta << ',' << format_real(r.gamma) << ',' << r.seed << ',' << format_real(r.metrics.accuracy) << ','
             << format_real(r.metrics.f1) << ',' << format_real(r.metrics.auc) << '\n';
  mean << "beta,gamma,auc_mean,auc_std,n_seeds,is_default\n";
  for (const auto& c : result.cells)
    mean << c.beta << ',' << format_real(c.gamma) << ',' << format_real(c.auc.mean) << ',' << format_real(c.auc.stddev)
         << ',' << cfg.seeds.size() << ',' << ((c.beta == kDefaultBeta && c.gamma == kDefaultGamma) ? 1 : 0) << '\n';
  pivot << "beta";
  for (double g : cfg.gamma_grid) pivot << ",gamma=" << format_real(g);
  pivot << '\n';
  std::size_t k = 0;
  for (int beta : cfg.beta_grid) {
    pivot << beta;
    for (std::size_t j = 0; j < cfg.gamma_grid.size(); ++j) pivot << ',' << format_real(result.cells[k++].auc.mean);
    pivot << '\n';
  }
  const fs::path out(cfg.output_dir);
  write_text_file(out / "ablation.csv", longform.str());
  write_text_file(out / "ablation_mean.csv", mean.str());
  write_text_file(out / "ablation_pivot.csv", pivot.str());
  write_text_file(out / "config.echo", to_config_text(cfg));
  return result;
}

std::vector<MethodSummary> compare_methods(const ExperimentConfig& cfg) {
  validate(cfg);
  if (cfg.compare_methods.size() < 2) throw ConfigError("experiment.methods", "compare needs at least two methods");
  for (Method m : cfg.compare_methods)
    if (m == Method::self_training && !cfg.confidence_threshold)
      throw ConfigError("experiment.confidence_threshold", "required for method self_training");

  std::map<Method, std::vector<SeedOutcome>> by_method;
  std::ostringstream hashes;
  hashes << "method,seed,split_hash\n";
  for (auto seed : cfg.seeds) {
    const DatasetSplits splits = build_splits(cfg, seed);
    const std::uint64_t hash = split_hash(splits);
    for (Method m : cfg.compare_methods) {
      by_method[m].push_back(run_cell(cfg, m, splits, hash, seed, cell_dir(cfg, m, seed)));
      hashes << to_string(m) << ',' << seed << ',' << hex(hash) << '\n';
    }
  }
  std::vector<MethodSummary> out;
  std::string table = summary_csv_header() + "\n";
  for (Method m : cfg.compare_methods) {
    out.push_back(summarize(m, by_method.at(m)));
    table += summary_csv_row(out.back()) + "\n";
  }
  const fs::path dir(cfg.output_dir);
  write_text_file(dir / "comparison.csv", table);
  write_text_file(dir / "comparison_splits.csv", hashes.str());
  write_text_file(dir / "config.echo", to_config_text(cfg));
  return out;
}

std::string read_text_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace pseudosup
