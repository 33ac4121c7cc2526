#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "pseudosup/checkpoint.hpp"
#include "pseudosup/dataset_io.hpp"
#include "pseudosup/experiment.hpp"

using namespace pseudosup;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pseudosup_test_" + name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig tiny(const fs::path& out) {
  ExperimentConfig cfg;
  cfg.output_dir = out.string();
  cfg.synthetic.n_per_class = 60;
  cfg.synthetic.dim = 4;
  cfg.seeds = {1, 2, 3};
  cfg.engine.hidden_dims = {6};
  cfg.engine.epochs = 2;
  cfg.engine.warmup_steps = 10;
  cfg.engine.batch_labeled = 8;
  cfg.engine.batch_unlabeled = 8;
  cfg.engine.batch_val = 8;
  cfg.engine.beta = 4;
  return cfg;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string f; std::getline(ss, f, ',');) out.push_back(f);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PSEUDOSUP_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("text form round-trips") {
    ExperimentConfig cfg = tiny("somewhere");
    cfg.method = Method::self_training;
    cfg.confidence_threshold = 0.85;
    cfg.synthetic.grid = GridDims{2, 2};
    cfg.engine.gamma = 1.0 / 3.0;
    cfg.engine.policy_init = PolicyInit::random;
    cfg.gamma_grid = {0.25, 0.75};
    cfg.compare_methods = {Method::pseudo_sup_aug, Method::self_training, Method::supervised};
    std::istringstream in(to_config_text(cfg));
    CHECK(parse_config(in) == cfg);
    std::istringstream defaults(to_config_text(ExperimentConfig{}));
    CHECK(parse_config(defaults) == ExperimentConfig{});
  }

  TEST_CASE("sections, comments and overrides") {
    std::istringstream in(
        "# experiment\n[experiment]\nmethod = supervised\nseeds = 4, 9\n\n[engine]\nbeta = 7  # inline\n"
        "hidden_dims = 5,3\n[data]\nlabel_fraction = 0.25\n");
    const auto cfg = parse_config(in);
    CHECK(cfg.method == Method::supervised);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{4, 9});
    CHECK(cfg.engine.beta == 7);
    CHECK(cfg.engine.hidden_dims == std::vector<Eigen::Index>{5, 3});
    CHECK(cfg.label_fraction == 0.25);
  }

  TEST_CASE("errors name the field or line") {
    std::istringstream bad_line("[engine]\nbeta 5\n");
    try {
      parse_config(bad_line);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
    ExperimentConfig cfg;
    try {
      set_field(cfg, "engine.gamma", "abc");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.field() == "engine.gamma");
    }
    CHECK_THROWS_AS(set_field(cfg, "engine.nonsense", "1"), ConfigError);

    cfg.method = Method::self_training;
    try {
      validate(cfg);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.field() == "experiment.confidence_threshold");
    }
    ExperimentConfig g;
    g.gamma_grid = {0.5, 1.5};
    CHECK_THROWS_AS(validate(g), ConfigError);
    ExperimentConfig s;
    s.seeds.clear();
    CHECK_THROWS_AS(validate(s), ConfigError);
  }

  TEST_CASE("method names") {
    for (auto m : {Method::pseudo_sup, Method::pseudo_sup_aug, Method::supervised, Method::self_training})
      CHECK(parse_method(to_string(m)) == m);
    CHECK_THROWS_AS(parse_method("fixmatch"), ConfigError);
  }
}

TEST_SUITE("run_experiment") {
  TEST_CASE("writes the per-seed layout and a consistent summary") {
    const auto out = scratch("layout");
    auto cfg = tiny(out);
    const auto summary = run_experiment(cfg);
    REQUIRE(summary.runs.size() == 3);
    for (auto seed : cfg.seeds) {
      const auto dir = out / "pseudo_sup" / std::to_string(seed);
      CHECK(fs::exists(dir / "history.csv"));
      CHECK(fs::exists(dir / "metrics.csv"));
      CHECK(fs::exists(dir / "classifier.ckpt"));
      CHECK(fs::exists(dir / "policy.ckpt"));
      std::ifstream ck(dir / "classifier.ckpt");
      CHECK_NOTHROW(load_checkpoint<double>(ck));
    }

    // Summary statistics recomputed from the per-seed metrics files.
    std::vector<double> aucs;
    for (auto seed : cfg.seeds) {
      const auto rows = lines(read_text_file(out / "pseudo_sup" / std::to_string(seed) / "metrics.csv"));
      REQUIRE(rows.size() == 2);
      CHECK(rows[0] == "seed,split_hash," + metrics_csv_header());
      aucs.push_back(std::stod(split_csv(rows[1])[4]));
    }
    const auto ms = mean_and_sample_std(aucs);
    CHECK(std::abs(ms.mean - summary.auc.mean) <= 1e-12);
    CHECK(std::abs(ms.stddev - summary.auc.stddev) <= 1e-12);

    const auto summary_rows = lines(read_text_file(out / "summary.csv"));
    REQUIRE(summary_rows.size() == 2);
    CHECK(summary_rows[0] == summary_csv_header());
    const auto f = split_csv(summary_rows[1]);
    CHECK(f[0] == "pseudo_sup");
    CHECK(f[1] == "3");
    CHECK(std::abs(std::stod(f[6]) - ms.mean) <= 1e-12);

    std::istringstream echo(read_text_file(out / "config.echo"));
    CHECK(parse_config(echo) == cfg);
    fs::remove_all(out);
  }

  TEST_CASE("supervised over five seeds gives one summary row") {
    const auto out = scratch("sup5");
    auto cfg = tiny(out);
    cfg.method = Method::supervised;
    cfg.seeds = {1, 2, 3, 4, 5};
    const auto s = run_experiment(cfg);
    CHECK(s.runs.size() == 5);
    CHECK(lines(read_text_file(out / "summary.csv")).size() == 2);
    CHECK_FALSE(fs::exists(out / "supervised" / "1" / "policy.ckpt"));
    fs::remove_all(out);
  }

  TEST_CASE("re-running gives byte-identical outputs") {
    for (auto method : {Method::pseudo_sup, Method::pseudo_sup_aug, Method::self_training}) {
      const auto a = scratch("det_a"), b = scratch("det_b");
      auto cfg = tiny(a);
      cfg.method = method;
      cfg.confidence_threshold = 0.8;
      if (method == Method::pseudo_sup_aug) cfg.synthetic.grid = GridDims{2, 2};
      run_experiment(cfg);
      cfg.output_dir = b.string();
      run_experiment(cfg);
      const auto rel = fs::path(to_string(method)) / "2";
      CHECK(read_text_file(a / "summary.csv") == read_text_file(b / "summary.csv"));
      CHECK(read_text_file(a / rel / "history.csv") == read_text_file(b / rel / "history.csv"));
      CHECK(read_text_file(a / rel / "classifier.ckpt") == read_text_file(b / rel / "classifier.ckpt"));
      fs::remove_all(a);
      fs::remove_all(b);
    }
  }

  TEST_CASE("data files are used as-is for every seed") {
    const auto out = scratch("file");
    fs::create_directories(out);
    const auto splits =
        split_dataset(generate_overlapping_gaussians(60, 3, 1.0, 5), 0.5, {0.7, 0.1, 0.2}, 5);
    const auto path = out / "data.txt";
    {
      std::ofstream os(path);
      save_dataset(os, splits);
    }
    auto cfg = tiny(out / "run");
    cfg.data_path = path.string();
    CHECK(build_splits(cfg, 1) == splits);
    CHECK(build_splits(cfg, 2) == splits);
    const auto s = run_experiment(cfg);
    CHECK(s.runs[0].split_hash == split_hash(splits));
    fs::remove_all(out);
  }

  TEST_CASE("multimodal synthetic data appends the upscaled vector") {
    auto cfg = tiny("unused");
    cfg.multimodal = true;
    const auto splits = build_splits(cfg, 1);
    const auto& s = splits.labeled_train.front();
    CHECK(s.features.size() == 4 * 5 + 104);
    REQUIRE(s.grid.has_value());
    CHECK(s.grid->height == 4);
  }
}

TEST_SUITE("run_ablation") {
  TEST_CASE("row count and the default cell") {
    const auto out = scratch("ablate");
    auto cfg = tiny(out);
    cfg.seeds = {1, 2};
    cfg.beta_grid = {2, 4};
    cfg.gamma_grid = {0.0, 0.9, 1.0};
    const auto r = run_ablation(cfg);
    CHECK(r.rows.size() == 2 * 3 * 2);
    CHECK(r.cells.size() == 6);
    CHECK(lines(read_text_file(out / "ablation.csv")).size() == 1 + 12);
    CHECK(lines(read_text_file(out / "ablation_mean.csv")).size() == 1 + 6);
    const auto pivot = lines(read_text_file(out / "ablation_pivot.csv"));
    CHECK(pivot.size() == 1 + 2);
    fs::remove_all(out);
  }

  TEST_CASE("a one-cell grid equals a plain run") {
    const auto a = scratch("ablate1"), b = scratch("plain1");
    auto cfg = tiny(a);
    cfg.beta_grid = {kDefaultBeta};
    cfg.gamma_grid = {kDefaultGamma};
    cfg.engine.beta = 3;  // the grid value must win
    const auto ab = run_ablation(cfg);
    auto plain = tiny(b);
    plain.engine.beta = kDefaultBeta;
    plain.engine.gamma = kDefaultGamma;
    const auto run = run_experiment(plain);
    REQUIRE(ab.rows.size() == run.runs.size());
    for (std::size_t i = 0; i < run.runs.size(); ++i) {
      CHECK(ab.rows[i].metrics.auc == run.runs[i].metrics.auc);
      CHECK(ab.rows[i].metrics.accuracy == run.runs[i].metrics.accuracy);
    }
    CHECK(ab.cells[0].auc.mean == run.auc.mean);
    const auto mean = lines(read_text_file(a / "ablation_mean.csv"));
    CHECK(mean[1].substr(mean[1].size() - 2) == ",1");
    fs::remove_all(a);
    fs::remove_all(b);
  }

  TEST_CASE("gamma out of range is rejected") {
    auto cfg = tiny(scratch("ablate_bad"));
    cfg.gamma_grid = {1.1};
    CHECK_THROWS_AS(run_ablation(cfg), ConfigError);
  }
}

TEST_SUITE("compare_methods") {
  TEST_CASE("shared splits and one row per method") {
    const auto out = scratch("compare");
    auto cfg = tiny(out);
    cfg.synthetic.grid = GridDims{2, 2};
    cfg.compare_methods = {Method::supervised, Method::pseudo_sup, Method::pseudo_sup_aug};
    const auto summaries = compare_methods(cfg);
    REQUIRE(summaries.size() == 3);
    CHECK(lines(read_text_file(out / "comparison.csv")).size() == 1 + 3);
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
      CHECK(summaries[0].runs[i].split_hash == summaries[1].runs[i].split_hash);
      CHECK(summaries[0].runs[i].split_hash == summaries[2].runs[i].split_hash);
      CHECK(summaries[0].runs[i].split_hash == split_hash(build_splits(cfg, cfg.seeds[i])));
    }
    const auto split_rows = lines(read_text_file(out / "comparison_splits.csv"));
    CHECK(split_rows.size() == 1 + 3 * 3);
    fs::remove_all(out);
  }

  TEST_CASE("dropping one method drops exactly one row") {
    const auto out = scratch("compare2");
    auto cfg = tiny(out);
    const auto two = compare_methods(cfg);
    CHECK(two.size() == 2);
    cfg.compare_methods = {Method::supervised};
    CHECK_THROWS_AS(compare_methods(cfg), ConfigError);
    fs::remove_all(out);
  }
}

TEST_SUITE("cli") {
  TEST_CASE("exit codes") {
    const auto out = scratch("cli");
    fs::create_directories(out);
    const auto cfg_path = out / "exp.cfg";
    {
      std::ofstream os(cfg_path);
      os << "[experiment]\nmethod = self_training\nseeds = 1\n[data]\nn_per_class = 40\ndim = 3\n"
            "[engine]\nepochs = 1\nwarmup_steps = 5\nhidden_dims = 4\n";
    }
    const std::string base = "run --config " + cfg_path.string() + " --output-dir " + (out / "o").string();
    CHECK(run_cli(base) == 2);
    CHECK(run_cli(base + " --threshold 0.9") == 0);
    CHECK(fs::exists(out / "o" / "summary.csv"));
    CHECK(run_cli(base + " --threshold 0.9 --gamma 2") == 2);
    CHECK(run_cli("run --no-such-flag") == 2);
    CHECK(run_cli("run --data " + (out / "missing.txt").string() + " --output-dir " + (out / "m").string()) == 3);

    CHECK(run_cli("gen-data --out " + (out / "d.txt").string() + " --n-per-class 30 --dim 3 --seed 4") == 0);
    std::ifstream data(out / "d.txt");
    CHECK_NOTHROW(load_dataset(data));
    CHECK(run_cli("analyze-corr --n-per-class 30 --dim 5 --output-dir " + (out / "c").string()) == 0);
    CHECK(fs::exists(out / "c" / "within_density.csv"));
    CHECK(fs::exists(out / "c" / "between_density.csv"));
    fs::remove_all(out);
  }
}
