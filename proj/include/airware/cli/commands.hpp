#pragma once

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "airware/archetypes.hpp"
#include "airware/cli/run_manifest.hpp"
#include "airware/config.hpp"
#include "airware/dataset_io.hpp"
#include "airware/eval/experiment.hpp"
#include "airware/eval/pipeline_io.hpp"
#include "airware/eval/report.hpp"
#include "airware/eval/tuning.hpp"
#include "airware/simulate.hpp"
#include "airware/tune.hpp"

namespace airware::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2, kIo = 3, kPartial = 4, kTuneFailed = 5 };

inline int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::Io:
    case ErrorCode::Format: return kIo;
    case ErrorCode::NoSuccessfulTrial: return kTuneFailed;
    case ErrorCode::InvalidArgument:
    case ErrorCode::NyquistViolation:
    case ErrorCode::GridViolation:
    case ErrorCode::BandOutOfRange:
    case ErrorCode::TooShort:
    case ErrorCode::TooFewUsers:
    case ErrorCode::InsufficientSamples: return kUsage;
    default: return kFailure;
  }
}

namespace detail {

struct Common {
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

/// Model and training knobs shared by train, tune, experiment and gridsearch.
struct ModelFlags {
  std::string model = "m3";
  std::string modality = "fused";
  int epochs = 100;
  int batch = 32;
  int patience = 15;
  std::size_t trees = 100;
  std::size_t pca = 100;
  int iterations = 5;
  std::string hparams_file;
};

inline void add_model_flags(CLI::App* cmd, ModelFlags& f, bool with_model = true) {
  if (with_model) {
    cmd->add_option("--model", f.model, "m1, m2, m3, m4, rf, svm or mlp")->capture_default_str();
    cmd->add_option("--modality", f.modality, "ir-only, doppler-only or fused")->capture_default_str();
  }
  cmd->add_option("--epochs", f.epochs, "maximum training epochs for neural models")->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--batch", f.batch, "mini-batch size")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--patience", f.patience, "early-stopping patience in epochs")->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--trees", f.trees, "random forest size")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--pca", f.pca, "principal components for the classical baselines")->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--iterations", f.iterations, "shuffled splits per user (personalized, user-calibrated)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--hparams", f.hparams_file, "hyper-parameter file (key = value), e.g. from tune");
}

inline eval::Family family_of(const std::string& s) {
  const auto f = eval::parse_family(s);
  require(f.has_value(), ErrorCode::InvalidArgument, "unknown model '" + s + "'");
  return *f;
}

inline eval::Modality modality_of(const std::string& s) {
  const auto m = eval::parse_modality(s);
  require(m.has_value(), ErrorCode::InvalidArgument, "unknown modality '" + s + "'");
  return *m;
}

inline eval::ExperimentConfig experiment_config(const ModelFlags& f, const Common& c) {
  eval::ExperimentConfig cfg;
  cfg.train.max_epochs = f.epochs;
  cfg.train.batch_size = static_cast<std::size_t>(f.batch);
  cfg.train.patience = f.patience;
  cfg.forest.n_trees = f.trees;
  cfg.pca_components = f.pca;
  cfg.iterations = f.iterations;
  cfg.jobs = c.jobs;
  cfg.forest.jobs = c.jobs;
  if (!f.hparams_file.empty()) {
    std::ifstream in(f.hparams_file);
    require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + f.hparams_file);
    cfg.hp = tune::parse_hparams(in);
  }
  return cfg;
}

inline std::string settings_text(const ModelFlags& f) {
  std::ostringstream os;
  os << "model=" << f.model << " modality=" << f.modality << " epochs=" << f.epochs << " batch=" << f.batch
     << " patience=" << f.patience << " trees=" << f.trees << " pca=" << f.pca << " iterations=" << f.iterations
     << " hparams=" << f.hparams_file;
  return os.str();
}

inline void ensure_parent(const fs::path& file) {
  const auto parent = fs::absolute(file).parent_path();
  std::error_code ec;
  fs::create_directories(parent, ec);
  require(!ec, ErrorCode::Io, "cannot create directory " + parent.string());
}

inline fs::path parent_of(const fs::path& file) { return fs::absolute(file).parent_path(); }

/// Removes a generated subdirectory so reruns do not leave stale files.
inline void clear_subdir(const fs::path& dir, const char* name) {
  std::error_code ec;
  fs::remove_all(dir / name, ec);
  require(!ec, ErrorCode::Io, "cannot clear " + (dir / name).string());
}

}  // namespace detail

/// Parses and runs one command; all diagnostics go to `err`.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"AirWare gesture workbench: simulate, featurize, train and evaluate Doppler + IR gesture models"};
  app.name("airware");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "expand help for every command");
  detail::Common common;
  app.add_option("--seed", common.seed, "random seed (AIRWARE_SEED overrides)")->capture_default_str();
  app.add_option("--jobs", common.jobs, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  // simulate
  int users = 13, reps = 8;
  std::string mode_s = "ir-required", out_path, data_dir, config_file, archetype_file;
  bool keep_raw = false;
  auto* sim = app.add_subcommand("simulate", "render a labelled synthetic dataset");
  sim->add_option("--users", users, "participants")->capture_default_str();
  sim->add_option("--reps", reps, "repetitions per gesture")->capture_default_str();
  sim->add_option("--mode", mode_s, "ir-required or free-form")->capture_default_str();
  sim->add_option("--config", config_file, "pipeline config file (key = value)");
  sim->add_option("--archetypes", archetype_file, "gesture archetype table");
  sim->add_flag("--keep-raw", keep_raw, "also store segment waveforms (needed by gridsearch and featurize)");
  sim->add_option("--out", out_path, "output dataset directory")->required();

  // featurize
  auto* feat = app.add_subcommand("featurize", "re-featurize a dataset's raw waveforms with a new config");
  feat->add_option("--data", data_dir, "dataset directory with raw waveforms")->required();
  feat->add_option("--config", config_file, "pipeline config file")->required();
  feat->add_option("--out", out_path, "new dataset directory")->required();

  // gridsearch
  detail::ModelFlags gflags;
  gflags.model = "rf";
  auto* grid = app.add_subcommand("gridsearch", "score all 18 STFT configurations (random forest, LOSO, fused)");
  grid->add_option("--data", data_dir, "dataset directory with raw waveforms")->required();
  grid->add_option("--out", out_path, "CSV file")->required();
  detail::add_model_flags(grid, gflags, false);

  // train
  detail::ModelFlags tflags;
  auto* train = app.add_subcommand("train", "fit one model on a whole dataset and save it");
  train->add_option("--data", data_dir, "dataset directory")->required();
  train->add_option("--out", out_path, "model file")->required();
  detail::add_model_flags(train, tflags);

  // tune
  detail::ModelFlags uflags;
  int budget = 20;
  auto* tun = app.add_subcommand("tune", "TPE hyper-parameter search on a 3-fold user split");
  tun->add_option("--data", data_dir, "dataset directory")->required();
  tun->add_option("--budget", budget, "number of trials")->capture_default_str()->check(CLI::PositiveNumber);
  tun->add_option("--out", out_path, "trial history CSV; best hyper-parameters go to <out>.best")->required();
  detail::add_model_flags(tun, uflags);

  // experiment
  detail::ModelFlags eflags;
  std::string strategy_s = "user-calibrated";
  auto* exp = app.add_subcommand("experiment", "cross-validated evaluation");
  exp->add_option("--data", data_dir, "dataset directory")->required();
  exp->add_option("--strategy", strategy_s, "loso, personalized or user-calibrated")->capture_default_str();
  exp->add_option("--out", out_path, "report directory")->required();
  detail::add_model_flags(exp, eflags);

  // report
  std::vector<std::string> report_dirs;
  auto* rep = app.add_subcommand("report", "summarize experiment reports; two reports add a Welch t-test");
  rep->add_option("--in", report_dirs, "report directories")->required();

  try {
    std::vector<std::string> argv_rev(args.rbegin(), args.rend() - 1);
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  }

  if (const char* env = std::getenv("AIRWARE_SEED"); env && *env) {
    try {
      std::size_t pos = 0;
      common.seed = std::stoull(env, &pos);
      if (env[pos] != '\0') throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      err << "usage error: AIRWARE_SEED must be an unsigned integer\n";
      return kUsage;
    }
  }

  RunManifest manifest;
  manifest.command_line = args;
  manifest.seed = common.seed;
  const Rng rng(common.seed);

  try {
    if (sim->parsed()) {
      const auto mode = parse_segmentation_mode(mode_s);
      require(mode.has_value(), ErrorCode::InvalidArgument, "unknown mode '" + mode_s + "'");
      require(users >= 2, ErrorCode::TooFewUsers, "need at least 2 users, got " + std::to_string(users));
      PipelineConfig cfg;
      if (!config_file.empty()) {
        cfg = load_config(config_file);
        manifest.inputs.push_back(config_file);
      }
      cfg.rng_seed = common.seed;
      sim::SimulationOptions opts;
      opts.jobs = common.jobs;
      opts.keep_raw = keep_raw;
      if (!archetype_file.empty()) {
        opts.archetypes = sim::load_archetypes(archetype_file);
        manifest.inputs.push_back(archetype_file);
      }
      const fs::path dir(out_path);
      const auto t0 = std::chrono::steady_clock::now();
      auto res = sim::simulate_dataset(users, reps, *mode, cfg, rng, opts);
      manifest.mark("simulate", t0);
      for (const auto& w : res.warnings) err << "warning: " << w << '\n';
      detail::clear_subdir(dir, "records");
      detail::clear_subdir(dir, "raw");
      io::save_dataset(dir, res.dataset, keep_raw ? &res.raw : nullptr);
      manifest.config_hash = git_blob_hash(format_config(res.dataset.config) + sim::format_archetypes(opts.archetypes));
      manifest.write(dir);
      out << "wrote " << res.dataset.size() << " records to " << dir.string() << '\n';
      return kOk;
    }

    if (feat->parsed()) {
      require(fs::weakly_canonical(data_dir) != fs::weakly_canonical(out_path), ErrorCode::InvalidArgument,
              "featurize writes a new dataset directory; --out must differ from --data");
      const auto cfg = load_config(config_file);
      auto loaded = io::load_dataset(data_dir, true);
      const auto t0 = std::chrono::steady_clock::now();
      auto ds = dsp::featurize_raw(*loaded.raw, cfg, common.jobs);
      manifest.mark("featurize", t0);
      loaded.raw->config = ds.config;
      const fs::path dir(out_path);
      detail::clear_subdir(dir, "records");
      detail::clear_subdir(dir, "raw");
      io::save_dataset(dir, ds, &*loaded.raw);
      manifest.inputs = {data_dir, config_file};
      manifest.config_hash = git_blob_hash(format_config(ds.config));
      manifest.write(dir);
      out << "wrote " << ds.size() << " records to " << dir.string() << '\n';
      return kOk;
    }

    if (grid->parsed()) {
      const auto loaded = io::load_dataset(data_dir, true);
      auto cfg = detail::experiment_config(gflags, common);
      const auto t0 = std::chrono::steady_clock::now();
      const auto cells = dsp::stft_grid_search(
          *loaded.raw,
          [&](const Dataset& ds) {
            return eval::run_experiment(ds, eval::Family::Rf, eval::Strategy::Loso, eval::Modality::Fused, cfg, rng)
                .overall_mean;
          },
          common.jobs);
      manifest.mark("gridsearch", t0);
      std::ostringstream csv;
      csv << std::setprecision(10) << "window,overlap,half_width,score\n";
      for (const auto& c : cells) csv << c.window << ',' << c.overlap << ',' << c.half_width << ',' << c.score << '\n';
      detail::ensure_parent(out_path);
      write_file(out_path, csv.str());
      for (const auto& c : cells)
        if (c.failed) err << "warning: window " << c.window << " overlap " << c.overlap << " half_width "
                          << c.half_width << " failed: " << c.error << '\n';
      const auto& best = cells.front();
      out << "winner: window=" << best.window << " overlap=" << best.overlap << " half_width=" << best.half_width
          << " score=" << best.score << '\n';
      manifest.inputs = {data_dir};
      manifest.outputs = {out_path};
      manifest.config_hash = git_blob_hash(format_config(loaded.dataset.config) + detail::settings_text(gflags));
      manifest.write(detail::parent_of(out_path));
      return kOk;
    }

    if (train->parsed()) {
      const auto family = detail::family_of(tflags.model);
      const auto modality = detail::modality_of(tflags.modality);
      const auto cfg = detail::experiment_config(tflags, common);
      const auto loaded = io::load_dataset(data_dir);
      const auto t0 = std::chrono::steady_clock::now();
      const auto& ds = loaded.dataset;
      std::vector<int> classes;
      for (auto g : ds.classes()) classes.push_back(code(g));
      const auto p = eval::fit_pipeline(ds, classes, family, modality, cfg, rng);
      manifest.mark("train", t0);
      for (const auto& w : p.warnings) err << "warning: " << w << '\n';
      detail::ensure_parent(out_path);
      io::save_sections(out_path, eval::pipeline_sections(p));
      manifest.inputs = {data_dir};
      if (!tflags.hparams_file.empty()) manifest.inputs.push_back(tflags.hparams_file);
      manifest.outputs = {out_path};
      manifest.config_hash = git_blob_hash(format_config(ds.config) + detail::settings_text(tflags));
      manifest.write(detail::parent_of(out_path));
      out << "saved " << to_string(family) << " (" << to_string(modality) << ", " << classes.size() << " classes) to "
          << out_path << '\n';
      return kOk;
    }

    if (tun->parsed()) {
      const auto family = detail::family_of(uflags.model);
      const auto modality = detail::modality_of(uflags.modality);
      const auto cfg = detail::experiment_config(uflags, common);
      const auto loaded = io::load_dataset(data_dir);
      const auto t0 = std::chrono::steady_clock::now();
      const auto objective = eval::tuning_objective(loaded.dataset, family, modality, cfg);
      tune::TuneResult result;
      int code = kOk;
      std::string failure;
      try {
        result = tune::tune(objective, tune::SearchSpace{}, budget, tune::TpeConfig{}, rng);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoSuccessfulTrial) throw;
        code = kTuneFailed;
        failure = e.what();
      }
      manifest.mark("tune", t0);
      detail::ensure_parent(out_path);
      std::ostringstream csv;
      if (code == kOk) {
        tune::write_history_csv(csv, result.history);
        write_file(out_path, csv.str());
        write_file(out_path + ".best", tune::format_hparams(result.best.hp));
        out << "best trial " << result.best.index << " score " << std::setprecision(6) << result.best.score << '\n'
            << tune::format_hparams(result.best.hp);
      } else {
        err << failure << '\n';
        return code;
      }
      manifest.inputs = {data_dir};
      manifest.outputs = {out_path, out_path + ".best"};
      manifest.config_hash = git_blob_hash(format_config(loaded.dataset.config) + detail::settings_text(uflags) +
                                           " budget=" + std::to_string(budget));
      manifest.write(detail::parent_of(out_path));
      return kOk;
    }

    if (exp->parsed()) {
      const auto family = detail::family_of(eflags.model);
      const auto modality = detail::modality_of(eflags.modality);
      const auto strategy = eval::parse_strategy(strategy_s);
      require(strategy.has_value(), ErrorCode::InvalidArgument, "unknown strategy '" + strategy_s + "'");
      const auto cfg = detail::experiment_config(eflags, common);
      const auto loaded = io::load_dataset(data_dir);
      const auto t0 = std::chrono::steady_clock::now();
      const auto report = eval::run_experiment(loaded.dataset, family, *strategy, modality, cfg, rng);
      manifest.mark("experiment", t0);
      const fs::path dir(out_path);
      detail::clear_subdir(dir, "confusion");
      io::detail::ensure_dir(dir / "confusion");
      write_file(dir / "report.json", eval::report_json(report).dump(2) + "\n");
      write_file(dir / "report.txt", eval::report_text(report));
      for (const auto& f : report.folds) {
        if (f.failed) continue;
        char name[64];
        std::snprintf(name, sizeof name, "fold_u%03d_i%d.csv", f.user, f.iteration);
        write_file(dir / "confusion" / name, eval::confusion_csv(f.confusion));
      }
      manifest.inputs = {data_dir};
      if (!eflags.hparams_file.empty()) manifest.inputs.push_back(eflags.hparams_file);
      manifest.config_hash = git_blob_hash(format_config(loaded.dataset.config) + detail::settings_text(eflags) +
                                           " strategy=" + strategy_s);
      manifest.write(dir);
      out << eval::report_text(report);
      return report.complete ? kOk : kPartial;
    }

    if (rep->parsed()) {
      std::vector<eval::Json> reports;
      for (const auto& d : report_dirs) {
        const auto text = read_file(fs::path(d) / "report.json");
        try {
          reports.push_back(eval::Json::parse(text));
        } catch (const eval::Json::exception& e) {
          fail(ErrorCode::Format, d + "/report.json: " + e.what());
        }
      }
      out << "model  strategy          modality      users  mean    std_error  complete\n";
      for (const auto& j : reports) {
        char line[160];
        std::snprintf(line, sizeof line, "%-6s %-17s %-13s %5zu  %.4f  %.4f     %s\n",
                      j.at("family").get<std::string>().c_str(), j.at("strategy").get<std::string>().c_str(),
                      j.at("modality").get<std::string>().c_str(), j.at("per_user").size(),
                      j.at("overall_mean").get<double>(), j.at("std_error").get<double>(),
                      j.at("complete").get<bool>() ? "yes" : "no");
        out << line;
      }
      if (reports.size() == 2) {
        auto scores = [](const eval::Json& j) {
          std::vector<double> v;
          for (const auto& u : j.at("per_user")) v.push_back(u.at("macro_tpr").get<double>());
          return v;
        };
        const auto t = eval::welch_t_test(scores(reports[0]), scores(reports[1]));
        out << "welch t = " << std::setprecision(6) << t.t << ", df = " << t.df << ", two-sided p = " << t.p_two_sided
            << '\n';
      }
      return kOk;
    }
  } catch (const Error& e) {
    err << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const nlohmann::json::exception& e) {
    err << "Format: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    err << "Io: " << e.what() << '\n';
    return kIo;
  }
  return kUsage;
}

inline int run_cli(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return run_cli(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace airware::cli
