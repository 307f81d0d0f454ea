#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "countdfm/errors.hpp"
#include "countdfm/experiment.hpp"
#include "countdfm/io.hpp"
#include "countdfm/parallel.hpp"
#include "countdfm/rng.hpp"
#include "countdfm/selection.hpp"
#include "countdfm/smc.hpp"

namespace {

using namespace countdfm;

std::vector<Family> column_families(const std::string& family, int d) {
  return std::vector<Family>(static_cast<std::size_t>(d), family_from_name(family));
}

int cmd_simulate(const std::string& config_path, std::uint64_t seed, const std::string& out_dir,
                 bool latent) {
  ExperimentConfig config = load_config(config_path);
  if (seed != 0) config.seed = seed;
  std::filesystem::create_directories(out_dir);

  const Preset preset =
      make_preset(family_from_name(config.preset.family), config.preset.d, config.preset.r,
                  config.preset.psi_set, mix_seed(config.seed, 0, 1), config.preset.nb_successes);
  const SimulatedPath path =
      simulate(preset.params, preset.marginals, config.T, config.burn_in, mix_seed(config.seed, 0, 2));

  save_csv(out_dir + "/data.csv", path.x);
  if (latent) {
    std::vector<std::string> zc, yc;
    for (int i = 0; i < path.z.cols(); ++i) zc.push_back("z" + std::to_string(i + 1));
    for (int i = 0; i < path.y.cols(); ++i) yc.push_back("y" + std::to_string(i + 1));
    save_csv_real(out_dir + "/latent_z.csv", path.z, zc);
    save_csv_real(out_dir + "/latent_y.csv", path.y, yc);
  }
  FittedModel truth;
  truth.params = preset.params;
  truth.marginals = preset.marginals;
  truth.latent_acf = stationary_acvf(preset.params);
  for (int i = 0; i < config.preset.d; ++i) {
    std::vector<int> support;
    for (int v = preset.marginals[static_cast<std::size_t>(i)].support_min();
         v <= preset.marginals[static_cast<std::size_t>(i)].support_max(); ++v)
      support.push_back(v);
    truth.observed_support.push_back(std::move(support));
  }
  save_model(out_dir + "/model_true.json", truth);
  std::cout << "wrote " << out_dir << "/data.csv (" << path.x.rows() << " x " << path.x.cols()
            << ")\n";
  return 0;
}

int cmd_fit(const std::string& data_path, const std::string& family, int r, int p,
            const std::string& out_path, int nb_successes, int hermite_K, int spline_M,
            int threads) {
  const CountData data = load_csv(data_path);
  FitOptions options;
  options.nb_successes = nb_successes;
  options.hermite_K = hermite_K;
  options.spline_M = spline_M;
  options.threads = resolve_threads(threads);
  const FittedModel model =
      fit(data.x, column_families(family, static_cast<int>(data.x.cols())), r, p, options);
  save_model(out_path, model);
  std::cout << "fitted d=" << model.params.d() << " r=" << model.params.r()
            << " p=" << model.params.p() << ", psd_shift=" << format_double(model.psd_shift)
            << ", wrote " << out_path << "\n";
  return 0;
}

int cmd_select(const std::string& data_path, const std::string& family, int r, int r_max,
               int p_max, int blocks, const std::vector<std::string>& rank_methods,
               const std::vector<std::string>& lag_methods, const std::string& out_dir,
               int nb_successes, int threads) {
  const CountData data = load_csv(data_path);
  const auto families = column_families(family, static_cast<int>(data.x.cols()));
  SelectionOptions options;
  options.blocks = blocks;
  options.nb_successes = nb_successes;
  options.threads = resolve_threads(threads);
  std::filesystem::create_directories(out_dir);

  std::vector<std::vector<std::string>> score_rows, chosen_rows;
  auto record = [&](const std::string& method, const SelectionResult& res) {
    for (std::size_t c = 0; c < res.candidates.size(); ++c) {
      if (!res.fold_scores.empty()) {
        for (std::size_t b = 0; b < res.fold_scores[c].size(); ++b)
          score_rows.push_back({method, std::to_string(res.candidates[c]), std::to_string(b),
                                format_double(res.fold_scores[c][b])});
      } else {
        score_rows.push_back(
            {method, std::to_string(res.candidates[c]), "-", format_double(res.scores[c])});
      }
    }
    chosen_rows.push_back({method, std::to_string(res.chosen)});
    for (const auto& w : res.warnings) std::cerr << method << ": " << w << "\n";
  };

  int chosen_r = r;
  for (const auto& name : rank_methods) {
    const SelectionResult res =
        select_rank(data.x, families, rank_method_from_name(name), r_max, options);
    record("rank_" + name, res);
    if (chosen_r <= 0) chosen_r = res.chosen;
  }
  for (const auto& name : lag_methods) {
    const SelectionResult res =
        select_lag(data.x, families, chosen_r, lag_method_from_name(name), p_max, options);
    record("lag_" + name, res);
  }
  write_report(out_dir + "/selection_scores.csv", {"method", "candidate", "fold", "score"},
               score_rows);
  write_report(out_dir + "/selection_chosen.csv", {"method", "chosen"}, chosen_rows);
  std::cout << "wrote " << out_dir << "/selection_scores.csv\n";
  return 0;
}

int cmd_forecast(const std::string& model_path, const std::string& data_path, int window,
                 int horizon, int particles, int n_qmc, int sweeps, std::uint64_t seed,
                 const std::string& out_dir, int threads) {
  const FittedModel model = load_model(model_path);
  const CountData data = load_csv(data_path);
  if (data.x.cols() != model.params.d())
    throw DataError("forecast: data has " + std::to_string(data.x.cols()) +
                    " columns but the model expects " + std::to_string(model.params.d()));
  std::filesystem::create_directories(out_dir);

  SisrOptions options;
  options.particles = particles;
  options.n_qmc = n_qmc;
  options.gibbs_sweeps = sweeps;
  options.threads = resolve_threads(threads);
  const int W = std::min(window, static_cast<int>(data.x.rows()));
  const ParticleEnsemble ensemble =
      run_sisr(data.x.bottomRows(W), model, options, seed == 0 ? 1 : seed);
  const ForecastDistribution dist =
      forecast_distribution(ensemble, model, horizon, options.threads);
  const Eigen::MatrixXi point = point_forecast(dist);

  std::vector<std::vector<std::string>> pmf_rows;
  for (int h = 1; h <= horizon; ++h)
    for (std::size_t i = 0; i < dist.support.size(); ++i)
      for (std::size_t v = 0; v < dist.support[i].size(); ++v)
        pmf_rows.push_back({std::to_string(h), std::to_string(i + 1),
                            std::to_string(dist.support[i][v]),
                            format_double(dist.pmf[static_cast<std::size_t>(h - 1)][i][v])});
  write_report(out_dir + "/forecast_pmf.csv", {"horizon", "series", "value", "prob"}, pmf_rows);
  save_csv(out_dir + "/point_forecast.csv", point);
  std::cout << "wrote " << out_dir << "/forecast_pmf.csv and point_forecast.csv\n";
  return 0;
}

int cmd_experiment(const std::string& config_path, std::uint64_t seed, const std::string& out_dir,
                   int threads) {
  ExperimentConfig config = load_config(config_path);
  if (seed != 0) config.seed = seed;
  if (threads != 0) config.threads = threads;
  const ExperimentSummary summary = run_experiment(config, out_dir);
  std::cout << "replications: " << summary.replications << ", failures: " << summary.failures
            << "\n";
  for (const auto& file : summary.report_files) std::cout << "wrote " << file << "\n";
  for (const auto& msg : summary.failure_messages) std::cerr << "replication failed: " << msg << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent Gaussian dynamic factor modeling for count time series"};
  app.require_subcommand(1);

  std::string config_path, data_path, model_path, out = "out", family = "poisson";
  std::uint64_t seed = 0;
  int threads = 0, r = 0, p = 1, r_max = 6, p_max = 4, blocks = 5;
  int particles = 1000, n_qmc = 1 << 13, sweeps = 10, window = 10, horizon = 5;
  int nb_successes = 3, hermite_K = 100, spline_M = 200;
  bool latent = false;
  std::vector<std::string> rank_methods, lag_methods;

  auto* sim = app.add_subcommand("simulate", "simulate a preset model and write data CSV");
  sim->add_option("--config", config_path, "experiment config JSON")->required();
  sim->add_option("--seed", seed, "seed override");
  sim->add_option("--out", out, "output directory");
  sim->add_flag("--latent", latent, "also write the latent paths");

  auto* fit_cmd = app.add_subcommand("fit", "fit the model to a data CSV");
  fit_cmd->add_option("--data", data_path, "input data CSV")->required();
  fit_cmd->add_option("--family", family, "marginal family for all columns");
  fit_cmd->add_option("--r", r, "number of factors")->required();
  fit_cmd->add_option("--p", p, "VAR lag order");
  fit_cmd->add_option("--out", out, "output model JSON")->required();
  fit_cmd->add_option("--nb-successes", nb_successes, "negative binomial successes");
  fit_cmd->add_option("--hermite-K", hermite_K, "Hermite truncation");
  fit_cmd->add_option("--spline-M", spline_M, "inverse-link knots");
  fit_cmd->add_option("--threads", threads, "worker threads (0 = all cores)");

  auto* sel = app.add_subcommand("select", "rank and lag selection on a data CSV");
  sel->add_option("--data", data_path, "input data CSV")->required();
  sel->add_option("--family", family, "marginal family for all columns");
  sel->add_option("--r", r, "factor count for lag selection (0: use rank choice)");
  sel->add_option("--r-max", r_max, "largest candidate rank");
  sel->add_option("--p-max", p_max, "largest candidate lag");
  sel->add_option("--blocks", blocks, "cross-validation blocks");
  sel->add_option("--rank-methods", rank_methods, "subset of ED,IC1,IC2,IC3,BCV_PC");
  sel->add_option("--lag-methods", lag_methods, "subset of AIC,HQ,SC,FPE,BCV");
  sel->add_option("--out", out, "output directory");
  sel->add_option("--nb-successes", nb_successes, "negative binomial successes");
  sel->add_option("--threads", threads, "worker threads (0 = all cores)");

  auto* fc = app.add_subcommand("forecast", "particle forecast from a fitted model");
  fc->add_option("--model", model_path, "fitted model JSON")->required();
  fc->add_option("--data", data_path, "observation CSV (window taken from the end)")->required();
  fc->add_option("--window", window, "observation window length");
  fc->add_option("--horizon", horizon, "forecast horizon");
  fc->add_option("--particles", particles, "particle count");
  fc->add_option("--n-qmc", n_qmc, "QMC points per rectangle probability");
  fc->add_option("--sweeps", sweeps, "Gibbs sweeps per constrained draw");
  fc->add_option("--seed", seed, "random seed");
  fc->add_option("--out", out, "output directory");
  fc->add_option("--threads", threads, "worker threads (0 = all cores)");

  auto* exp = app.add_subcommand("experiment", "run a replicated simulation experiment");
  exp->add_option("--config", config_path, "experiment config JSON")->required();
  exp->add_option("--seed", seed, "seed override");
  exp->add_option("--out", out, "output directory");
  exp->add_option("--threads", threads, "worker threads (0 = all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (sim->parsed()) return cmd_simulate(config_path, seed, out, latent);
    if (fit_cmd->parsed())
      return cmd_fit(data_path, family, r, p, out, nb_successes, hermite_K, spline_M, threads);
    if (sel->parsed()) {
      if (rank_methods.empty()) rank_methods = {"ED", "IC1", "IC2", "IC3", "BCV_PC"};
      if (lag_methods.empty()) lag_methods = {"AIC", "HQ", "SC", "FPE", "BCV"};
      return cmd_select(data_path, family, r, r_max, p_max, blocks, rank_methods, lag_methods, out,
                        nb_successes, threads);
    }
    if (fc->parsed())
      return cmd_forecast(model_path, data_path, window, horizon, particles, n_qmc, sweeps, seed,
                          out, threads);
    if (exp->parsed()) return cmd_experiment(config_path, seed, out, threads);
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
