#include "countdfm/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "countdfm/errors.hpp"
#include "countdfm/parallel.hpp"
#include "countdfm/rng.hpp"

namespace countdfm {

using nlohmann::json;

namespace {

Eigen::MatrixXd stack_params(const std::vector<MarginalSpec>& marginals) {
  std::vector<double> values;
  for (const auto& spec : marginals)
    for (double v : spec.params()) values.push_back(v);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(values.size()), 1);
  for (std::size_t i = 0; i < values.size(); ++i) out(static_cast<Eigen::Index>(i), 0) = values[i];
  return out;
}

Eigen::MatrixXd stack_matrices(const std::vector<Eigen::MatrixXd>& mats) {
  Eigen::Index rows = 0;
  for (const auto& m : mats) rows += m.rows();
  Eigen::MatrixXd out(rows, mats.front().cols());
  Eigen::Index at = 0;
  for (const auto& m : mats) {
    out.middleRows(at, m.rows()) = m;
    at += m.rows();
  }
  return out;
}

struct TruthModel {
  DfmParams params;
  std::vector<MarginalSpec> marginals;
  std::vector<Family> families;
};

TruthModel make_truth(const ExperimentConfig& config, std::uint64_t rep_seed) {
  TruthModel truth;
  if (config.model_file) {
    const FittedModel model = load_model(*config.model_file);
    truth.params = model.params;
    truth.marginals = model.marginals;
    for (const auto& spec : truth.marginals) truth.families.push_back(spec.family());
    return truth;
  }
  const Preset preset =
      make_preset(family_from_name(config.preset.family), config.preset.d, config.preset.r,
                  config.preset.psi_set, rep_seed, config.preset.nb_successes);
  truth.params = preset.params;
  truth.marginals = preset.marginals;
  truth.families = preset.families;
  return truth;
}

int multinomial_cells(const std::vector<MarginalSpec>& marginals) {
  int m = 0;
  for (const auto& spec : marginals)
    if (spec.family() == Family::Multinomial)
      m = std::max(m, static_cast<int>(spec.params().size()));
  return m;
}

}  // namespace

ExperimentConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError("config: " + std::string(e.what()));
  }
  if (j.value("schema_version", 0) != 1) throw FormatError("config: unsupported schema_version");

  ExperimentConfig c;
  if (j.contains("preset")) {
    const json& p = j.at("preset");
    c.preset.family = p.value("family", c.preset.family);
    c.preset.d = p.value("d", c.preset.d);
    c.preset.r = p.value("r", c.preset.r);
    c.preset.psi_set = p.value("psi_set", c.preset.psi_set);
    c.preset.nb_successes = p.value("nb_successes", c.preset.nb_successes);
  }
  if (j.contains("model_file")) c.model_file = j.at("model_file").get<std::string>();
  c.T = j.value("T", c.T);
  c.replications = j.value("replications", c.replications);
  c.seed = j.value("seed", c.seed);
  c.burn_in = j.value("burn_in", c.burn_in);
  if (j.contains("tasks")) c.tasks = j.at("tasks").get<std::vector<std::string>>();
  c.fit_r = j.value("fit_r", c.fit_r);
  c.fit_p = j.value("fit_p", c.fit_p);
  c.holdout = j.value("holdout", c.holdout);
  c.window = j.value("window", c.window);
  c.particles = j.value("particles", c.particles);
  c.n_qmc = j.value("n_qmc", c.n_qmc);
  c.gibbs_sweeps = j.value("gibbs_sweeps", c.gibbs_sweeps);
  c.r_max = j.value("r_max", c.r_max);
  c.p_max = j.value("p_max", c.p_max);
  c.blocks = j.value("blocks", c.blocks);
  if (j.contains("rank_methods"))
    c.rank_methods = j.at("rank_methods").get<std::vector<std::string>>();
  if (j.contains("lag_methods"))
    c.lag_methods = j.at("lag_methods").get<std::vector<std::string>>();
  c.threads = j.value("threads", c.threads);
  return c;
}

std::string config_to_json_text(const ExperimentConfig& c) {
  json j;
  j["schema_version"] = 1;
  j["preset"] = {{"family", c.preset.family},
                 {"d", c.preset.d},
                 {"r", c.preset.r},
                 {"psi_set", c.preset.psi_set},
                 {"nb_successes", c.preset.nb_successes}};
  if (c.model_file) j["model_file"] = *c.model_file;
  j["T"] = c.T;
  j["replications"] = c.replications;
  j["seed"] = c.seed;
  j["burn_in"] = c.burn_in;
  j["tasks"] = c.tasks;
  j["fit_r"] = c.fit_r;
  j["fit_p"] = c.fit_p;
  j["holdout"] = c.holdout;
  j["window"] = c.window;
  j["particles"] = c.particles;
  j["n_qmc"] = c.n_qmc;
  j["gibbs_sweeps"] = c.gibbs_sweeps;
  j["r_max"] = c.r_max;
  j["p_max"] = c.p_max;
  j["blocks"] = c.blocks;
  j["rank_methods"] = c.rank_methods;
  j["lag_methods"] = c.lag_methods;
  j["threads"] = c.threads;
  return j.dump(2);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("load_config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return config_from_json_text(text);
}

ExperimentSummary run_experiment(const ExperimentConfig& config, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const int R = config.replications;
  const int threads = resolve_threads(config.threads);

  const bool do_estimation =
      std::find(config.tasks.begin(), config.tasks.end(), "estimation") != config.tasks.end();
  const bool do_forecasting =
      std::find(config.tasks.begin(), config.tasks.end(), "forecasting") != config.tasks.end();
  const bool do_rank =
      std::find(config.tasks.begin(), config.tasks.end(), "rank_selection") != config.tasks.end();
  const bool do_lag =
      std::find(config.tasks.begin(), config.tasks.end(), "lag_selection") != config.tasks.end();

  struct RepResult {
    bool ok = false;
    std::string error;
    // estimation
    Eigen::MatrixXd theta_hat, theta_true;
    Eigen::MatrixXd lambda_hat, lambda_true;
    Eigen::MatrixXd eps_hat, eps_true;
    Eigen::MatrixXd psi_hat, psi_true;
    Eigen::MatrixXd eta_hat, eta_true;
    // forecasting
    ForecastMetrics metrics;
    // selection
    std::vector<int> rank_chosen;  // aligned with config.rank_methods
    std::vector<int> lag_chosen;   // aligned with config.lag_methods
  };

  std::vector<RepResult> results(static_cast<std::size_t>(R));

  parallel_for(R, threads, [&](int rep) {
    RepResult& out = results[static_cast<std::size_t>(rep)];
    try {
      const TruthModel truth = make_truth(config, mix_seed(config.seed, rep, 1));
      const int fit_r = config.fit_r > 0 ? config.fit_r : truth.params.r();
      const int fit_p = config.fit_p > 0 ? config.fit_p : truth.params.p();
      const SimulatedPath path = simulate(truth.params, truth.marginals, config.T,
                                          config.burn_in, mix_seed(config.seed, rep, 2));

      FitOptions fit_opts;
      fit_opts.threads = 1;  // replications already run in parallel
      fit_opts.nb_successes = config.preset.nb_successes;
      fit_opts.multinomial_m = multinomial_cells(truth.marginals);

      if (do_estimation) {
        const FittedModel fitted = fit(path.x, truth.families, fit_r, fit_p, fit_opts);
        out.theta_hat = stack_params(fitted.marginals);
        out.theta_true = stack_params(truth.marginals);
        out.lambda_hat = fitted.params.lambda;
        out.lambda_true = truth.params.lambda;
        out.eps_hat = fitted.params.sigma_eps;
        out.eps_true = truth.params.sigma_eps;
        out.psi_hat = stack_matrices(fitted.params.psi);
        out.psi_true = stack_matrices(truth.params.psi);
        out.eta_hat = fitted.params.sigma_eta;
        out.eta_true = truth.params.sigma_eta;
      }

      if (do_forecasting) {
        const int H = config.holdout;
        if (config.T <= H + config.window)
          throw ParameterError("run_experiment: T too short for holdout + window");
        const int T_fit = config.T - H;
        const Eigen::MatrixXi history = path.x.topRows(T_fit);
        const FittedModel fitted = fit(history, truth.families, fit_r, fit_p, fit_opts);

        SisrOptions sisr;
        sisr.particles = config.particles;
        sisr.n_qmc = config.n_qmc;
        sisr.gibbs_sweeps = config.gibbs_sweeps;
        sisr.threads = 1;
        const Eigen::MatrixXi window = history.bottomRows(std::min(config.window, T_fit));
        const ParticleEnsemble ens =
            run_sisr(window, fitted, sisr, mix_seed(config.seed, rep, 3));
        const ForecastDistribution dist = forecast_distribution(ens, fitted, H, 1);
        const Eigen::MatrixXi point = point_forecast(dist);

        out.metrics = forecast_metrics(
            ens, dist, point, path.x.bottomRows(H), path.z.bottomRows(H), path.y.bottomRows(H),
            history, path.z.topRows(T_fit), path.y.topRows(T_fit));
      }

      if (do_rank || do_lag) {
        SelectionOptions sel;
        sel.blocks = config.blocks;
        sel.nb_successes = config.preset.nb_successes;
        sel.multinomial_m = multinomial_cells(truth.marginals);
        sel.threads = 1;
        if (do_rank)
          for (const auto& name : config.rank_methods)
            out.rank_chosen.push_back(
                select_rank(path.x, truth.families, rank_method_from_name(name), config.r_max, sel)
                    .chosen);
        if (do_lag)
          for (const auto& name : config.lag_methods)
            out.lag_chosen.push_back(
                select_lag(path.x, truth.families, fit_r, lag_method_from_name(name),
                           config.p_max, sel)
                    .chosen);
      }
      out.ok = true;
    } catch (const std::exception& e) {
      out.ok = false;
      out.error = e.what();
    }
  });

  ExperimentSummary summary;
  summary.replications = R;
  for (const auto& res : results)
    if (!res.ok) {
      ++summary.failures;
      summary.failure_messages.push_back(res.error);
    }

  const std::string scope = out_dir + "/";

  if (do_estimation) {
    LossAccumulator theta, lambda, eps, psi, eta;
    for (const auto& res : results) {
      if (!res.ok) continue;
      theta.add(res.theta_hat, res.theta_true);
      lambda.add(res.lambda_hat, res.lambda_true);
      eps.add(res.eps_hat, res.eps_true);
      psi.add(res.psi_hat, res.psi_true);
      eta.add(res.eta_hat, res.eta_true);
    }
    std::vector<std::vector<std::string>> rows;
    auto emit = [&](const std::string& name, const LossAccumulator& acc) {
      rows.push_back({name, format_double(acc.l2_loss()), format_double(acc.bias()),
                      std::to_string(acc.count())});
    };
    emit("theta", theta);
    emit("lambda", lambda);
    emit("sigma_eps", eps);
    emit("psi", psi);
    emit("sigma_eta", eta);
    const std::string file = scope + "estimation_losses.csv";
    write_report(file, {"parameter", "l2_loss", "bias", "replications"}, rows);
    summary.report_files.push_back(file);
  }

  if (do_forecasting) {
    const int H = config.holdout;
    std::vector<double> rmfe_y(H, 0.0), rmfe_z(H, 0.0), rmfe_x(H, 0.0), sens(H, 0.0),
        sens_last(H, 0.0), sens_marginal(H, 0.0);
    int n_ok = 0;
    for (const auto& res : results) {
      if (!res.ok) continue;
      ++n_ok;
      for (int h = 0; h < H; ++h) {
        rmfe_y[static_cast<std::size_t>(h)] += res.metrics.rmfe_y[static_cast<std::size_t>(h)];
        rmfe_z[static_cast<std::size_t>(h)] += res.metrics.rmfe_z[static_cast<std::size_t>(h)];
        rmfe_x[static_cast<std::size_t>(h)] += res.metrics.rmfe_x[static_cast<std::size_t>(h)];
        sens[static_cast<std::size_t>(h)] += res.metrics.sens[static_cast<std::size_t>(h)];
        sens_last[static_cast<std::size_t>(h)] += res.metrics.sens_last[static_cast<std::size_t>(h)];
        sens_marginal[static_cast<std::size_t>(h)] +=
            res.metrics.sens_marginal[static_cast<std::size_t>(h)];
      }
    }
    std::vector<std::vector<std::string>> rows;
    for (int h = 0; h < H; ++h) {
      const double n = std::max(1, n_ok);
      rows.push_back({std::to_string(h + 1), format_double(rmfe_y[static_cast<std::size_t>(h)] / n),
                      format_double(rmfe_z[static_cast<std::size_t>(h)] / n),
                      format_double(rmfe_x[static_cast<std::size_t>(h)] / n),
                      format_double(sens[static_cast<std::size_t>(h)] / n),
                      format_double(sens_last[static_cast<std::size_t>(h)] / n),
                      format_double(sens_marginal[static_cast<std::size_t>(h)] / n)});
    }
    const std::string file = scope + "forecast_metrics.csv";
    write_report(file, {"horizon", "rmfe_y", "rmfe_z", "rmfe_x", "sens", "sens_last", "sens_marginal"},
                 rows);
    summary.report_files.push_back(file);
  }

  auto emit_frequency = [&](const std::string& file_name,
                            const std::vector<std::string>& methods, int max_candidate,
                            auto chosen_of) {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t m = 0; m < methods.size(); ++m) {
      std::vector<int> counts(static_cast<std::size_t>(max_candidate) + 1, 0);
      int failed = 0;
      for (const auto& res : results) {
        if (!res.ok) {
          ++failed;
          continue;
        }
        const std::vector<int>& chosen = chosen_of(res);
        if (m < chosen.size() && chosen[m] >= 0 && chosen[m] <= max_candidate)
          ++counts[static_cast<std::size_t>(chosen[m])];
      }
      for (int c = 1; c <= max_candidate; ++c)
        rows.push_back({methods[m], std::to_string(c),
                        std::to_string(counts[static_cast<std::size_t>(c)])});
      rows.push_back({methods[m], "failed", std::to_string(failed)});
    }
    const std::string file = scope + file_name;
    write_report(file, {"method", "candidate", "count"}, rows);
    summary.report_files.push_back(file);
  };

  if (do_rank)
    emit_frequency("rank_selection_freq.csv", config.rank_methods, config.r_max,
                   [](const RepResult& res) -> const std::vector<int>& { return res.rank_chosen; });
  if (do_lag)
    emit_frequency("lag_selection_freq.csv", config.lag_methods, config.p_max,
                   [](const RepResult& res) -> const std::vector<int>& { return res.lag_chosen; });

  {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"replications", std::to_string(summary.replications)});
    rows.push_back({"failures", std::to_string(summary.failures)});
    const std::string file = scope + "run_summary.csv";
    write_report(file, {"key", "value"}, rows);
    summary.report_files.push_back(file);
  }
  return summary;
}

}  // namespace countdfm
