#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gibbsnet/bounds.hpp"
#include "gibbsnet/network.hpp"
#include "gibbsnet/prior_posterior.hpp"
#include "gibbsnet/risk.hpp"
#include "gibbsnet/sampler.hpp"
#include "gibbsnet/synthesis.hpp"

namespace gibbsnet {

enum class SweepTask { regression, cls_entropy, cls_misclass };

inline std::string to_string(SweepTask t) {
  switch (t) {
    case SweepTask::regression: return "regression";
    case SweepTask::cls_entropy: return "cls_entropy";
    case SweepTask::cls_misclass: return "cls_misclass";
  }
  return "unknown";
}

inline SweepTask sweep_task_from_string(const std::string& s) {
  if (s == "regression") return SweepTask::regression;
  if (s == "cls_entropy") return SweepTask::cls_entropy;
  if (s == "cls_misclass") return SweepTask::cls_misclass;
  throw std::invalid_argument("unknown task: " + s);
}

enum class LambdaPolicy { theorem_formula, manual };

struct SweepPlan {
  SweepTask task = SweepTask::regression;
  ScheduleId schedule_id = ScheduleId::reg_tienmt;
  double prop_constant = 1.0;
  std::vector<std::int64_t> n_grid;
  int replicates = 10;
  TargetFunction target;
  NoiseModel noise;  // regression only
  double beta = 1.0;
  int d = 1;
  LambdaPolicy lambda_policy = LambdaPolicy::theorem_formula;
  double lambda_manual = 1.0;
  double bernstein_K = 4.0;  // Assumption constant for the classification lambda
  double bound_B = 2.0;
  double clamp_C = 1.0;
  Activation activation{ActivationKind::tanh};
  SamplerConfig sampler;  // master_seed ignored; derived per cell
  std::int64_t mc_n = 20000;
  std::uint64_t master_seed = 1;

  void validate(bool for_rate_fit = true) const {
    if (n_grid.empty()) throw std::invalid_argument("n_grid must be nonempty");
    for (std::size_t i = 1; i < n_grid.size(); ++i)
      if (n_grid[i] <= n_grid[i - 1])
        throw std::invalid_argument("n_grid must be strictly increasing");
    if (for_rate_fit && n_grid.size() < 4)
      throw std::invalid_argument("rate fits need an n_grid of length >= 4");
    if (replicates < 1) throw std::invalid_argument("replicates must be >= 1");
    if (beta <= 0.0) throw std::invalid_argument("beta must be positive");
    if (d < 1) throw std::invalid_argument("d must be >= 1");
  }

  double theory_exponent() const {
    switch (task) {
      case SweepTask::regression: return -2.0 * beta / (2.0 * beta + d);
      case SweepTask::cls_entropy: return -beta / (beta + d);
      case SweepTask::cls_misclass: return -beta / (2.0 * beta + d);
    }
    return 0.0;
  }

  double lambda_for(std::int64_t n) const {
    if (lambda_policy == LambdaPolicy::manual) return lambda_manual;
    if (task == SweepTask::regression)
      return lambda_regression(n, clamp_C, noise.declared_sigma, noise.declared_varsigma);
    return lambda_classification(n, bernstein_K, clamp_C);
  }
};

struct ExperimentReport {
  std::int64_t n = 0;
  int replicate = 0;
  double lambda = 0.0;
  int L = 0;
  int D = 0;
  RiskEstimate excess;       // posterior-averaged, the rate-fit quantity
  RiskEstimate excess_plug;  // plug-in (posterior-mean) predictor
  double accept_rate = 0.0;
  double ess_proxy = 0.0;
  std::uint64_t seed = 0;
  bool usable = true;
  bool noncompliant_activation = false;
};

struct RateFit {
  double exponent = 0.0;
  double intercept = 0.0;
  double stderr_ = 0.0;
  double r_squared = 0.0;
  double theory_exponent = 0.0;
  int points_used = 0;
  int points_dropped = 0;
};

enum class LogCorrection { none, lognpow, logn_over_n_form };

/// OLS of log(excess) on the schedule-appropriate abscissa. Points with
/// nonpositive excess are dropped (logged via points_dropped); fewer than 4
/// survivors is an error.
inline RateFit fit_rate(const std::vector<std::pair<std::int64_t, double>>& points,
                        double theory_exponent, LogCorrection correction = LogCorrection::none,
                        double log_power = 0.0) {
  std::vector<double> xs, ys;
  int dropped = 0;
  for (const auto& [n, excess] : points) {
    if (!(excess > 0.0)) {
      ++dropped;
      continue;
    }
    const double ln = std::log(static_cast<double>(n));
    double x = ln, y = std::log(excess);
    switch (correction) {
      case LogCorrection::none: break;
      case LogCorrection::lognpow:
        y -= log_power * std::log(ln);
        break;
      case LogCorrection::logn_over_n_form:
        x = ln - std::log(ln);  // slope vs log(n / log n)
        break;
    }
    xs.push_back(x);
    ys.push_back(y);
  }
  const int k = static_cast<int>(xs.size());
  if (k < 4) throw std::runtime_error("fewer than 4 usable points for rate fit");

  double xbar = 0.0, ybar = 0.0;
  for (int i = 0; i < k; ++i) {
    xbar += xs[i];
    ybar += ys[i];
  }
  xbar /= k;
  ybar /= k;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (int i = 0; i < k; ++i) {
    sxx += (xs[i] - xbar) * (xs[i] - xbar);
    sxy += (xs[i] - xbar) * (ys[i] - ybar);
    syy += (ys[i] - ybar) * (ys[i] - ybar);
  }
  const double slope = sxy / sxx;
  const double intercept = ybar - slope * xbar;
  double rss = 0.0;
  for (int i = 0; i < k; ++i) {
    const double r = ys[i] - intercept - slope * xs[i];
    rss += r * r;
  }
  RateFit fit;
  fit.exponent = slope;
  fit.intercept = intercept;
  fit.stderr_ = k > 2 ? std::sqrt(rss / (k - 2) / sxx) : 0.0;
  fit.r_squared = syy > 0.0 ? 1.0 - rss / syy : 1.0;
  fit.theory_exponent = theory_exponent;
  fit.points_used = k;
  fit.points_dropped = dropped;
  return fit;
}

/// One (n, replicate) cell: schedule the architecture, pick lambda, draw the
/// dataset, sample the Gibbs posterior, score the task's excess risk. Fully
/// determined by derive_seed(master, n, replicate).
inline ExperimentReport run_cell(const SweepPlan& plan, std::int64_t n, int replicate) {
  const std::uint64_t cell_seed =
      derive_seed(plan.master_seed, static_cast<std::uint64_t>(n),
                  static_cast<std::uint64_t>(replicate));

  const ArchitectureSchedule schedule(plan.schedule_id, plan.prop_constant);
  const NetworkArchitecture arch =
      schedule_architecture(schedule, n, plan.d, plan.beta, plan.activation);
  const ClampSpec clamp(plan.clamp_C);

  ExperimentReport report;
  report.n = n;
  report.replicate = replicate;
  report.seed = cell_seed;
  report.L = arch.depth_L;
  report.D = arch.width_D;
  report.lambda = plan.lambda_for(n);
  report.noncompliant_activation = !plan.activation.compliant();

  const bool regression = plan.task == SweepTask::regression;
  const Dataset data =
      regression
          ? make_regression_dataset(plan.target, plan.noise, n, plan.d, derive_seed(cell_seed, 1))
          : make_classification_dataset(plan.target, n, plan.d, derive_seed(cell_seed, 1));

  GibbsConfig gibbs(report.lambda, PriorSpec(1.0, plan.bound_B),
                    regression ? LossKind::squared : LossKind::logistic);
  SamplerConfig scfg = plan.sampler;
  scfg.master_seed = derive_seed(cell_seed, 2);
  const GibbsSampleResult sample = sample_gibbs(arch, clamp, gibbs, data, scfg);

  double accept = 0.0, ess = 0.0;
  bool failed = false;
  for (const auto& diag : sample.diagnostics) {
    accept += diag.acceptance_rate;
    ess += diag.ess_proxy;
    failed = failed || diag.failure;
  }
  report.accept_rate = accept / static_cast<double>(sample.diagnostics.size());
  report.ess_proxy = ess;
  if (failed) {
    report.usable = false;
    return report;
  }

  const std::uint64_t mc_seed = derive_seed(cell_seed, 3);
  ExcessRiskPair excess;
  switch (plan.task) {
    case SweepTask::regression:
      excess = population_excess_risk_regression(arch, clamp, sample.draws, plan.target,
                                                 plan.mc_n, mc_seed);
      break;
    case SweepTask::cls_entropy:
      excess = population_excess_risk_logistic(arch, clamp, sample.draws, plan.target,
                                               plan.mc_n, mc_seed);
      break;
    case SweepTask::cls_misclass:
      excess = misclassification_excess(arch, clamp, sample.draws, plan.target, plan.mc_n,
                                        mc_seed);
      break;
  }
  report.excess = excess.posterior_averaged;
  report.excess_plug = excess.plug_in;
  return report;
}

struct SweepResult {
  std::vector<ExperimentReport> cells;
  RateFit fit;
  bool fit_ok = false;
  bool failed = false;  // more than half the cells unusable
  std::string csv_path;
  std::string json_path;
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline nlohmann::json plan_to_json(const SweepPlan& plan) {
  nlohmann::json n_grid = nlohmann::json::array();
  for (auto n : plan.n_grid) n_grid.push_back(n);
  return {{"task", to_string(plan.task)},
          {"schedule_id", to_string(plan.schedule_id)},
          {"prop_constant", plan.prop_constant},
          {"n_grid", n_grid},
          {"replicates", plan.replicates},
          {"target", to_string(plan.target.id)},
          {"target_beta", plan.target.nominal_beta},
          {"target_amplitude", plan.target.amplitude},
          {"noise", to_string(plan.noise.id)},
          {"beta", plan.beta},
          {"d", plan.d},
          {"lambda_policy",
           plan.lambda_policy == LambdaPolicy::theorem_formula ? "theorem_formula" : "manual"},
          {"bernstein_K", plan.bernstein_K},
          {"B", plan.bound_B},
          {"C", plan.clamp_C},
          {"activation", to_string(plan.activation)},
          {"sampler", to_string(plan.sampler.kind)},
          {"n_chains", plan.sampler.n_chains},
          {"burn_in", plan.sampler.burn_in},
          {"n_samples", plan.sampler.n_samples},
          {"thinning", plan.sampler.thinning},
          {"mc_n", plan.mc_n},
          {"master_seed", plan.master_seed}};
}

inline nlohmann::json fit_to_json(const RateFit& fit) {
  return {{"exponent", fit.exponent},
          {"intercept", fit.intercept},
          {"stderr", fit.stderr_},
          {"r_squared", fit.r_squared},
          {"theory_exponent", fit.theory_exponent},
          {"points_used", fit.points_used},
          {"points_dropped", fit.points_dropped}};
}

/// Runs every (n, replicate) cell, persists per-cell rows and the rate fit.
/// Cells are independent; `jobs` bounds the worker pool. Results do not
/// depend on execution order.
inline SweepResult run_sweep(const SweepPlan& plan, const std::filesystem::path& out_dir,
                             int jobs = 1, bool quiet = false) {
  plan.validate();
  std::filesystem::create_directories(out_dir);

  const std::size_t total_cells = plan.n_grid.size() * static_cast<std::size_t>(plan.replicates);
  SweepResult result;
  result.cells.resize(total_cells);

  std::vector<std::pair<std::int64_t, int>> work;
  work.reserve(total_cells);
  for (auto n : plan.n_grid)
    for (int rep = 0; rep < plan.replicates; ++rep) work.emplace_back(n, rep);

  if (jobs <= 1) {
    for (std::size_t i = 0; i < work.size(); ++i) {
      result.cells[i] = run_cell(plan, work[i].first, work[i].second);
      if (!quiet)
        std::fprintf(stderr, "cell n=%lld rep=%d done (%zu/%zu)\n",
                     static_cast<long long>(work[i].first), work[i].second, i + 1, work.size());
    }
  } else {
    std::size_t next = 0;
    while (next < work.size()) {
      const std::size_t batch = std::min<std::size_t>(jobs, work.size() - next);
      std::vector<std::future<ExperimentReport>> futures;
      futures.reserve(batch);
      for (std::size_t j = 0; j < batch; ++j)
        futures.push_back(std::async(std::launch::async, run_cell, std::cref(plan),
                                     work[next + j].first, work[next + j].second));
      for (std::size_t j = 0; j < batch; ++j) result.cells[next + j] = futures[j].get();
      next += batch;
      if (!quiet)
        std::fprintf(stderr, "cells %zu/%zu done\n", next, work.size());
    }
  }

  std::size_t unusable = 0;
  for (const auto& cell : result.cells)
    if (!cell.usable) ++unusable;
  result.failed = 2 * unusable >= total_cells;

  // Replicate means per n; negative means are dropped inside fit_rate.
  std::vector<std::pair<std::int64_t, double>> points;
  for (auto n : plan.n_grid) {
    double acc = 0.0;
    int count = 0;
    for (const auto& cell : result.cells)
      if (cell.n == n && cell.usable) {
        acc += cell.excess.value;
        ++count;
      }
    if (count > 0) points.emplace_back(n, acc / count);
  }
  const LogCorrection correction = plan.schedule_id == ScheduleId::reg_langer
                                       ? LogCorrection::lognpow
                                       : LogCorrection::logn_over_n_form;
  try {
    result.fit = fit_rate(points, plan.theory_exponent(), correction, 3.0);
    result.fit_ok = true;
  } catch (const std::exception&) {
    result.fit_ok = false;
  }

  // CSV rows, fixed order and fixed formatting so reruns are byte-identical.
  const auto csv_path = out_dir / "sweep_cells.csv";
  {
    std::ofstream csv(csv_path);
    csv << "task,schedule,n,replicate,lambda,L,D,excess_risk,se,accept_rate,seed\n";
    for (const auto& c : result.cells) {
      csv << to_string(plan.task) << "," << to_string(plan.schedule_id) << "," << c.n << ","
          << c.replicate << "," << detail::fmt_double(c.lambda) << "," << c.L << "," << c.D
          << "," << detail::fmt_double(c.excess.value) << ","
          << detail::fmt_double(c.excess.mc_se) << "," << detail::fmt_double(c.accept_rate)
          << "," << c.seed << "\n";
    }
  }

  const auto json_path = out_dir / "sweep_summary.json";
  {
    nlohmann::json j = {{"plan", plan_to_json(plan)},
                        {"lambda", plan.lambda_for(plan.n_grid.back())},
                        {"schedule_id", to_string(plan.schedule_id)},
                        {"prop_constant", plan.prop_constant},
                        {"failed", result.failed},
                        {"unusable_cells", unusable}};
    if (result.fit_ok) j["rate_fit"] = fit_to_json(result.fit);
    nlohmann::json means = nlohmann::json::array();
    for (const auto& [n, m] : points) means.push_back({{"n", n}, {"mean_excess", m}});
    j["mean_excess_per_n"] = means;
    std::ofstream out(json_path);
    out << j.dump(2) << "\n";
  }

  result.csv_path = csv_path.string();
  result.json_path = json_path.string();
  return result;
}

}  // namespace gibbsnet
