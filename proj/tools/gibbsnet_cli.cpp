// Command-line front end: experiment cells, rate sweeps, PAC-Bayes bound
// evaluation, lemma-level numeric checks, and assumption validators.
// Progress goes to stderr; data goes to files under --out (paths echoed on
// stdout). Exit codes: 0 success, 1 validation failure, 2 runtime failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "gibbsnet/bounds.hpp"
#include "gibbsnet/config.hpp"
#include "gibbsnet/harness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gibbsnet;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed_override;
  int jobs = 1;
  int verbosity = 0;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required = true) {
  auto* c = cmd->add_option("--config", opts.config_path, "JSON config file");
  if (config_required) c->required();
  cmd->add_option("--out", opts.out_dir, "output directory");
  cmd->add_option("--seed", opts.seed_override, "master seed override");
  cmd->add_option("--jobs", opts.jobs, "worker pool size");
  cmd->add_flag_function("--verbose", [&opts](std::int64_t n) { opts.verbosity = static_cast<int>(n); },
                         "increase logging (stderr)");
}

SweepPlan load_plan(const CommonOpts& opts) {
  SweepPlan plan = opts.config_path.empty() ? SweepPlan{} : parse_sweep_plan_file(opts.config_path);
  if (opts.config_path.empty()) {
    plan.n_grid = {128, 256, 512, 1024};
    plan.noise = NoiseModel::gaussian_model(1.0);
  }
  if (opts.seed_override) plan.master_seed = *opts.seed_override;
  return plan;
}

void write_json(const fs::path& path, const json& payload) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << payload.dump(2) << "\n";
  std::printf("%s\n", path.string().c_str());
}

json report_to_json(const ExperimentReport& r) {
  return {{"n", r.n},
          {"replicate", r.replicate},
          {"lambda", r.lambda},
          {"L", r.L},
          {"D", r.D},
          {"excess_risk", to_json(r.excess)},
          {"excess_risk_plug_in", to_json(r.excess_plug)},
          {"accept_rate", r.accept_rate},
          {"ess_proxy", r.ess_proxy},
          {"seed", r.seed},
          {"usable", r.usable},
          {"noncompliant_activation", r.noncompliant_activation}};
}

int cmd_simulate(const CommonOpts& opts) {
  const SweepPlan plan = load_plan(opts);
  const std::int64_t n = plan.n_grid.front();
  if (opts.verbosity > 0) std::fprintf(stderr, "simulate: n=%lld\n", static_cast<long long>(n));
  const auto report = run_cell(plan, n, 0);
  json payload = {{"plan", sweep_plan_to_config(plan)},
                  {"lambda", report.lambda},
                  {"schedule_id", to_string(plan.schedule_id)},
                  {"prop_constant", plan.prop_constant},
                  {"bernstein_K", plan.bernstein_K},
                  {"report", report_to_json(report)}};
  write_json(fs::path(opts.out_dir) / "simulate_report.json", payload);
  return report.usable ? 0 : 2;
}

int cmd_sweep(const CommonOpts& opts) {
  const SweepPlan plan = load_plan(opts);
  const auto result = run_sweep(plan, opts.out_dir, opts.jobs, opts.verbosity == 0);
  std::printf("%s\n%s\n", result.csv_path.c_str(), result.json_path.c_str());
  return result.failed ? 2 : 0;
}

int cmd_bound(const CommonOpts& opts) {
  // Empirical validity of the Catoni-style bound on the plan's regression
  // problem: sample the posterior, moment-match a Gaussian q, and compare
  // bound value against held-out risk.
  SweepPlan plan = load_plan(opts);
  if (plan.task != SweepTask::regression) {
    std::fprintf(stderr, "bound: requires a regression plan\n");
    return 1;
  }
  const std::int64_t n = plan.n_grid.front();
  const double delta = 0.05;

  const ArchitectureSchedule schedule(plan.schedule_id, plan.prop_constant);
  const auto arch = schedule_architecture(schedule, n, plan.d, plan.beta, plan.activation);
  const ClampSpec clamp(plan.clamp_C);
  const auto train =
      make_regression_dataset(plan.target, plan.noise, n, plan.d, derive_seed(plan.master_seed, 1));
  const auto test = make_regression_dataset(plan.target, plan.noise, 4 * n, plan.d,
                                            derive_seed(plan.master_seed, 2));

  const double lambda = plan.lambda_for(n);
  GibbsConfig gibbs(lambda, PriorSpec(1.0, plan.bound_B), LossKind::squared);
  SamplerConfig scfg = plan.sampler;
  scfg.master_seed = derive_seed(plan.master_seed, 3);
  const auto sample = sample_gibbs(arch, clamp, gibbs, train, scfg);

  Vector mean = Vector::Zero(arch.parameter_count());
  for (const auto& d : sample.draws) mean += d.values;
  mean /= static_cast<double>(sample.draws.size());
  Vector sd = Vector::Zero(arch.parameter_count());
  for (const auto& d : sample.draws) sd += (d.values - mean).array().square().matrix();
  sd = (sd / static_cast<double>(sample.draws.size())).cwiseSqrt().cwiseMax(1e-3);

  auto risk_fn = [&](const Vector& v) {
    return empirical_risk(arch, clamp, ParameterVector(v), train, LossKind::squared);
  };
  const double bound = catoni_bound_value(mean, sd, PriorSpec(1.0), lambda, n, risk_fn, delta,
                                          256, derive_seed(plan.master_seed, 4));

  double heldout = 0.0;
  for (const auto& d : sample.draws)
    heldout += empirical_risk(arch, clamp, d, test, LossKind::squared);
  heldout /= static_cast<double>(sample.draws.size());

  json payload = {{"n", n},
                  {"lambda", lambda},
                  {"delta", delta},
                  {"bound_value", bound},
                  {"heldout_risk", heldout},
                  {"bound_holds", bound >= heldout},
                  {"plan", sweep_plan_to_config(plan)}};
  write_json(fs::path(opts.out_dir) / "bound_report.json", payload);
  return 0;
}

int cmd_verify_lemmas(const CommonOpts& opts) {
  const std::uint64_t seed = opts.seed_override.value_or(2025);
  bool all_pass = true;
  json checks = json::array();

  // Variational-formula equality on random discrete spaces.
  {
    auto rng = make_engine(derive_seed(seed, 1));
    std::uniform_int_distribution<int> um(2, 50);
    std::uniform_real_distribution<double> uw(0.01, 1.0), uh(-20.0, 20.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const int m = um(rng);
      Vector pi(m), h(m);
      for (int i = 0; i < m; ++i) {
        pi(i) = uw(rng);
        h(i) = uh(rng);
      }
      pi /= pi.sum();
      pi(m - 1) += 1.0 - pi.sum();
      DiscreteSpace space(pi, h);
      worst = std::max(worst, std::abs(dv_lhs(space) - dv_rhs_sup(space, {}).best_value));
    }
    const bool ok = worst <= 1e-10;
    all_pass = all_pass && ok;
    checks.push_back({{"check_name", "variational_formula_equality"},
                      {"pass", ok},
                      {"margins", {worst}}});
  }

  // MGF bound, bounded-difference form: fair coin and centered uniform.
  {
    auto coin = [](std::mt19937_64& rng) {
      return std::uniform_int_distribution<int>(0, 1)(rng) == 0 ? -1.0 : 1.0;
    };
    const auto rep = bernstein_mgf_check(coin, 1.0, 1.0, {0.05, 0.1, 0.2}, 10, 40000,
                                         derive_seed(seed, 2));
    all_pass = all_pass && rep.pass;
    checks.push_back(to_json(rep, "mgf_bound_coin"));

    auto uniform = [](std::mt19937_64& rng) {
      return std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    };
    const auto rep2 = bernstein_mgf_check(uniform, 1.0, 1.0 / 3.0, {0.1, 0.3, 0.6}, 10, 40000,
                                          derive_seed(seed, 3));
    all_pass = all_pass && rep2.pass;
    checks.push_back(to_json(rep2, "mgf_bound_uniform"));

    const auto rep3 = bernstein_massart_check(uniform, 5.0 / 3.0, 1.0, {0.1, 0.5, 0.9}, 5,
                                              40000, derive_seed(seed, 4));
    all_pass = all_pass && rep3.pass;
    checks.push_back(to_json(rep3, "mgf_bound_two_constant"));
  }

  // Closed-form KL vs quadrature.
  {
    auto rng = make_engine(derive_seed(seed, 5));
    std::uniform_real_distribution<double> um(-2.0, 2.0), us(0.3, 2.0);
    auto gauss_pdf = [](double x, double mu, double var) {
      return std::exp(-(x - mu) * (x - mu) / (2.0 * var)) /
             std::sqrt(2.0 * std::numbers::pi * var);
    };
    Vector grid = Vector::LinSpaced(40001, -25.0, 25.0);
    double worst_rel = 0.0;
    for (int i = 0; i < 100; ++i) {
      const double mean = um(rng), sdv = us(rng);
      Vector m(1), s(1);
      m << mean;
      s << sdv;
      const double closed = kl_gaussian_to_prior(m, s, PriorSpec(1.0));
      const double numeric = kl_numeric([&](double x) { return gauss_pdf(x, mean, sdv * sdv); },
                                        [&](double x) { return gauss_pdf(x, 0.0, 1.0); }, grid);
      worst_rel = std::max(worst_rel,
                           std::abs(numeric - closed) / std::max(1.0, std::abs(closed)));
    }
    const bool ok = worst_rel <= 1e-6;
    all_pass = all_pass && ok;
    checks.push_back({{"check_name", "kl_closed_form_vs_quadrature"},
                      {"pass", ok},
                      {"margins", {worst_rel}}});
  }

  write_json(fs::path(opts.out_dir) / "lemma_checks.json",
             {{"pass", all_pass}, {"checks", checks}});
  return all_pass ? 0 : 2;
}

int cmd_classify(const CommonOpts& opts) {
  SweepPlan plan = load_plan(opts);
  if (plan.task == SweepTask::regression) plan.task = SweepTask::cls_misclass;
  const std::int64_t n = plan.n_grid.front();

  const ArchitectureSchedule schedule(plan.schedule_id, plan.prop_constant);
  const auto arch = schedule_architecture(schedule, n, plan.d, plan.beta, plan.activation);
  const ClampSpec clamp(plan.clamp_C);
  const auto data =
      make_classification_dataset(plan.target, n, plan.d, derive_seed(plan.master_seed, 1));

  GibbsConfig gibbs(plan.lambda_for(n), PriorSpec(1.0, plan.bound_B), LossKind::logistic);
  SamplerConfig scfg = plan.sampler;
  scfg.master_seed = derive_seed(plan.master_seed, 2);
  const auto sample = sample_gibbs(arch, clamp, gibbs, data, scfg);
  if (!sample.draws.empty()) {
    const auto excess = misclassification_excess(arch, clamp, sample.draws, plan.target,
                                                 plan.mc_n, derive_seed(plan.master_seed, 3));
    // Predictions on a fresh evaluation set, both aggregation rules.
    const auto fresh = make_classification_dataset(plan.target, 512, plan.d,
                                                   derive_seed(plan.master_seed, 4));
    const Vector mean_sign = classify_batch(arch, clamp, sample.draws, fresh.X,
                                            ClassifierAggregation::posterior_mean_sign);
    const Vector vote = classify_batch(arch, clamp, sample.draws, fresh.X,
                                       ClassifierAggregation::majority_vote);
    fs::create_directories(opts.out_dir);
    const fs::path csv_path = fs::path(opts.out_dir) / "classify_predictions.csv";
    {
      std::ofstream csv(csv_path);
      csv.precision(17);
      for (int j = 0; j < plan.d; ++j) csv << "x" << (j + 1) << ",";
      csv << "y,pred_mean_sign,pred_majority\n";
      for (Eigen::Index i = 0; i < fresh.size(); ++i) {
        for (Eigen::Index j = 0; j < fresh.dim(); ++j) csv << fresh.X(i, j) << ",";
        csv << fresh.Y(i) << "," << mean_sign(i) << "," << vote(i) << "\n";
      }
      std::printf("%s\n", csv_path.string().c_str());
    }
    write_json(fs::path(opts.out_dir) / "classify_report.json",
               {{"n", n},
                {"lambda", plan.lambda_for(n)},
                {"misclassification_excess", to_json(excess.posterior_averaged)},
                {"misclassification_excess_plug_in", to_json(excess.plug_in)},
                {"plan", sweep_plan_to_config(plan)}});
  }
  return 0;
}

int cmd_validate_assumptions(const CommonOpts& opts) {
  const SweepPlan plan = load_plan(opts);
  json payload;

  const auto noise_report = validate_sub_gamma(plan.noise, 6, 1000000,
                                               derive_seed(plan.master_seed, 11));
  json moments = json::array();
  for (const auto& m : noise_report.moments)
    moments.push_back({{"k", m.k}, {"estimate", m.estimate}, {"bound", m.bound},
                       {"se", m.se}, {"pass", m.pass}});
  payload["sub_gamma"] = {{"noise", to_string(plan.noise.id)},
                          {"sigma", plan.noise.declared_sigma},
                          {"varsigma", plan.noise.declared_varsigma},
                          {"pass", noise_report.pass},
                          {"moments", moments}};

  const auto margin_report = check_margin_condition(plan.target, plan.d, 8.0,
                                                    {0.01, 0.05, 0.1, 0.2}, 200000,
                                                    derive_seed(plan.master_seed, 12));
  json margins = json::array();
  for (const auto& c : margin_report.checks)
    margins.push_back({{"h", c.h}, {"probability", c.probability}, {"bound", c.bound},
                       {"se", c.se}, {"pass", c.pass}});
  payload["margin"] = {{"target", to_string(plan.target.id)},
                       {"C_mg", 8.0},
                       {"pass", margin_report.pass},
                       {"checks", margins}};

  payload["pass"] = noise_report.pass && margin_report.pass;
  write_json(fs::path(opts.out_dir) / "assumption_checks.json", payload);
  return payload["pass"].get<bool>() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gibbs-posterior deep network estimator: experiments and numeric checks"};
  app.require_subcommand(1);

  CommonOpts opts;
  auto* simulate = app.add_subcommand("simulate", "run a single experiment cell");
  add_common(simulate, opts);
  auto* sweep = app.add_subcommand("sweep", "run an n-sweep with rate fit");
  add_common(sweep, opts);
  auto* bound = app.add_subcommand("bound", "evaluate the empirical PAC-Bayes bound");
  add_common(bound, opts);
  auto* verify = app.add_subcommand("verify-lemmas", "numeric lemma-level checks");
  add_common(verify, opts, /*config_required=*/false);
  auto* classify = app.add_subcommand("classify", "classification cell with predictions");
  add_common(classify, opts);
  auto* validate = app.add_subcommand("validate-assumptions",
                                      "noise moment and margin condition validators");
  add_common(validate, opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(opts);
    if (sweep->parsed()) return cmd_sweep(opts);
    if (bound->parsed()) return cmd_bound(opts);
    if (verify->parsed()) return cmd_verify_lemmas(opts);
    if (classify->parsed()) return cmd_classify(opts);
    if (validate->parsed()) return cmd_validate_assumptions(opts);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return 2;
  }
  return 1;
}
