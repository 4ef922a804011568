#pragma once

#include <fstream>
#include <set>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "gibbsnet/harness.hpp"

namespace gibbsnet {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

/// Unknown keys are hard errors: silent typos must not change experiments.
inline void reject_unknown_keys(const nlohmann::json& obj, const std::set<std::string>& allowed,
                                const std::string& context) {
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key))
      throw ConfigError("unknown key \"" + key + "\" in " + context);
}

template <typename T>
T get_or(const nlohmann::json& obj, const std::string& key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("bad type for key \"" + key + "\"");
  }
}

}  // namespace detail

inline SweepPlan parse_sweep_plan(const nlohmann::json& cfg) {
  detail::reject_unknown_keys(
      cfg,
      {"task", "schedule", "prop_constant", "n_grid", "replicates", "target", "noise", "beta",
       "d", "lambda", "bernstein_K", "B", "C", "activation", "sampler", "mc_n", "master_seed"},
      "top level");

  SweepPlan plan;
  plan.task = sweep_task_from_string(detail::get_or<std::string>(cfg, "task", "regression"));
  plan.schedule_id = schedule_from_string(detail::get_or<std::string>(
      cfg, "schedule",
      plan.task == SweepTask::regression
          ? "reg_tienmt"
          : (plan.task == SweepTask::cls_entropy ? "cls_entropy" : "cls_misclass")));
  plan.prop_constant = detail::get_or<double>(cfg, "prop_constant", 1.0);
  if (cfg.contains("n_grid")) {
    plan.n_grid.clear();
    for (const auto& v : cfg.at("n_grid")) plan.n_grid.push_back(v.get<std::int64_t>());
  } else {
    plan.n_grid = {128, 256, 512, 1024};
  }
  plan.replicates = detail::get_or<int>(cfg, "replicates", 10);
  plan.beta = detail::get_or<double>(cfg, "beta", 1.0);
  plan.d = detail::get_or<int>(cfg, "d", 1);
  plan.bernstein_K = detail::get_or<double>(cfg, "bernstein_K", 4.0);
  plan.bound_B = detail::get_or<double>(cfg, "B", 2.0);
  plan.clamp_C = detail::get_or<double>(cfg, "C", 1.0);
  plan.activation = activation_from_string(detail::get_or<std::string>(cfg, "activation", "tanh"));
  plan.mc_n = detail::get_or<std::int64_t>(cfg, "mc_n", 20000);
  plan.master_seed = detail::get_or<std::uint64_t>(cfg, "master_seed", 1);

  if (cfg.contains("target")) {
    const auto& t = cfg.at("target");
    detail::reject_unknown_keys(t, {"id", "beta", "amplitude", "frequency"}, "target");
    plan.target.id = target_from_string(detail::get_or<std::string>(t, "id", "sine_mix"));
    plan.target.nominal_beta = detail::get_or<double>(t, "beta", plan.beta);
    plan.target.amplitude = detail::get_or<double>(t, "amplitude", 1.0);
    plan.target.frequency = detail::get_or<double>(t, "frequency", 1.0);
    plan.target.sup_bound =
        std::abs(plan.target.amplitude) * (plan.target.id == TargetId::sine_mix ? 1.0 : 1.0);
  }

  if (cfg.contains("noise")) {
    const auto& nz = cfg.at("noise");
    detail::reject_unknown_keys(nz, {"id", "scale", "shape"}, "noise");
    const auto id = noise_from_string(detail::get_or<std::string>(nz, "id", "gaussian"));
    const double scale = detail::get_or<double>(nz, "scale", 1.0);
    switch (id) {
      case NoiseId::gaussian: plan.noise = NoiseModel::gaussian_model(scale); break;
      case NoiseId::bounded_uniform: plan.noise = NoiseModel::bounded_uniform_model(scale); break;
      case NoiseId::scaled_centered_gamma:
        plan.noise = NoiseModel::gamma_model(detail::get_or<double>(nz, "shape", 2.0), scale);
        break;
    }
  } else {
    plan.noise = NoiseModel::gaussian_model(1.0);
  }

  if (cfg.contains("lambda")) {
    const auto& lam = cfg.at("lambda");
    detail::reject_unknown_keys(lam, {"policy", "value"}, "lambda");
    const auto policy = detail::get_or<std::string>(lam, "policy", "theorem_formula");
    if (policy == "theorem_formula") {
      plan.lambda_policy = LambdaPolicy::theorem_formula;
    } else if (policy == "manual") {
      plan.lambda_policy = LambdaPolicy::manual;
      if (!lam.contains("value")) throw ConfigError("lambda policy \"manual\" requires \"value\"");
      plan.lambda_manual = lam.at("value").get<double>();
    } else {
      throw ConfigError("unknown lambda policy \"" + policy + "\"");
    }
  }

  if (cfg.contains("sampler")) {
    const auto& s = cfg.at("sampler");
    detail::reject_unknown_keys(
        s, {"kind", "n_chains", "burn_in", "n_samples", "thinning", "initial_step",
            "target_accept"},
        "sampler");
    plan.sampler.kind = sampler_from_string(detail::get_or<std::string>(s, "kind", "rwmh"));
    plan.sampler.n_chains = detail::get_or<int>(s, "n_chains", plan.sampler.n_chains);
    plan.sampler.burn_in = detail::get_or<int>(s, "burn_in", plan.sampler.burn_in);
    plan.sampler.n_samples = detail::get_or<int>(s, "n_samples", plan.sampler.n_samples);
    plan.sampler.thinning = detail::get_or<int>(s, "thinning", plan.sampler.thinning);
    plan.sampler.initial_step =
        detail::get_or<double>(s, "initial_step", plan.sampler.initial_step);
    plan.sampler.adapt_target_accept =
        detail::get_or<double>(s, "target_accept", plan.sampler.adapt_target_accept);
    plan.sampler.validate();
  }

  plan.validate(false);
  return plan;
}

/// Emits the fully-defaulted config; parsing the echo reproduces the plan.
inline nlohmann::json sweep_plan_to_config(const SweepPlan& plan) {
  nlohmann::json cfg;
  cfg["task"] = to_string(plan.task);
  cfg["schedule"] = to_string(plan.schedule_id);
  cfg["prop_constant"] = plan.prop_constant;
  cfg["n_grid"] = plan.n_grid;
  cfg["replicates"] = plan.replicates;
  cfg["beta"] = plan.beta;
  cfg["d"] = plan.d;
  cfg["bernstein_K"] = plan.bernstein_K;
  cfg["B"] = plan.bound_B;
  cfg["C"] = plan.clamp_C;
  cfg["activation"] = to_string(plan.activation);
  cfg["mc_n"] = plan.mc_n;
  cfg["master_seed"] = plan.master_seed;
  cfg["target"] = {{"id", to_string(plan.target.id)},
                   {"beta", plan.target.nominal_beta},
                   {"amplitude", plan.target.amplitude},
                   {"frequency", plan.target.frequency}};
  cfg["noise"] = {{"id", to_string(plan.noise.id)}, {"scale", plan.noise.scale}};
  if (plan.noise.id == NoiseId::scaled_centered_gamma) cfg["noise"]["shape"] = plan.noise.shape;
  if (plan.lambda_policy == LambdaPolicy::manual)
    cfg["lambda"] = {{"policy", "manual"}, {"value", plan.lambda_manual}};
  else
    cfg["lambda"] = {{"policy", "theorem_formula"}};
  cfg["sampler"] = {{"kind", to_string(plan.sampler.kind)},
                    {"n_chains", plan.sampler.n_chains},
                    {"burn_in", plan.sampler.burn_in},
                    {"n_samples", plan.sampler.n_samples},
                    {"thinning", plan.sampler.thinning},
                    {"initial_step", plan.sampler.initial_step},
                    {"target_accept", plan.sampler.adapt_target_accept}};
  return cfg;
}

inline SweepPlan parse_sweep_plan_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json cfg;
  try {
    in >> cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return parse_sweep_plan(cfg);
}

}  // namespace gibbsnet
