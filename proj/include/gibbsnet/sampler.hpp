#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gibbsnet/network.hpp"
#include "gibbsnet/prior_posterior.hpp"
#include "gibbsnet/risk.hpp"
#include "gibbsnet/rng.hpp"

namespace gibbsnet {

enum class SamplerKind { rwmh, mala };

inline std::string to_string(SamplerKind k) { return k == SamplerKind::rwmh ? "rwmh" : "mala"; }

inline SamplerKind sampler_from_string(const std::string& s) {
  if (s == "rwmh") return SamplerKind::rwmh;
  if (s == "mala") return SamplerKind::mala;
  throw std::invalid_argument("unknown sampler kind: " + s);
}

struct SamplerConfig {
  SamplerKind kind = SamplerKind::rwmh;
  int n_chains = 2;
  int burn_in = 1000;
  int n_samples = 1000;
  int thinning = 1;
  double initial_step = 0.1;
  double adapt_target_accept = 0.3;
  std::uint64_t master_seed = 0;

  void validate() const {
    if (n_chains < 1) throw std::invalid_argument("n_chains must be >= 1");
    if (burn_in < 0) throw std::invalid_argument("burn_in must be nonnegative");
    if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
    if (thinning < 1) throw std::invalid_argument("thinning must be >= 1");
    if (initial_step <= 0.0) throw std::invalid_argument("initial_step must be positive");
    if (adapt_target_accept <= 0.0 || adapt_target_accept >= 1.0)
      throw std::invalid_argument("adapt_target_accept must lie in (0,1)");
  }
};

struct ChainDiagnostics {
  double acceptance_rate = 0.0;  // post burn-in
  double step_size_final = 0.0;
  double mean_log_posterior = 0.0;
  double ess_proxy = 0.0;  // lag-1 autocorrelation based, from the log-density trace
  bool failure = false;    // stuck chain (see SamplerConfig docs)
};

/// Target abstraction for the MH kernels. `gradient` is required by MALA
/// only. `sample_initial` draws a starting point (we use the prior). This is
/// also the test hook: any log-density can be sampled, not just the network
/// posterior.
struct LogDensityTarget {
  Eigen::Index dim = 0;
  std::function<double(const Vector&)> log_density;
  std::function<Vector(const Vector&)> gradient;
  std::function<Vector(std::mt19937_64&)> sample_initial;
};

struct SampleResult {
  std::vector<Vector> draws;  // all chains concatenated, chain-major
  std::vector<ChainDiagnostics> diagnostics;
};

namespace detail {

inline double mala_log_q(const LogDensityTarget& target, const Vector& from, const Vector& to,
                         double step) {
  const Vector mean = from + 0.5 * step * step * target.gradient(from);
  return -(to - mean).squaredNorm() / (2.0 * step * step);
}

inline SampleResult run_chains(const LogDensityTarget& target, const SamplerConfig& cfg) {
  cfg.validate();
  if (!target.log_density || !target.sample_initial)
    throw std::invalid_argument("target must provide log_density and sample_initial");
  if (cfg.kind == SamplerKind::mala && !target.gradient)
    throw std::invalid_argument("mala requires a gradient");

  constexpr double neg_inf = -std::numeric_limits<double>::infinity();
  SampleResult result;
  result.draws.reserve(static_cast<std::size_t>(cfg.n_chains) * cfg.n_samples);

  for (int chain = 0; chain < cfg.n_chains; ++chain) {
    auto rng = make_engine(derive_seed(cfg.master_seed, static_cast<std::uint64_t>(chain)));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    Vector theta = target.sample_initial(rng);
    double logp = target.log_density(theta);
    double step = cfg.initial_step;

    const long total = static_cast<long>(cfg.burn_in) +
                       static_cast<long>(cfg.n_samples) * cfg.thinning;
    const long stuck_limit = cfg.burn_in > 0 ? 10L * cfg.burn_in : 10L * total;

    long kept = 0;
    long window_accepts = 0, window_steps = 0;
    long post_accepts = 0, post_steps = 0;
    long consecutive_rejects = 0;
    bool failure = false;
    std::vector<double> logp_trace;
    logp_trace.reserve(static_cast<std::size_t>(cfg.n_samples));
    double sum_logp = 0.0;

    for (long it = 0; it < total; ++it) {
      const bool in_burn = it < cfg.burn_in;

      Vector prop(theta.size());
      double log_accept;
      if (cfg.kind == SamplerKind::rwmh) {
        for (Eigen::Index i = 0; i < theta.size(); ++i) prop(i) = theta(i) + step * gauss(rng);
        const double logp_prop = target.log_density(prop);
        log_accept = logp_prop - logp;
        if (logp_prop == neg_inf) log_accept = neg_inf;
        if (unif(rng) < std::exp(std::min(0.0, log_accept))) {
          theta = std::move(prop);
          logp = logp_prop;
          ++window_accepts;
          if (!in_burn) ++post_accepts;
          consecutive_rejects = 0;
        } else {
          ++consecutive_rejects;
        }
      } else {
        const Vector drift = theta + 0.5 * step * step * target.gradient(theta);
        for (Eigen::Index i = 0; i < theta.size(); ++i) prop(i) = drift(i) + step * gauss(rng);
        const double logp_prop = target.log_density(prop);
        if (logp_prop == neg_inf) {
          ++consecutive_rejects;
        } else {
          const double log_q_fwd = -(prop - drift).squaredNorm() / (2.0 * step * step);
          const double log_q_rev = mala_log_q(target, prop, theta, step);
          log_accept = logp_prop + log_q_rev - logp - log_q_fwd;
          if (unif(rng) < std::exp(std::min(0.0, log_accept))) {
            theta = std::move(prop);
            logp = logp_prop;
            ++window_accepts;
            if (!in_burn) ++post_accepts;
            consecutive_rejects = 0;
          } else {
            ++consecutive_rejects;
          }
        }
      }
      ++window_steps;
      if (!in_burn) ++post_steps;
      if (consecutive_rejects >= stuck_limit) failure = true;

      // Step-size adaptation runs during burn-in only; the post burn-in
      // kernel is a fixed, valid MH kernel.
      if (in_burn && window_steps == 50) {
        const double rate = static_cast<double>(window_accepts) / 50.0;
        step *= rate > cfg.adapt_target_accept ? 1.1 : 1.0 / 1.1;
        window_accepts = 0;
        window_steps = 0;
      }

      if (!in_burn && (it - cfg.burn_in + 1) % cfg.thinning == 0) {
        result.draws.push_back(theta);
        logp_trace.push_back(logp);
        sum_logp += logp;
        ++kept;
      }
    }

    ChainDiagnostics diag;
    diag.acceptance_rate =
        post_steps > 0 ? static_cast<double>(post_accepts) / static_cast<double>(post_steps) : 0.0;
    diag.step_size_final = step;
    diag.mean_log_posterior = kept > 0 ? sum_logp / static_cast<double>(kept) : 0.0;
    diag.failure = failure;

    if (kept > 1) {
      const double mean = diag.mean_log_posterior;
      double var = 0.0, cov = 0.0;
      for (long i = 0; i < kept; ++i) var += (logp_trace[i] - mean) * (logp_trace[i] - mean);
      for (long i = 0; i + 1 < kept; ++i)
        cov += (logp_trace[i] - mean) * (logp_trace[i + 1] - mean);
      const double rho = var > 0.0 ? std::clamp(cov / var, 0.0, 0.999) : 0.999;
      diag.ess_proxy = static_cast<double>(kept) * (1.0 - rho) / (1.0 + rho);
    } else {
      diag.ess_proxy = static_cast<double>(kept);
    }
    result.diagnostics.push_back(diag);
  }
  return result;
}

}  // namespace detail

/// Samples an arbitrary log-density (test hook / toy targets).
inline SampleResult sample_target(const LogDensityTarget& target, const SamplerConfig& cfg) {
  return detail::run_chains(target, cfg);
}

/// Draws an initial point from the (optionally truncated) Gaussian prior by
/// per-coordinate rejection.
inline Vector sample_prior(const PriorSpec& prior, Eigen::Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, std::sqrt(prior.variance));
  Vector theta(dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    double v = gauss(rng);
    if (prior.truncation)
      while (std::abs(v) > *prior.truncation) v = gauss(rng);
    theta(i) = v;
  }
  return theta;
}

struct GibbsSampleResult {
  std::vector<ParameterVector> draws;
  std::vector<ChainDiagnostics> diagnostics;
};

/// MCMC realization of the Gibbs posterior over network coefficients:
/// unnormalized log-density -lambda r_n(theta) + log pi(theta).
inline GibbsSampleResult sample_gibbs(const NetworkArchitecture& arch, const ClampSpec& clamp,
                                      const GibbsConfig& cfg, const Dataset& data,
                                      const SamplerConfig& scfg) {
  if (data.size() == 0) throw std::invalid_argument("empty dataset");
  const double bound = cfg.prior.truncation ? *cfg.prior.truncation
                                            : std::numeric_limits<double>::infinity();

  LogDensityTarget target;
  target.dim = arch.parameter_count();
  target.log_density = [&](const Vector& v) {
    if (cfg.prior.truncation && v.cwiseAbs().maxCoeff() > *cfg.prior.truncation)
      return -std::numeric_limits<double>::infinity();
    const ParameterVector theta(v, bound);
    const double risk = empirical_risk(arch, clamp, theta, data, cfg.loss);
    return log_gibbs_unnormalized(cfg, risk, v);
  };
  target.gradient = [&](const Vector& v) {
    const ParameterVector theta(v, bound);
    Vector g = -cfg.lambda * empirical_risk_gradient(arch, clamp, theta, data, cfg.loss);
    g -= v / cfg.prior.variance;
    return g;
  };
  target.sample_initial = [&](std::mt19937_64& rng) {
    return sample_prior(cfg.prior, arch.parameter_count(), rng);
  };

  SampleResult raw = sample_target(target, scfg);
  GibbsSampleResult out;
  out.draws.reserve(raw.draws.size());
  for (auto& v : raw.draws) out.draws.emplace_back(std::move(v), bound);
  out.diagnostics = std::move(raw.diagnostics);
  return out;
}

}  // namespace gibbsnet
