#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

#include "gibbsnet/network.hpp"

namespace gibbsnet {

/// Independent N(0, variance) prior per coefficient, optionally truncated to
/// [-B, B] coordinatewise.
struct PriorSpec {
  double variance = 1.0;
  std::optional<double> truncation;  // coefficient bound B, >= 1 when set

  PriorSpec() = default;
  explicit PriorSpec(double var, std::optional<double> trunc = std::nullopt)
      : variance(var), truncation(trunc) {
    if (var <= 0.0) throw std::invalid_argument("prior variance must be positive");
    if (trunc && *trunc < 1.0) throw std::invalid_argument("truncation bound must be >= 1");
  }
};

enum class LossKind { squared, logistic };

struct GibbsConfig {
  double lambda;
  PriorSpec prior;
  LossKind loss = LossKind::squared;

  GibbsConfig(double lam, PriorSpec p, LossKind l = LossKind::squared)
      : lambda(lam), prior(p), loss(l) {
    if (lam < 0.0) throw std::invalid_argument("lambda must be nonnegative");
  }
};

/// Log prior density up to the truncation constant: the truncated variant
/// omits the theta-independent renormalization term, which cancels in every
/// Metropolis-Hastings ratio the sampler forms.
inline double log_prior_density(const PriorSpec& prior, const Eigen::Ref<const Vector>& theta) {
  if (prior.truncation && theta.size() > 0 &&
      theta.cwiseAbs().maxCoeff() > *prior.truncation)
    return -std::numeric_limits<double>::infinity();
  const double v = prior.variance;
  const double n = static_cast<double>(theta.size());
  return -0.5 * theta.squaredNorm() / v - 0.5 * n * std::log(2.0 * std::numbers::pi * v);
}

inline double log_prior_density(const PriorSpec& prior, const ParameterVector& theta) {
  return log_prior_density(prior, theta.values);
}

/// Unnormalized Gibbs log-density: -lambda * r_n(theta) + log pi(theta).
inline double log_gibbs_unnormalized(const GibbsConfig& cfg, double empirical_risk,
                                     const Eigen::Ref<const Vector>& theta) {
  if (!std::isfinite(empirical_risk)) throw std::invalid_argument("empirical risk must be finite");
  const double lp = log_prior_density(cfg.prior, theta);
  if (lp == -std::numeric_limits<double>::infinity()) return lp;
  return -cfg.lambda * empirical_risk + lp;
}

/// KL( N(mean, diag(sd^2)) || prior ) in closed form; untruncated prior only.
inline double kl_gaussian_to_prior(const Eigen::Ref<const Vector>& mean,
                                   const Eigen::Ref<const Vector>& sd, const PriorSpec& prior) {
  if (prior.truncation)
    throw std::invalid_argument("closed-form KL requires an untruncated prior; use kl_numeric");
  if (mean.size() != sd.size()) throw std::invalid_argument("mean/sd size mismatch");
  if (sd.size() > 0 && sd.minCoeff() <= 0.0) throw std::invalid_argument("sd must be positive");
  const double v = prior.variance;
  double kl = 0.0;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    const double s2 = sd(i) * sd(i);
    kl += 0.5 * ((mean(i) * mean(i) + s2) / v - 1.0 + std::log(v / s2));
  }
  return kl;
}

/// lambda = n / C*_{sigma,varsigma} with C* = 16 [C^2 + sigma^2 + C (varsigma v 2C)].
inline double lambda_regression(std::int64_t n, double C, double sigma, double varsigma) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  if (C < 1.0) throw std::invalid_argument("C must be >= 1");
  if (sigma <= 0.0 || varsigma <= 0.0) throw std::invalid_argument("sigma, varsigma must be positive");
  const double cstar = 16.0 * (C * C + sigma * sigma + C * std::max(varsigma, 2.0 * C));
  return static_cast<double>(n) / cstar;
}

/// lambda = n / max(2K, C).
inline double lambda_classification(std::int64_t n, double K, double C) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  if (K <= 0.0) throw std::invalid_argument("K must be positive");
  if (C < 1.0) throw std::invalid_argument("C must be >= 1");
  return static_cast<double>(n) / std::max(2.0 * K, C);
}

enum class ScheduleId { reg_langer, reg_tienmt, cls_entropy, cls_misclass };

inline std::string to_string(ScheduleId id) {
  switch (id) {
    case ScheduleId::reg_langer: return "reg_langer";
    case ScheduleId::reg_tienmt: return "reg_tienmt";
    case ScheduleId::cls_entropy: return "cls_entropy";
    case ScheduleId::cls_misclass: return "cls_misclass";
  }
  return "unknown";
}

inline ScheduleId schedule_from_string(const std::string& s) {
  if (s == "reg_langer") return ScheduleId::reg_langer;
  if (s == "reg_tienmt") return ScheduleId::reg_tienmt;
  if (s == "cls_entropy") return ScheduleId::cls_entropy;
  if (s == "cls_misclass") return ScheduleId::cls_misclass;
  throw std::invalid_argument("unknown schedule: " + s);
}

struct ArchitectureSchedule {
  ScheduleId schedule_id;
  double proportionality_constant = 1.0;

  explicit ArchitectureSchedule(ScheduleId id, double c = 1.0)
      : schedule_id(id), proportionality_constant(c) {
    if (c <= 0.0) throw std::invalid_argument("proportionality constant must be positive");
  }
};

/// Depth/width growth rules. Natural logs, ceil rounding, then the standing
/// floors L >= 3 and D >= d.
inline NetworkArchitecture schedule_architecture(const ArchitectureSchedule& schedule,
                                                 std::int64_t n, int d, double beta,
                                                 Activation act = {ActivationKind::relu}) {
  if (n < 3) throw std::invalid_argument("n must be >= 3");
  if (beta <= 0.0) throw std::invalid_argument("beta must be positive");
  if (d < 1) throw std::invalid_argument("d must be >= 1");

  const double c = schedule.proportionality_constant;
  const double nn = static_cast<double>(n);
  const double n_over_logn = nn / std::log(nn);
  double expr_L = 0.0, expr_D = 0.0;
  switch (schedule.schedule_id) {
    case ScheduleId::reg_langer:
      expr_L = std::log(nn);
      expr_D = std::pow(nn, d / (2.0 * (2.0 * beta + d)));
      break;
    case ScheduleId::reg_tienmt:
      expr_L = expr_D = std::pow(n_over_logn, d / (4.0 * (2.0 * beta + d)));
      break;
    case ScheduleId::cls_entropy:
      expr_L = expr_D = std::pow(n_over_logn, d / (4.0 * (beta + d)));
      break;
    case ScheduleId::cls_misclass:
      expr_L = expr_D = std::pow(n_over_logn, (beta + d) / (4.0 * (2.0 * beta + d)));
      break;
  }
  const int L = std::max(3, static_cast<int>(std::ceil(c * expr_L)));
  const int D = std::max(d, static_cast<int>(std::ceil(c * expr_D)));
  return NetworkArchitecture(L, D, d, act);
}

}  // namespace gibbsnet
