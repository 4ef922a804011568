#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "gibbsnet/network.hpp"
#include "gibbsnet/prior_posterior.hpp"
#include "gibbsnet/synthesis.hpp"

namespace gibbsnet {

struct RiskEstimate {
  double value = 0.0;
  double mc_se = 0.0;
  std::int64_t n_eval = 0;
};

inline double loss_squared(double y, double u) {
  const double r = y - u;
  return r * r;
}

/// log(1 + exp(-y u)) evaluated in the branch that never overflows.
inline double loss_logistic(double y, double u) {
  if (y != 1.0 && y != -1.0) throw std::invalid_argument("logistic label must be +-1");
  const double m = y * u;
  return m >= 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

inline double loss_apply(LossKind loss, double y, double u) {
  return loss == LossKind::squared ? loss_squared(y, u) : loss_logistic(y, u);
}

/// Mean loss over the dataset, accumulated in index order.
inline double empirical_risk(const NetworkArchitecture& arch, const ClampSpec& clamp,
                             const ParameterVector& theta, const Dataset& data, LossKind loss) {
  if (data.size() == 0) throw std::invalid_argument("empty dataset");
  if ((loss == LossKind::squared) != (data.task == TaskKind::regression))
    throw std::invalid_argument("loss does not match dataset task");
  const Vector pred = forward_batch(arch, clamp, theta, data.X);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < data.size(); ++i) acc += loss_apply(loss, data.Y(i), pred(i));
  return acc / static_cast<double>(data.size());
}

/// Gradient of r_n(theta); composes the loss derivative with the network's
/// reverse-mode output gradient. Needed by the Langevin proposal.
inline Vector empirical_risk_gradient(const NetworkArchitecture& arch, const ClampSpec& clamp,
                                      const ParameterVector& theta, const Dataset& data,
                                      LossKind loss) {
  Vector grad = Vector::Zero(arch.parameter_count());
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const Vector x = data.X.row(i).transpose();
    ForwardWorkspace ws;
    const double u = forward(arch, clamp, theta, x, &ws);
    double dl;
    if (loss == LossKind::squared) {
      dl = 2.0 * (u - data.Y(i));
    } else {
      const double y = data.Y(i);
      dl = -y * sigmoid(-y * u);
    }
    if (dl != 0.0) grad += dl * grad_output_wrt_theta(arch, clamp, theta, x);
  }
  return grad / static_cast<double>(data.size());
}

inline Vector posterior_predict_mean(const std::vector<ParameterVector>& draws,
                                     const NetworkArchitecture& arch, const ClampSpec& clamp,
                                     const Eigen::Ref<const Matrix>& X) {
  if (draws.empty()) throw std::invalid_argument("need at least one posterior draw");
  Vector acc = Vector::Zero(X.rows());
  for (const auto& theta : draws) acc += forward_batch(arch, clamp, theta, X);
  return acc / static_cast<double>(draws.size());
}

struct ExcessRiskPair {
  RiskEstimate posterior_averaged;  // E_{theta ~ rho}[R(theta)] - R(f0)
  RiskEstimate plug_in;             // risk of the posterior-mean predictor - R(f0)
};

/// Fresh-sample Monte Carlo estimate of the regression excess risk. For
/// squared loss the noise term cancels, so the excess is the mean squared
/// distance of predictions to f0 under uniform X.
inline ExcessRiskPair population_excess_risk_regression(
    const NetworkArchitecture& arch, const ClampSpec& clamp,
    const std::vector<ParameterVector>& draws, const TargetFunction& f0, std::int64_t mc_n,
    std::uint64_t seed) {
  if (mc_n < 1000) throw std::invalid_argument("mc_n must be >= 1000");
  if (draws.empty()) throw std::invalid_argument("need at least one posterior draw");
  auto rng = make_engine(seed);
  const Matrix X = sample_uniform_covariates(mc_n, arch.input_dim_d, rng);
  const Vector truth = f0.evaluate_batch(X);

  Vector avg_sq = Vector::Zero(mc_n);  // per-point posterior-averaged squared error
  Vector mean_pred = Vector::Zero(mc_n);
  for (const auto& theta : draws) {
    const Vector pred = forward_batch(arch, clamp, theta, X);
    avg_sq += (pred - truth).array().square().matrix();
    mean_pred += pred;
  }
  avg_sq /= static_cast<double>(draws.size());
  mean_pred /= static_cast<double>(draws.size());
  const Vector plug_sq = (mean_pred - truth).array().square().matrix();

  auto summarize = [mc_n](const Vector& per_point) {
    const double mean = per_point.mean();
    const double var = (per_point.array() - mean).square().sum() / static_cast<double>(mc_n - 1);
    return RiskEstimate{mean, std::sqrt(var / static_cast<double>(mc_n)), mc_n};
  };
  return {summarize(avg_sq), summarize(plug_sq)};
}

/// Logistic excess risk with common random numbers: the same fresh (X, Y)
/// stream scores both the posterior draws and f0, so the difference has far
/// lower variance than two independent estimates.
inline ExcessRiskPair population_excess_risk_logistic(
    const NetworkArchitecture& arch, const ClampSpec& clamp,
    const std::vector<ParameterVector>& draws, const TargetFunction& f0, std::int64_t mc_n,
    std::uint64_t seed) {
  if (mc_n < 1000) throw std::invalid_argument("mc_n must be >= 1000");
  if (draws.empty()) throw std::invalid_argument("need at least one posterior draw");
  const Dataset fresh = make_classification_dataset(f0, mc_n, arch.input_dim_d, seed);

  Vector base(mc_n);
  for (Eigen::Index i = 0; i < mc_n; ++i)
    base(i) = loss_logistic(fresh.Y(i), f0(fresh.X.row(i).transpose()));

  Vector avg_diff = Vector::Zero(mc_n);
  Vector mean_pred = Vector::Zero(mc_n);
  for (const auto& theta : draws) {
    const Vector pred = forward_batch(arch, clamp, theta, fresh.X);
    for (Eigen::Index i = 0; i < mc_n; ++i)
      avg_diff(i) += loss_logistic(fresh.Y(i), pred(i)) - base(i);
    mean_pred += pred;
  }
  avg_diff /= static_cast<double>(draws.size());
  mean_pred /= static_cast<double>(draws.size());
  Vector plug_diff(mc_n);
  for (Eigen::Index i = 0; i < mc_n; ++i)
    plug_diff(i) = loss_logistic(fresh.Y(i), mean_pred(i)) - base(i);

  auto summarize = [mc_n](const Vector& per_point) {
    const double mean = per_point.mean();
    const double var = (per_point.array() - mean).square().sum() / static_cast<double>(mc_n - 1);
    return RiskEstimate{mean, std::sqrt(var / static_cast<double>(mc_n)), mc_n};
  };
  return {summarize(avg_diff), summarize(plug_diff)};
}

/// Sign classifier; the tie at exactly zero goes to +1.
inline double classify_sign(const NetworkArchitecture& arch, const ClampSpec& clamp,
                            const ParameterVector& theta, const Eigen::Ref<const Vector>& x) {
  return forward(arch, clamp, theta, x) >= 0.0 ? 1.0 : -1.0;
}

enum class ClassifierAggregation { posterior_mean_sign, majority_vote };

inline Vector classify_batch(const NetworkArchitecture& arch, const ClampSpec& clamp,
                             const std::vector<ParameterVector>& draws,
                             const Eigen::Ref<const Matrix>& X,
                             ClassifierAggregation agg = ClassifierAggregation::posterior_mean_sign) {
  if (draws.empty()) throw std::invalid_argument("need at least one posterior draw");
  Vector score = Vector::Zero(X.rows());
  for (const auto& theta : draws) {
    const Vector pred = forward_batch(arch, clamp, theta, X);
    if (agg == ClassifierAggregation::posterior_mean_sign)
      score += pred;
    else
      score += pred.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
  }
  return score.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
}

/// Posterior-averaged misclassification excess: mean over draws of
/// P(Y != sign f_theta(X)) minus the Bayes error of sign f0, common stream.
/// plug_in is the same quantity for the posterior-mean-sign classifier.
inline ExcessRiskPair misclassification_excess(const NetworkArchitecture& arch,
                                               const ClampSpec& clamp,
                                               const std::vector<ParameterVector>& draws,
                                               const TargetFunction& f0, std::int64_t mc_n,
                                               std::uint64_t seed) {
  if (mc_n < 1000) throw std::invalid_argument("mc_n must be >= 1000");
  if (draws.empty()) throw std::invalid_argument("need at least one posterior draw");
  const Dataset fresh = make_classification_dataset(f0, mc_n, arch.input_dim_d, seed);

  Vector bayes_err(mc_n);
  for (Eigen::Index i = 0; i < mc_n; ++i) {
    const double s = f0(fresh.X.row(i).transpose()) >= 0.0 ? 1.0 : -1.0;
    bayes_err(i) = fresh.Y(i) != s ? 1.0 : 0.0;
  }

  Vector avg_diff = Vector::Zero(mc_n);
  Vector mean_pred = Vector::Zero(mc_n);
  for (const auto& theta : draws) {
    const Vector pred = forward_batch(arch, clamp, theta, fresh.X);
    for (Eigen::Index i = 0; i < mc_n; ++i) {
      const double s = pred(i) >= 0.0 ? 1.0 : -1.0;
      avg_diff(i) += (fresh.Y(i) != s ? 1.0 : 0.0) - bayes_err(i);
    }
    mean_pred += pred;
  }
  avg_diff /= static_cast<double>(draws.size());
  Vector plug_diff(mc_n);
  for (Eigen::Index i = 0; i < mc_n; ++i) {
    const double s = mean_pred(i) >= 0.0 ? 1.0 : -1.0;
    plug_diff(i) = (fresh.Y(i) != s ? 1.0 : 0.0) - bayes_err(i);
  }

  auto summarize = [mc_n](const Vector& per_point) {
    const double mean = per_point.mean();
    const double var = (per_point.array() - mean).square().sum() / static_cast<double>(mc_n - 1);
    return RiskEstimate{mean, std::sqrt(var / static_cast<double>(mc_n)), mc_n};
  };
  return {summarize(avg_diff), summarize(plug_diff)};
}

inline nlohmann::json to_json(const RiskEstimate& r) {
  return {{"value", r.value}, {"se", r.mc_se}, {"n_eval", r.n_eval}};
}

}  // namespace gibbsnet
