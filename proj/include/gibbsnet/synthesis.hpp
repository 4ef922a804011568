#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gibbsnet/network.hpp"
#include "gibbsnet/rng.hpp"

namespace gibbsnet {

enum class TargetId { sine_mix, poly_smooth, step_besov, tensor_product };

inline std::string to_string(TargetId id) {
  switch (id) {
    case TargetId::sine_mix: return "sine_mix";
    case TargetId::poly_smooth: return "poly_smooth";
    case TargetId::step_besov: return "step_besov";
    case TargetId::tensor_product: return "tensor_product";
  }
  return "unknown";
}

inline TargetId target_from_string(const std::string& s) {
  if (s == "sine_mix") return TargetId::sine_mix;
  if (s == "poly_smooth") return TargetId::poly_smooth;
  if (s == "step_besov") return TargetId::step_besov;
  if (s == "tensor_product") return TargetId::tensor_product;
  throw std::invalid_argument("unknown target: " + s);
}

/// Named synthetic truth f0 on [0,1]^d. nominal_beta is documentation of the
/// smoothness class, not a computed norm. amplitude rescales the base shape;
/// defaults keep sup|f0| <= 1.
struct TargetFunction {
  TargetId id = TargetId::sine_mix;
  double nominal_beta = 1.0;
  double amplitude = 1.0;
  double frequency = 1.0;  // sine_mix only
  double sup_bound = 1.0;

  double operator()(const Eigen::Ref<const Vector>& x) const {
    const double s = x.mean();
    switch (id) {
      case TargetId::sine_mix:
        // One full period across the diagonal; amplitude sets sup|f0|.
        return amplitude * std::sin(2.0 * std::numbers::pi * frequency * s);
      case TargetId::poly_smooth: {
        // Centered cubic; |4 t^3 + t| peaks at 1 on t in [-1/2, 1/2].
        const double t = s - 0.5;
        return amplitude * (4.0 * t * t * t + t);
      }
      case TargetId::step_besov:
        // Piecewise constant, discontinuous at s = 1/3 and 2/3.
        if (s < 1.0 / 3.0) return amplitude * 0.8;
        if (s < 2.0 / 3.0) return -amplitude * 0.6;
        return amplitude * 1.0;
      case TargetId::tensor_product: {
        double p = 1.0;
        for (Eigen::Index j = 0; j < x.size(); ++j)
          p *= std::sin(std::numbers::pi * x(j));
        return amplitude * p;
      }
    }
    return 0.0;
  }

  Vector evaluate_batch(const Eigen::Ref<const Matrix>& X) const {
    Vector out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = (*this)(X.row(i).transpose());
    return out;
  }
};

enum class NoiseId { gaussian, bounded_uniform, scaled_centered_gamma };

inline std::string to_string(NoiseId id) {
  switch (id) {
    case NoiseId::gaussian: return "gaussian";
    case NoiseId::bounded_uniform: return "bounded_uniform";
    case NoiseId::scaled_centered_gamma: return "scaled_centered_gamma";
  }
  return "unknown";
}

inline NoiseId noise_from_string(const std::string& s) {
  if (s == "gaussian") return NoiseId::gaussian;
  if (s == "bounded_uniform") return NoiseId::bounded_uniform;
  if (s == "scaled_centered_gamma") return NoiseId::scaled_centered_gamma;
  throw std::invalid_argument("unknown noise model: " + s);
}

/// Centered noise with declared sub-Gamma parameters (sigma, varsigma):
/// E|eps|^k <= (k!/2) sigma^2 varsigma^{k-2} for k >= 2.
struct NoiseModel {
  NoiseId id = NoiseId::gaussian;
  double scale = 1.0;   // sigma for gaussian, half-width a for uniform, scale for gamma
  double shape = 2.0;   // gamma only
  double declared_sigma = 1.0;
  double declared_varsigma = 1.0;

  static NoiseModel gaussian_model(double sigma) {
    // (sigma, sigma) is tight at k = 2 and holds with margin above.
    return {NoiseId::gaussian, sigma, 0.0, sigma, sigma};
  }
  static NoiseModel bounded_uniform_model(double a) {
    // E|eps|^k = a^k/(k+1) <= (k!/2)(a^2/3) a^{k-2}.
    return {NoiseId::bounded_uniform, a, 0.0, a / std::sqrt(3.0), a};
  }
  static NoiseModel gamma_model(double shape, double scale) {
    // eps = scale * (Gamma(shape,1) - shape); declared varsigma carries a
    // factor 2 of slack for the asymmetric upper tail.
    return {NoiseId::scaled_centered_gamma, scale, shape,
            std::sqrt(shape) * scale, 2.0 * scale};
  }

  double sample(std::mt19937_64& rng) const {
    switch (id) {
      case NoiseId::gaussian: {
        std::normal_distribution<double> dist(0.0, 1.0);
        return scale > 0.0 ? scale * dist(rng) : 0.0;
      }
      case NoiseId::bounded_uniform: {
        std::uniform_real_distribution<double> dist(-scale, scale);
        return dist(rng);
      }
      case NoiseId::scaled_centered_gamma: {
        std::gamma_distribution<double> dist(shape, 1.0);
        return scale * (dist(rng) - shape);
      }
    }
    return 0.0;
  }
};

enum class TaskKind { regression, classification };

inline std::string to_string(TaskKind t) {
  return t == TaskKind::regression ? "regression" : "classification";
}

struct Dataset {
  Matrix X;  // n x d, entries in [0,1]
  Vector Y;  // reals (regression) or +-1 (classification)
  TaskKind task = TaskKind::regression;
  std::uint64_t seed = 0;
  std::string target_id;
  std::string noise_id;

  Eigen::Index size() const { return X.rows(); }
  Eigen::Index dim() const { return X.cols(); }
};

inline Matrix sample_uniform_covariates(std::int64_t n, int d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix X(n, d);
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) = unif(rng);
  return X;
}

inline Dataset make_regression_dataset(const TargetFunction& f0, const NoiseModel& noise,
                                       std::int64_t n, int d, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  auto rng = make_engine(seed);
  Dataset data;
  data.X = sample_uniform_covariates(n, d, rng);
  data.Y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    data.Y(i) = f0(data.X.row(i).transpose()) + noise.sample(rng);
  data.task = TaskKind::regression;
  data.seed = seed;
  data.target_id = to_string(f0.id);
  data.noise_id = to_string(noise.id);
  return data;
}

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

/// Labels Y = +1 with probability eta(x) = sigmoid(f0(x)), else -1.
inline Dataset make_classification_dataset(const TargetFunction& f0, std::int64_t n, int d,
                                           std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  auto rng = make_engine(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Dataset data;
  data.X = sample_uniform_covariates(n, d, rng);
  data.Y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double eta = sigmoid(f0(data.X.row(i).transpose()));
    data.Y(i) = unif(rng) < eta ? 1.0 : -1.0;
  }
  data.task = TaskKind::classification;
  data.seed = seed;
  data.target_id = to_string(f0.id);
  data.noise_id = "logistic";
  return data;
}

// --- assumption validators ---------------------------------------------

struct MomentCheck {
  int k;
  double estimate;
  double bound;
  double se;
  bool pass;
};

struct SubGammaReport {
  bool pass = true;
  std::vector<MomentCheck> moments;
};

/// Checks E|eps|^k <= (k!/2) sigma^2 varsigma^{k-2} for k = 2..k_max by
/// median-of-means over 100 blocks; the robust estimator keeps the negative
/// controls (infinite higher moments) from hiding behind their own MC noise.
inline SubGammaReport validate_sub_gamma(const std::function<double(std::mt19937_64&)>& sampler,
                                         double sigma, double varsigma, int k_max = 6,
                                         std::int64_t mc_n = 1000000,
                                         std::uint64_t seed = 20240901) {
  if (k_max < 2) throw std::invalid_argument("k_max must be >= 2");
  const int n_blocks = 100;
  const std::int64_t block = std::max<std::int64_t>(1, mc_n / n_blocks);

  SubGammaReport report;
  std::vector<std::vector<double>> block_means(static_cast<std::size_t>(k_max - 1),
                                               std::vector<double>(n_blocks, 0.0));
  auto rng = make_engine(seed);
  for (int b = 0; b < n_blocks; ++b) {
    std::vector<double> acc(static_cast<std::size_t>(k_max - 1), 0.0);
    for (std::int64_t i = 0; i < block; ++i) {
      const double a = std::abs(sampler(rng));
      double p = a;
      for (int k = 2; k <= k_max; ++k) {
        p *= a;
        acc[static_cast<std::size_t>(k - 2)] += p;
      }
    }
    for (int k = 2; k <= k_max; ++k)
      block_means[static_cast<std::size_t>(k - 2)][b] = acc[static_cast<std::size_t>(k - 2)] / static_cast<double>(block);
  }

  auto median_of = [](std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
  };

  double factorial = 1.0;
  for (int k = 2; k <= k_max; ++k) {
    factorial *= k;
    auto& means = block_means[static_cast<std::size_t>(k - 2)];
    const double est = median_of(means);
    std::vector<double> dev(means.size());
    for (std::size_t i = 0; i < means.size(); ++i) dev[i] = std::abs(means[i] - est);
    const double mad = median_of(dev);
    const double se = 1.4826 * mad / std::sqrt(static_cast<double>(n_blocks));
    const double bound =
        0.5 * factorial * sigma * sigma * std::pow(varsigma, static_cast<double>(k - 2));
    const bool ok = est <= bound + 3.0 * se;
    report.moments.push_back({k, est, bound, se, ok});
    report.pass = report.pass && ok;
  }
  return report;
}

inline SubGammaReport validate_sub_gamma(const NoiseModel& noise, int k_max = 6,
                                         std::int64_t mc_n = 1000000,
                                         std::uint64_t seed = 20240901) {
  return validate_sub_gamma([&noise](std::mt19937_64& rng) { return noise.sample(rng); },
                            noise.declared_sigma, noise.declared_varsigma, k_max, mc_n, seed);
}

struct MarginCheck {
  double h;
  double probability;
  double bound;
  double se;
  bool pass;
};

struct MarginReport {
  bool pass = true;
  std::vector<MarginCheck> checks;
};

/// Assumption: P(|eta(X) - 1/2| <= h) <= C_mg * h on a grid of h values.
inline MarginReport check_margin_condition(const TargetFunction& f0, int d, double c_mg,
                                           const std::vector<double>& h_grid,
                                           std::int64_t mc_n = 200000,
                                           std::uint64_t seed = 20240902) {
  for (double h : h_grid)
    if (h <= 0.0 || h >= 0.5) throw std::invalid_argument("h grid must lie in (0, 1/2)");
  auto rng = make_engine(seed);
  const Matrix X = sample_uniform_covariates(mc_n, d, rng);
  Vector margin(mc_n);
  for (Eigen::Index i = 0; i < mc_n; ++i)
    margin(i) = std::abs(sigmoid(f0(X.row(i).transpose())) - 0.5);

  MarginReport report;
  for (double h : h_grid) {
    const double p =
        static_cast<double>((margin.array() <= h).count()) / static_cast<double>(mc_n);
    const double se = std::sqrt(std::max(p * (1.0 - p), 1.0 / static_cast<double>(mc_n)) /
                                static_cast<double>(mc_n));
    const bool ok = p <= c_mg * h + 3.0 * se;
    report.checks.push_back({h, p, c_mg * h, se, ok});
    report.pass = report.pass && ok;
  }
  return report;
}

// --- persistence -------------------------------------------------------

inline void write_dataset_csv(const Dataset& data, const std::filesystem::path& csv_path) {
  std::ofstream out(csv_path);
  if (!out) throw std::runtime_error("cannot open " + csv_path.string());
  out.precision(17);
  for (Eigen::Index j = 0; j < data.dim(); ++j) out << "x" << (j + 1) << ",";
  out << "y\n";
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index j = 0; j < data.dim(); ++j) out << data.X(i, j) << ",";
    out << data.Y(i) << "\n";
  }
  nlohmann::json sidecar = {{"task", to_string(data.task)},
                            {"target", data.target_id},
                            {"noise", data.noise_id},
                            {"seed", data.seed},
                            {"n", data.size()},
                            {"d", data.dim()}};
  std::ofstream meta(csv_path.string() + ".json");
  meta << sidecar.dump(2) << "\n";
}

}  // namespace gibbsnet
