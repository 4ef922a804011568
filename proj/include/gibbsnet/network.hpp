#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace gibbsnet {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class ActivationKind { relu, tanh, identity, leaky_relu, sigmoid_noncompliant };

struct Activation {
  ActivationKind kind = ActivationKind::relu;
  double leaky_slope = 0.01;  // only used by leaky_relu, must lie in (0,1)

  /// Compliant means |phi(x)| <= |x| and 1-Lipschitz; sigmoid violates the
  /// first property (phi(0) = 1/2) and is carried as a flagged option.
  bool compliant() const { return kind != ActivationKind::sigmoid_noncompliant; }
};

inline std::string to_string(const Activation& act) {
  switch (act.kind) {
    case ActivationKind::relu: return "relu";
    case ActivationKind::tanh: return "tanh";
    case ActivationKind::identity: return "identity";
    case ActivationKind::leaky_relu: return "leaky_relu";
    case ActivationKind::sigmoid_noncompliant: return "sigmoid";
  }
  return "unknown";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return {ActivationKind::relu};
  if (s == "tanh") return {ActivationKind::tanh};
  if (s == "identity") return {ActivationKind::identity};
  if (s == "leaky_relu") return {ActivationKind::leaky_relu};
  if (s == "sigmoid") return {ActivationKind::sigmoid_noncompliant};
  throw std::invalid_argument("unknown activation: " + s);
}

template <typename Scalar>
Scalar activation_apply(const Activation& act, Scalar x) {
  switch (act.kind) {
    case ActivationKind::relu: return x > Scalar(0) ? x : Scalar(0);
    case ActivationKind::tanh: return std::tanh(x);
    case ActivationKind::identity: return x;
    case ActivationKind::leaky_relu: return x > Scalar(0) ? x : Scalar(act.leaky_slope) * x;
    case ActivationKind::sigmoid_noncompliant: return Scalar(1) / (Scalar(1) + std::exp(-x));
  }
  return x;
}

/// Subgradient convention: relu'(0) = 0, leaky'(0) = slope.
template <typename Scalar>
Scalar activation_derivative(const Activation& act, Scalar x) {
  switch (act.kind) {
    case ActivationKind::relu: return x > Scalar(0) ? Scalar(1) : Scalar(0);
    case ActivationKind::tanh: {
      const Scalar t = std::tanh(x);
      return Scalar(1) - t * t;
    }
    case ActivationKind::identity: return Scalar(1);
    case ActivationKind::leaky_relu: return x > Scalar(0) ? Scalar(1) : Scalar(act.leaky_slope);
    case ActivationKind::sigmoid_noncompliant: {
      const Scalar s = Scalar(1) / (Scalar(1) + std::exp(-x));
      return s * (Scalar(1) - s);
    }
  }
  return Scalar(1);
}

/// Depth L (>= 3), hidden width D (>= input dim d), scalar output.
/// The stacked coefficient vector reserves a fixed D x (D+1) block per layer
/// regardless of how many entries that layer actually reads, so the total
/// count is exactly L * D * (D + 1).
struct NetworkArchitecture {
  int depth_L;
  int width_D;
  int input_dim_d;
  Activation activation;

  NetworkArchitecture(int L, int D, int d, Activation act = {ActivationKind::relu})
      : depth_L(L), width_D(D), input_dim_d(d), activation(act) {
    if (L < 3) throw std::invalid_argument("depth_L must be >= 3");
    if (d < 1) throw std::invalid_argument("input_dim_d must be >= 1");
    if (D < d) throw std::invalid_argument("width_D must be >= input_dim_d");
    if (act.kind == ActivationKind::leaky_relu &&
        (act.leaky_slope <= 0.0 || act.leaky_slope >= 1.0))
      throw std::invalid_argument("leaky_relu slope must lie in (0,1)");
  }

  std::int64_t parameter_count() const {
    return static_cast<std::int64_t>(depth_L) * width_D * (width_D + 1);
  }

  std::int64_t layer_block_size() const {
    return static_cast<std::int64_t>(width_D) * (width_D + 1);
  }
};

struct ClampSpec {
  double output_bound_C;

  explicit ClampSpec(double C) : output_bound_C(C) {
    if (C < 1.0) throw std::invalid_argument("output_bound_C must be >= 1");
  }
};

struct ParameterVector {
  Vector values;
  double bound_B;

  explicit ParameterVector(Vector v, double B = std::numeric_limits<double>::infinity())
      : values(std::move(v)), bound_B(B) {
    if (std::isfinite(B)) {
      if (B < 1.0) throw std::invalid_argument("bound_B must be >= 1");
      if (values.size() > 0 && values.cwiseAbs().maxCoeff() > B)
        throw std::invalid_argument("parameter exceeds coefficient bound B");
    }
  }

  static ParameterVector zeros(const NetworkArchitecture& arch, double B = std::numeric_limits<double>::infinity()) {
    return ParameterVector(Vector::Zero(arch.parameter_count()), B);
  }

  Eigen::Index size() const { return values.size(); }
};

namespace detail {

/// View of one layer block inside the stacked coefficient vector.
/// Weight slot is row-major D x D; only the leading out x in corner is live.
struct LayerView {
  Eigen::Map<const RowMajorMatrix> weight_slot;
  Eigen::Map<const Vector> bias_slot;

  LayerView(const double* block, int D)
      : weight_slot(block, D, D), bias_slot(block + static_cast<std::int64_t>(D) * D, D) {}
};

inline void check_theta(const NetworkArchitecture& arch, const ParameterVector& theta) {
  if (theta.size() != arch.parameter_count())
    throw std::invalid_argument("parameter vector length does not match architecture");
}

}  // namespace detail

/// Forward pass scratch; reused across evaluations to avoid reallocation and
/// retained by the reverse pass.
struct ForwardWorkspace {
  std::vector<Vector> inputs;       // x^(l-1) per layer
  std::vector<Vector> preacts;      // z^(l) per layer (scalar for the last)
  double pre_clamp = 0.0;
};

inline double forward(const NetworkArchitecture& arch, const ClampSpec& clamp,
                      const ParameterVector& theta, const Eigen::Ref<const Vector>& x,
                      ForwardWorkspace* ws = nullptr) {
  detail::check_theta(arch, theta);
  if (x.size() != arch.input_dim_d)
    throw std::invalid_argument("input dimension mismatch");

  const int L = arch.depth_L;
  const int D = arch.width_D;
  const std::int64_t S = arch.layer_block_size();
  const double* base = theta.values.data();

  if (ws) {
    ws->inputs.assign(L, Vector());
    ws->preacts.assign(L, Vector());
  }

  Vector h = x;
  for (int l = 0; l < L - 1; ++l) {
    detail::LayerView layer(base + l * S, D);
    Vector z = layer.weight_slot.leftCols(h.size()) * h + layer.bias_slot;
    if (ws) {
      ws->inputs[l] = h;
      ws->preacts[l] = z;
    }
    h = z.unaryExpr([&](double v) { return activation_apply(arch.activation, v); });
  }

  detail::LayerView out(base + static_cast<std::int64_t>(L - 1) * S, D);
  const double z = out.weight_slot.row(0).head(D).dot(h) + out.bias_slot(0);
  if (ws) {
    ws->inputs[L - 1] = h;
    ws->preacts[L - 1] = Vector::Constant(1, z);
  }
  const double y = activation_apply(arch.activation, z);
  if (ws) ws->pre_clamp = y;

  const double C = clamp.output_bound_C;
  return std::clamp(y, -C, C);
}

inline Vector forward_batch(const NetworkArchitecture& arch, const ClampSpec& clamp,
                            const ParameterVector& theta, const Eigen::Ref<const Matrix>& X) {
  if (X.cols() != arch.input_dim_d)
    throw std::invalid_argument("input dimension mismatch");
  Vector out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = forward(arch, clamp, theta, X.row(i).transpose());
  return out;
}

/// Reverse-mode gradient of the clamped output w.r.t. the stacked
/// coefficients. Entries of dead block slots stay zero. The clamp
/// contributes factor 1 strictly inside (-C, C) and 0 outside.
inline Vector grad_output_wrt_theta(const NetworkArchitecture& arch, const ClampSpec& clamp,
                                    const ParameterVector& theta, const Eigen::Ref<const Vector>& x) {
  ForwardWorkspace ws;
  forward(arch, clamp, theta, x, &ws);

  const int L = arch.depth_L;
  const int D = arch.width_D;
  const std::int64_t S = arch.layer_block_size();
  Vector grad = Vector::Zero(arch.parameter_count());
  const double* base = theta.values.data();

  const double clamp_grad = std::abs(ws.pre_clamp) < clamp.output_bound_C ? 1.0 : 0.0;
  const double z_out = ws.preacts[L - 1](0);
  double delta_out = clamp_grad * activation_derivative(arch.activation, z_out);

  // Output layer: row 0 of the weight slot plus bias 0.
  {
    double* g = grad.data() + static_cast<std::int64_t>(L - 1) * S;
    const Vector& h = ws.inputs[L - 1];
    for (int j = 0; j < D; ++j) g[j] = delta_out * h(j);
    g[static_cast<std::int64_t>(D) * D] = delta_out;
  }

  detail::LayerView out(base + static_cast<std::int64_t>(L - 1) * S, D);
  Vector delta = delta_out * out.weight_slot.row(0).head(D).transpose();

  for (int l = L - 2; l >= 0; --l) {
    const Vector& z = ws.preacts[l];
    Vector dz = delta.cwiseProduct(
        z.unaryExpr([&](double v) { return activation_derivative(arch.activation, v); }));

    const Vector& in = ws.inputs[l];
    double* g = grad.data() + l * S;
    for (int i = 0; i < D; ++i)
      for (Eigen::Index j = 0; j < in.size(); ++j) g[i * D + j] = dz(i) * in(j);
    for (int i = 0; i < D; ++i) g[static_cast<std::int64_t>(D) * D + i] = dz(i);

    if (l > 0) {
      detail::LayerView layer(base + l * S, D);
      delta = layer.weight_slot.leftCols(in.size()).transpose() * dz;
    }
  }
  return grad;
}

// --- serialization -----------------------------------------------------

inline nlohmann::json architecture_to_json(const NetworkArchitecture& arch, double B, double C) {
  return {{"L", arch.depth_L}, {"D", arch.width_D}, {"d", arch.input_dim_d},
          {"activation", to_string(arch.activation)}, {"B", B}, {"C", C}};
}

struct ArchitectureBundle {
  NetworkArchitecture arch;
  double B;
  double C;
};

inline ArchitectureBundle architecture_from_json(const nlohmann::json& j) {
  Activation act = activation_from_string(j.at("activation").get<std::string>());
  NetworkArchitecture arch(j.at("L").get<int>(), j.at("D").get<int>(), j.at("d").get<int>(), act);
  return {arch, j.at("B").get<double>(), j.at("C").get<double>()};
}

/// Flat binary format: uint64 little-endian length header, then that many
/// IEEE-754 doubles, little-endian.
inline void save_parameters(const std::string& path, const ParameterVector& theta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  const std::uint64_t n = static_cast<std::uint64_t>(theta.size());
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(theta.values.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
}

inline ParameterVector load_parameters(const std::string& path,
                                       double B = std::numeric_limits<double>::infinity()) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  Vector v(static_cast<Eigen::Index>(n));
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw std::runtime_error("truncated parameter file: " + path);
  return ParameterVector(std::move(v), B);
}

}  // namespace gibbsnet
