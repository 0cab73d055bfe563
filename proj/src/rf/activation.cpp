#include "underspec/rf/activation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>

#include "underspec/common/error.hpp"

namespace underspec::rf {

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "linear") return Activation::kLinear;
  if (name == "quadratic") return Activation::kQuadratic;
  if (name == "tanh") return Activation::kTanh;
  throw UsageError("unknown activation '" + std::string(name) +
                   "' (expected relu, linear, quadratic or tanh)");
}

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kLinear: return "linear";
    case Activation::kQuadratic: return "quadratic";
    case Activation::kTanh: return "tanh";
  }
  return "?";
}

double apply(Activation a, double t) {
  switch (a) {
    case Activation::kRelu: return t > 0.0 ? t : 0.0;
    case Activation::kLinear: return t;
    case Activation::kQuadratic: return t * t;
    case Activation::kTanh: return std::tanh(t);
  }
  return 0.0;
}

ScalarFunction as_function(Activation a) {
  ScalarFunction fn{[a](double t) { return apply(a, t); }, {}};
  if (a == Activation::kRelu) fn.kinks = {0.0};
  return fn;
}

namespace {

// Symmetric tridiagonal Jacobi matrix -> nodes (eigenvalues) and weights
// (mass times squared first eigenvector component).
void golub_welsch(const Eigen::VectorXd& offdiag, double mass, std::vector<double>& nodes,
                  std::vector<double>& weights) {
  const int n = static_cast<int>(offdiag.size()) + 1;
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k + 1 < n; ++k) j(k, k + 1) = j(k + 1, k) = offdiag(k);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  nodes.resize(n);
  weights.resize(n);
  for (int k = 0; k < n; ++k) {
    nodes[k] = es.eigenvalues()(k);
    const double v = es.eigenvectors()(0, k);
    weights[k] = mass * v * v;
  }
}

constexpr double kTail = 40.0;  // |t| beyond this carries < 1e-340 Gaussian mass

struct Sums {
  double s0 = 0, s1 = 0, s2 = 0;
};

Sums integrate(const ScalarFunction& fn, int n) {
  Sums s;
  auto acc = [&](double t, double w) {
    const double v = fn.f(t);
    s.s0 += w * v;
    s.s1 += w * t * v;
    s.s2 += w * v * v;
  };
  std::vector<double> x, w;
  if (fn.kinks.empty()) {
    gauss_hermite(n, x, w);
    for (std::size_t k = 0; k < x.size(); ++k) acc(x[k], w[k]);
    return s;
  }
  std::vector<double> cuts{-kTail};
  for (double k : fn.kinks)
    if (k > -kTail && k < kTail) cuts.push_back(k);
  cuts.push_back(kTail);
  std::sort(cuts.begin(), cuts.end());
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
    gauss_legendre(n, cuts[p], cuts[p + 1], x, w);
    for (std::size_t k = 0; k < x.size(); ++k)
      acc(x[k], w[k] * inv_sqrt_2pi * std::exp(-0.5 * x[k] * x[k]));
  }
  return s;
}

}  // namespace

void gauss_hermite(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  Eigen::VectorXd off(n - 1);
  for (int k = 1; k < n; ++k) off(k - 1) = std::sqrt(static_cast<double>(k));
  golub_welsch(off, 1.0, nodes, weights);
}

void gauss_legendre(int n, double a, double b, std::vector<double>& nodes,
                    std::vector<double>& weights) {
  Eigen::VectorXd off(n - 1);
  for (int k = 1; k < n; ++k) off(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
  golub_welsch(off, 2.0, nodes, weights);
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  for (int k = 0; k < n; ++k) {
    nodes[k] = mid + half * nodes[k];
    weights[k] *= half;
  }
}

ActivationMoments activation_moments(const ScalarFunction& fn) {
  const Sums lo = integrate(fn, 200);
  const Sums hi = integrate(fn, 400);
  const double change = std::max({std::abs(lo.s0 - hi.s0), std::abs(lo.s1 - hi.s1),
                                  std::abs(lo.s2 - hi.s2)});
  if (!(change <= 1e-10))
    throw NumericalError("activation quadrature did not converge (node-doubling change " +
                         std::to_string(change) + ")");
  ActivationMoments m;
  m.mu0 = hi.s0;
  m.mu1 = hi.s1;
  double star2 = hi.s2 - hi.s0 * hi.s0 - hi.s1 * hi.s1;
  // Quadrature noise can leave an affine activation with a tiny residual.
  if (star2 <= 1e-12 * std::max(1.0, hi.s2))
    throw DegenerateInputError("activation has no nonlinear component (mu_star = 0)");
  m.mu_star = std::sqrt(star2);
  m.zeta = m.mu1 / m.mu_star;
  return m;
}

ActivationMoments activation_moments(Activation a) {
  static const auto table = [] {
    std::array<std::optional<ActivationMoments>, 4> t;
    for (Activation act : {Activation::kRelu, Activation::kLinear, Activation::kQuadratic,
                           Activation::kTanh}) {
      try {
        t[static_cast<int>(act)] = activation_moments(as_function(act));
      } catch (const DegenerateInputError&) {
      }
    }
    return t;
  }();
  const auto& m = table[static_cast<int>(a)];
  if (!m) throw DegenerateInputError("activation has no nonlinear component (mu_star = 0)");
  return *m;
}

}  // namespace underspec::rf
