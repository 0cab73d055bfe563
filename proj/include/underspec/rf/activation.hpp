#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace underspec::rf {

enum class Activation { kRelu, kLinear, kQuadratic, kTanh };

Activation parse_activation(std::string_view name);
std::string_view activation_name(Activation a);

// Pointwise application.
double apply(Activation a, double t);

// Gaussian moments with G ~ N(0,1).
struct ActivationMoments {
  double mu0 = 0.0;      // E sigma(G)
  double mu1 = 0.0;      // E G sigma(G)
  double mu_star = 0.0;  // sqrt(E sigma(G)^2 - mu0^2 - mu1^2)
  double zeta = 0.0;     // mu1 / mu_star
};

// A scalar function plus the points where it fails to be smooth. Kinks select
// piecewise quadrature; an empty list selects Gauss-Hermite.
struct ScalarFunction {
  std::function<double(double)> f;
  std::vector<double> kinks;
};

ScalarFunction as_function(Activation a);

// Quadrature at 200 nodes, checked against 400 nodes; a change above 1e-10 in
// any moment throws NumericalError. Throws DegenerateInputError when
// mu_star == 0 (affine activation), since zeta is then undefined.
ActivationMoments activation_moments(const ScalarFunction& fn);
ActivationMoments activation_moments(Activation a);

// Probabilists' Gauss-Hermite rule for the standard normal density (weights
// sum to 1), via the Golub-Welsch eigenproblem.
void gauss_hermite(int n, std::vector<double>& nodes, std::vector<double>& weights);
// Gauss-Legendre rule on [a, b].
void gauss_legendre(int n, double a, double b, std::vector<double>& nodes,
                    std::vector<double>& weights);

}  // namespace underspec::rf
