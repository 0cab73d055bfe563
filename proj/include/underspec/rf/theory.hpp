#pragma once

#include <complex>
#include <string>
#include <vector>

namespace underspec::rf {

struct TheoryInputs {
  double zeta = 0.0;
  double psi1 = 1.0;  // N / d
  double psi2 = 1.0;  // n / d
  double lambda_bar = 0.0;  // lambda / mu_star^2; 0 means the ridgeless limit
  double r = 1.0;
  double s = 0.0;
};

enum class G1Form {
  kClosed,  // -chi^2 (chi z^4 - chi z^2 + psi2 z^2 + z^2 - chi psi2 z^4 + 1)
  kOpen,    // -chi^2 (chi z^4 - chi z^2 + psi2 z^2 + z^2 - chi psi2 z^4) + 1
};

struct TheoryOptions {
  double damping = 0.5;
  int picard_budget = 10000;  // per continuation step
  double tolerance = 1e-10;
  G1Form g1_form = G1Form::kClosed;
  // Ridgeless evaluations run at this lambda_bar after continuation.
  double ridgeless_lambda_bar = 1e-8;
};

struct TheorySolution {
  std::complex<double> nu1, nu2;
  double chi = 0.0;   // Re(nu1 nu2)
  double q = 0.0;     // -(psi2 - psi1)_+ / chi0
  double chi0 = 0.0;  // ridgeless closed form
  double lambda_bar = 0.0;  // value actually solved at
  double residual = 0.0;
  int iterations = 0;
};

struct StieltjesValue {
  double g = 0.0;
  double g_prime = 0.0;
};

struct TheoryCurves {
  TheorySolution solution;
  double risk = 0.0;
  double sensitivity_av = 0.0;
  // Shift terms multiplied by mu1^2: r^2 T0 + s^2 zeta^2 D2 / D0 and r^2 T1^2 / T0.
  double t_targeted = 0.0;
  double t_independent = 0.0;
  double e0 = 0, e1 = 0, e2 = 0;
  double d0 = 0, d1 = 0, d2 = 0;
  double g0 = 0, g1 = 0, g2 = 0;
  double h = 0, l = 0, t0 = 0, t1 = 0;
  // Set when psi1 < psi2; the q and chi0 closed forms there are not fully
  // characterised.
  bool provisional = false;
  std::vector<std::string> flags;
};

struct ShiftRatios {
  double targeted = 1.0;
  double independent = 1.0;
  // Expected squared projections E T(W0,W0) and E T(W,W0), in input units.
  double t_targeted = 0.0;
  double t_independent = 0.0;
};

// Damped Picard iteration on
//   nu1 = psi1 / (-xi - nu2 - zeta^2 nu2 / (1 - zeta^2 nu1 nu2)),
//   nu2 = psi2 / (-xi - nu1 - zeta^2 nu1 / (1 - zeta^2 nu1 nu2)),
// continued from large Im(xi) down to xi = i sqrt(psi1 psi2 lambda_bar), with a
// Newton polish at each step. lambda_bar = 0 solves at
// options.ridgeless_lambda_bar. The residual is the summed relative mismatch
// |nu_k - T_k(nu)| / |nu_k|.
TheorySolution solve_fixed_point(const TheoryInputs& in, const TheoryOptions& options = {});

// Ridgeless chi0 closed form.
double chi0_closed_form(double zeta, double psi1);

// Stieltjes transform of the Wishart spectrum at real z < 0 and its
// derivative, on the branch with z g(z) -> -1 as z -> -infinity.
StieltjesValue stieltjes_g(double z, double psi2);

// Full set of polynomial families and derived curves. Throws NumericalError
// when a denominator is within 1e-12 of zero.
TheoryCurves evaluate_theory(const TheoryInputs& in, const TheoryOptions& options = {});

double risk_asymptotic(const TheoryInputs& in, const TheoryOptions& options = {});
double sensitivity_asymptotic(const TheoryInputs& in, const TheoryOptions& options = {});

// Normalized risks (R + delta^2 mu1^2 T) / R for the predictor the shift was
// built from (targeted) and for an independent one.
ShiftRatios shift_inflation(const TheoryInputs& in, double delta, double mu1,
                            const TheoryOptions& options = {});
ShiftRatios shift_inflation(const TheoryCurves& curves, double delta, double mu1);

// Delta at which the targeted ratio equals `targeted_ratio`.
double calibrate_delta(const TheoryInputs& in, double mu1, double targeted_ratio,
                       const TheoryOptions& options = {});

}  // namespace underspec::rf
