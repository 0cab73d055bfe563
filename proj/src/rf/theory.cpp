#include "underspec/rf/theory.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "underspec/common/error.hpp"

namespace underspec::rf {

namespace {

using cd = std::complex<double>;

struct FixedPointMap {
  double z2, psi1, psi2;
  cd xi;

  void apply(cd nu1, cd nu2, cd& t1, cd& t2) const {
    const cd c = 1.0 - z2 * nu1 * nu2;
    t1 = psi1 / (-xi - nu2 - z2 * nu2 / c);
    t2 = psi2 / (-xi - nu1 - z2 * nu1 / c);
  }

  double residual(cd nu1, cd nu2) const {
    cd t1, t2;
    apply(nu1, nu2, t1, t2);
    return std::abs(nu1 - t1) / std::abs(nu1) + std::abs(nu2 - t2) / std::abs(nu2);
  }

  // One Newton step on F(nu) = nu - T(nu).
  void newton(cd& nu1, cd& nu2) const {
    const cd c = 1.0 - z2 * nu1 * nu2;
    const cd c2 = c * c;
    const cd den1 = -xi - nu2 - z2 * nu2 / c;
    const cd den2 = -xi - nu1 - z2 * nu1 / c;
    const cd t1 = psi1 / den1, t2 = psi2 / den2;
    const cd dd1_dnu1 = -z2 * z2 * nu2 * nu2 / c2;
    const cd dd1_dnu2 = -1.0 - z2 / c2;
    const cd dd2_dnu2 = -z2 * z2 * nu1 * nu1 / c2;
    const cd dd2_dnu1 = -1.0 - z2 / c2;
    const cd k1 = -psi1 / (den1 * den1), k2 = -psi2 / (den2 * den2);
    // Jacobian of F.
    const cd a = 1.0 - k1 * dd1_dnu1, b = -k1 * dd1_dnu2;
    const cd c_ = -k2 * dd2_dnu1, d = 1.0 - k2 * dd2_dnu2;
    const cd f1 = nu1 - t1, f2 = nu2 - t2;
    const cd det = a * d - b * c_;
    nu1 -= (d * f1 - b * f2) / det;
    nu2 -= (a * f2 - c_ * f1) / det;
  }
};

void require_positive_ratios(const TheoryInputs& in) {
  if (!(in.psi1 > 0.0) || !(in.psi2 > 0.0)) throw UsageError("psi1 and psi2 must be > 0");
  if (!(in.lambda_bar >= 0.0)) throw UsageError("lambda_bar must be >= 0");
  if (!(in.zeta >= 0.0)) throw UsageError("zeta must be >= 0");
}

void guard(double value, const char* name) {
  if (!(std::abs(value) >= 1e-12)) {
    std::ostringstream msg;
    msg << "near-pole evaluation: |" << name << "| = " << std::abs(value) << " < 1e-12";
    throw NumericalError(msg.str());
  }
}

}  // namespace

TheorySolution solve_fixed_point(const TheoryInputs& in, const TheoryOptions& options) {
  require_positive_ratios(in);
  const double lb = in.lambda_bar > 0.0 ? in.lambda_bar : options.ridgeless_lambda_bar;
  const double scale = std::sqrt(in.psi1 * in.psi2);
  const double y_target = std::sqrt(in.psi1 * in.psi2 * lb);
  const double y_start = std::max(10.0 * std::max(1.0, scale), y_target);

  FixedPointMap map{in.zeta * in.zeta, in.psi1, in.psi2, cd(0.0, y_start)};
  cd nu1(0.0, in.psi1 / y_start), nu2(0.0, in.psi2 / y_start);

  // Ten steps per decade of Im(xi).
  const int steps =
      std::max(1, static_cast<int>(std::ceil(10.0 * std::log10(y_start / y_target))));
  TheorySolution sol;
  double res = 0.0;
  for (int step = 0; step <= steps; ++step) {
    const double y = step == steps
                         ? y_target
                         : y_start * std::pow(y_target / y_start, static_cast<double>(step) / steps);
    map.xi = cd(0.0, y);
    res = map.residual(nu1, nu2);
    for (int it = 0; it < options.picard_budget && res > options.tolerance; ++it) {
      cd t1, t2;
      map.apply(nu1, nu2, t1, t2);
      nu1 = (1.0 - options.damping) * nu1 + options.damping * t1;
      nu2 = (1.0 - options.damping) * nu2 + options.damping * t2;
      res = map.residual(nu1, nu2);
      ++sol.iterations;
    }
    // Newton polish: damped Picard crawls when the map is nearly neutral
    // (ridgeless overparametrized side), and it also tightens converged steps.
    for (int it = 0; it < 50; ++it) {
      cd n1 = nu1, n2 = nu2;
      map.newton(n1, n2);
      const double r2 = map.residual(n1, n2);
      if (!(r2 < res)) break;
      nu1 = n1;
      nu2 = n2;
      res = r2;
      ++sol.iterations;
      if (res < 1e-15) break;
    }
    if (!(res <= options.tolerance)) {
      std::ostringstream msg;
      msg << "fixed point did not converge at Im(xi) = " << y << " (residual " << res << ")";
      throw NumericalError(msg.str());
    }
  }
  if (nu1.imag() <= 0.0 || nu2.imag() <= 0.0)
    throw NumericalError("fixed point left the upper half plane");
  const cd prod = nu1 * nu2;
  if (!(std::abs(prod.imag()) <= 1e-8 * std::max(1.0, std::abs(prod))))
    throw NumericalError("nu1 nu2 is not real at the solution");
  sol.nu1 = nu1;
  sol.nu2 = nu2;
  sol.chi = prod.real();
  sol.lambda_bar = lb;
  sol.residual = res;
  if (in.zeta > 0.0) {
    sol.chi0 = chi0_closed_form(in.zeta, in.psi1);
    sol.q = -std::max(in.psi2 - in.psi1, 0.0) / sol.chi0;
  }
  return sol;
}

double chi0_closed_form(double zeta, double psi1) {
  const double z2 = zeta * zeta;
  const double b = 1.0 + z2 - psi1 * z2;
  return (b - std::sqrt(b * b + 4.0 * psi1 * z2)) / (2.0 * z2);
}

StieltjesValue stieltjes_g(double z, double psi2) {
  if (!(z < 0.0)) throw UsageError("stieltjes_g needs real z < 0");
  if (!(psi2 > 0.0)) throw UsageError("psi2 must be > 0");
  const double a = psi2 - 1.0 - z;
  const double disc = a * a - 4.0 * z;
  if (!(disc >= 0.0)) throw NumericalError("negative discriminant in stieltjes_g");
  const double delta = std::sqrt(disc);
  StieltjesValue v;
  // (a - delta) / (2z) rewritten without cancellation; a + delta > 0 for z < 0.
  v.g = 2.0 / (a + delta);
  // g' = (delta - a) / (2 z^2) - (delta - (psi2 + 1 - z)) / (2 z delta), each
  // difference rationalised the same way.
  const double b = psi2 + 1.0 - z;
  const double first = -2.0 / (z * (a + delta));
  const double second = (-4.0 * psi2 / (delta + b)) / (2.0 * z * delta);
  v.g_prime = first - second;
  return v;
}

TheoryCurves evaluate_theory(const TheoryInputs& in, const TheoryOptions& options) {
  TheoryCurves out;
  out.solution = solve_fixed_point(in, options);
  const double c = out.solution.chi;
  const double p1 = in.psi1, p2 = in.psi2, pp = p1 * p2;
  const double z2 = in.zeta * in.zeta, z4 = z2 * z2, z6 = z4 * z2;
  const double c2 = c * c, c3 = c2 * c, c4 = c3 * c, c5 = c4 * c, c6 = c5 * c;

  out.e0 = -c5 * z6 + 3 * c4 * z4 + (pp - p2 - p1 + 1) * c3 * z6 - 2 * c3 * z4 - 3 * c3 * z2 +
           (p1 + p2 - 3 * pp + 1) * c2 * z4 + 2 * c2 * z2 + c2 + 3 * pp * c * z2 - pp;
  out.e1 = p2 * c3 * z4 - p2 * c2 * z2 + pp * c * z2 - pp;
  out.e2 = c5 * z6 - 3 * c4 * z4 + (p1 - 1) * c3 * z6 + 2 * c3 * z4 + 3 * c3 * z2 +
           (-p1 - 1) * c2 * z4 - 2 * c2 * z2 - c2;
  out.d0 = c5 * z6 - 3 * c4 * z4 + (p1 + p2 - pp - 1) * c3 * z6 + 2 * c3 * z4 + 3 * c3 * z2 +
           (3 * pp - p2 - p1 - 1) * c2 * z4 - 2 * c2 * z2 - c2 - 3 * pp * c * z2 + pp;
  out.d1 = c6 * z6 - 2 * c5 * z4 - (pp - p1 - p2 + 1) * c4 * z6 + c4 * z4 + c4 * z2 -
           2 * (1 - pp) * c3 * z4 - (p1 + p2 + pp + 1) * c2 * z2 - c2;
  out.d2 = -(p1 - 1) * c3 * z4 - c3 * z2 + (p1 + 1) * c2 * z2 + c2;
  out.g0 = out.e0;
  const double g1_inner = c * z4 - c * z2 + p2 * z2 + z2 - c * p2 * z4;
  out.g1 = options.g1_form == G1Form::kClosed ? -c2 * (g1_inner + 1.0) : -c2 * g1_inner + 1.0;
  out.g2 = c2 * (c * z2 - 1) * (c2 * z4 - 2 * c * z2 + z2 + 1);
  const double cz1 = c * z2 - 1.0;
  guard(cz1, "chi zeta^2 - 1");
  out.h = z2 * c / cz1;

  guard(out.e0, "E0");
  out.risk = in.r * in.r * out.e1 / out.e0 + in.s * in.s * out.e2 / out.e0;

  out.provisional = in.psi1 < in.psi2;
  if (std::abs(out.h) > 1.0) out.flags.push_back("shrinkage factor H exceeds 1 in modulus");
  if (in.lambda_bar > 0.0)
    out.flags.push_back("sensitivity and shift terms use ridgeless auxiliary quantities");
  if (in.zeta == 0.0) {
    out.flags.push_back("zeta = 0: sensitivity and shift terms undefined");
    return out;
  }

  const double cc = (1.0 + out.solution.q) / z2;
  const StieltjesValue gv = stieltjes_g(-cc, p2);
  out.l = 1.0 - 2.0 * cc * gv.g + cc * cc * gv.g_prime;

  guard(out.d0, "D0");
  const double w_term = z2 * out.d1 / (cz1 * out.d0);
  out.t0 = w_term - out.h * out.h;
  out.t1 = out.l - out.h * out.h;
  const double r2 = in.r * in.r;
  out.sensitivity_av = 2.0 * r2 * (w_term - out.l + out.g1 / out.g0);
  guard(out.t0, "T0");
  // Both already carry the mu1^2 factor of the shift term.
  out.t_targeted = r2 * out.t0 + in.s * in.s * z2 * out.d2 / out.d0;
  out.t_independent = r2 * out.t1 * out.t1 / out.t0;
  if (in.s > 0.0) out.flags.push_back("independent shift term omits the noise contribution");
  return out;
}

double risk_asymptotic(const TheoryInputs& in, const TheoryOptions& options) {
  return evaluate_theory(in, options).risk;
}

double sensitivity_asymptotic(const TheoryInputs& in, const TheoryOptions& options) {
  return evaluate_theory(in, options).sensitivity_av;
}

ShiftRatios shift_inflation(const TheoryCurves& curves, double delta, double mu1) {
  if (!(mu1 != 0.0)) throw UsageError("mu1 must be nonzero");
  ShiftRatios out;
  out.t_targeted = curves.t_targeted / (mu1 * mu1);
  out.t_independent = curves.t_independent / (mu1 * mu1);
  const double k = delta * delta * mu1 * mu1;
  out.targeted = (curves.risk + k * out.t_targeted) / curves.risk;
  out.independent = (curves.risk + k * out.t_independent) / curves.risk;
  return out;
}

ShiftRatios shift_inflation(const TheoryInputs& in, double delta, double mu1,
                            const TheoryOptions& options) {
  return shift_inflation(evaluate_theory(in, options), delta, mu1);
}

double calibrate_delta(const TheoryInputs& in, double mu1, double targeted_ratio,
                       const TheoryOptions& options) {
  if (!(targeted_ratio >= 1.0)) throw UsageError("targeted ratio must be >= 1");
  const TheoryCurves c = evaluate_theory(in, options);
  const ShiftRatios unit = shift_inflation(c, 1.0, mu1);
  const double per_unit = unit.targeted - 1.0;
  if (!(per_unit > 0.0)) throw NumericalError("targeted shift term is not positive");
  return std::sqrt((targeted_ratio - 1.0) / per_unit);
}

}  // namespace underspec::rf
