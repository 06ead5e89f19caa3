#include "cmj/analysis.hpp"

#include <cmath>
#include <limits>

namespace cmj {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double mu_or_inf(const FamilyModel& family, double theta) {
  try {
    const double v = laplace_mu(family, theta);
    return std::isfinite(v) ? v : kInf;
  } catch (const DomainError&) {
    return kInf;
  }
}

// Bisection for mu_hat(theta) = target on theta above the domain edge.
// mu_hat is strictly decreasing there, so the root is unique when it exists.
double solve_mu_equals(const FamilyModel& family, double target, bool clonal) {
  const double base = std::max(family.theta_min(), 0.0);
  double lo = base + 1e-9;
  if (!(mu_or_inf(family, lo) > target)) {
    if (clonal)
      throw Subcritical("solve_clonal_malthusian: p * mu_hat never reaches 1 for " +
                        family.describe());
    throw NoBracket("solve_malthusian: mu_hat stays at or below 1 for " + family.describe());
  }
  double hi = base + 1.0;
  int guard = 0;
  while (!(mu_or_inf(family, hi) < target)) {
    hi = base + 2.0 * (hi - base);
    if (++guard > 300)
      throw NoBracket("solve: could not bracket the root for " + family.describe());
  }
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mu_or_inf(family, mid) >= target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

std::string to_string(Regime r) {
  switch (r) {
    case Regime::WeaklySupercritical: return "weak";
    case Regime::Supercritical: return "super";
    case Regime::StronglySupercritical: return "strong";
    case Regime::FixedP: return "fixed";
  }
  return "?";
}

RegimeSchedule RegimeSchedule::weakly() { return {Regime::WeaklySupercritical, 0.0, 1.0}; }

RegimeSchedule RegimeSchedule::supercritical(double c) {
  if (!(c > 0.0)) throw InvalidParams("supercritical schedule: c must be positive");
  return {Regime::Supercritical, c, 1.0};
}

RegimeSchedule RegimeSchedule::strongly() { return {Regime::StronglySupercritical, 0.0, 1.0}; }

RegimeSchedule RegimeSchedule::fixed(double p) {
  if (!(p > 0.0) || p > 1.0)
    throw InvalidParams("fixed schedule: p must lie in (0, 1]");
  return {Regime::FixedP, 0.0, p};
}

double RegimeSchedule::p_of_n(double n) const {
  double one_minus_p = 0.0;
  switch (regime) {
    case Regime::WeaklySupercritical:
      one_minus_p = 1.0 / std::sqrt(std::log(n));
      break;
    case Regime::Supercritical:
      one_minus_p = c / std::log(n);
      break;
    case Regime::StronglySupercritical:
      one_minus_p = 1.0 / (std::log(n) * std::log(n));
      break;
    case Regime::FixedP:
      return p_fixed;
  }
  const double p = 1.0 - one_minus_p;
  if (!(p > 0.0) || !(p < 1.0))
    throw InvalidParams("schedule " + label() + " gives p_n outside (0,1) at n = " +
                        std::to_string(n));
  return p;
}

std::string RegimeSchedule::label() const {
  switch (regime) {
    case Regime::WeaklySupercritical: return "weak";
    case Regime::Supercritical: return "super(c=" + std::to_string(c) + ")";
    case Regime::StronglySupercritical: return "strong";
    case Regime::FixedP: return "fixed(p=" + std::to_string(p_fixed) + ")";
  }
  return "?";
}

double solve_malthusian(const FamilyModel& family) {
  return solve_mu_equals(family, 1.0, false);
}

double solve_clonal_malthusian(const FamilyModel& family, double p) {
  if (!(p > 0.0) || p > 1.0)
    throw InvalidParams("solve_clonal_malthusian: p must lie in (0, 1]");
  return solve_mu_equals(family, 1.0 / p, true);
}

double subcritical_threshold(const FamilyModel& family) {
  // sup mu_hat over theta > 0 sits at the domain edge; treat a huge value
  // there as an unbounded transform (p* = 0, every p is supercritical)
  const double base = std::max(family.theta_min(), 0.0);
  const double sup = mu_or_inf(family, base + 1e-9);
  if (!std::isfinite(sup) || sup > 1e6) return 0.0;
  return 1.0 / sup;
}

double mu_bar_at(const FamilyModel& family, double alpha) {
  return -laplace_mu_deriv(family, alpha);
}

double mu_bar(const FamilyModel& family) {
  return mu_bar_at(family, solve_malthusian(family));
}

double martingale_mean_limit(const FamilyModel& family, double p) {
  const double alpha_p = solve_clonal_malthusian(family, p);
  const double tilted_mean = -p * laplace_mu_deriv(family, alpha_p);
  return expected_phi_hat(family, alpha_p) / (alpha_p * tilted_mean);
}

double clonal_shift_ratio(const FamilyModel& family, double p) {
  if (!(p > 0.0) || !(p < 1.0))
    throw InvalidParams("clonal_shift_ratio: p must lie in (0, 1)");
  const double alpha = solve_malthusian(family);
  const double alpha_p = solve_clonal_malthusian(family, p);
  return (alpha - alpha_p) * mu_bar_at(family, alpha) / (1.0 - p);
}

AnalysisReport predict(const FamilyModel& family, const RegimeSchedule& schedule, double n) {
  AnalysisReport r;
  r.regime = schedule.regime;
  r.p_n = schedule.p_of_n(n);
  r.alpha = solve_malthusian(family);
  r.alpha_p = solve_clonal_malthusian(family, r.p_n);
  r.mu_bar = mu_bar_at(family, r.alpha);
  r.e_phi_hat = expected_phi_hat(family, r.alpha);
  r.exponent = r.alpha_p / r.alpha;
  r.p_star = subcritical_threshold(family);
  switch (schedule.regime) {
    case Regime::WeaklySupercritical:
      r.giant_fraction = 0.0;
      break;
    case Regime::Supercritical:
      r.giant_fraction = std::exp(-schedule.c / (r.alpha * r.mu_bar)) * r.e_phi_hat;
      break;
    case Regime::StronglySupercritical:
      r.giant_fraction = r.e_phi_hat;
      break;
    case Regime::FixedP:
      r.giant_fraction = schedule.p_fixed == 1.0 ? 1.0 / r.e_phi_hat : 0.0;
      break;
  }
  return r;
}

}  // namespace cmj
