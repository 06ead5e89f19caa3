#pragma once

#include <stdexcept>
#include <string>

#include "cmj/families.hpp"

namespace cmj {

struct NoBracket : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Subcritical : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Regime { WeaklySupercritical, Supercritical, StronglySupercritical, FixedP };

std::string to_string(Regime r);

/// Concrete percolation-parameter schedule n -> p_n, one representative per
/// asymptotic regime class, plus a fixed-p schedule for exponent fits:
///   weakly:   1 - p_n = 1/sqrt(ln n)
///   super(c): 1 - p_n = c/ln n
///   strongly: 1 - p_n = 1/(ln n)^2
///   fixed(p): p_n = p
struct RegimeSchedule {
  Regime regime = Regime::Supercritical;
  double c = 1.0;        // Supercritical only
  double p_fixed = 1.0;  // FixedP only

  static RegimeSchedule weakly();
  static RegimeSchedule supercritical(double c);
  static RegimeSchedule strongly();
  static RegimeSchedule fixed(double p);

  /// Throws InvalidParams when the induced p falls outside (0,1).
  double p_of_n(double n) const;

  std::string label() const;
};

/// Malthusian parameter: the unique alpha > 0 with mu_hat(alpha) = 1.
/// Bracketing expands the right endpoint geometrically until mu_hat < 1,
/// then bisects to an interval width of 1e-13.
/// Throws NoBracket when mu_hat never exceeds 1 (assumption failure).
double solve_malthusian(const FamilyModel& family);

/// Clonal Malthusian parameter: the root of p * mu_hat(alpha_p) = 1.
/// Throws Subcritical when no root exists (p at or below p*).
double solve_clonal_malthusian(const FamilyModel& family, double p);

/// Least p for which p * mu_hat can reach 1 (0 when mu_hat is unbounded).
double subcritical_threshold(const FamilyModel& family);

/// mu_bar(alpha) = int t e^{-alpha t} mu(dt) = -mu_hat'(alpha).
double mu_bar(const FamilyModel& family);
double mu_bar_at(const FamilyModel& family, double alpha);

/// Mean limit of the normalized counted process e^{-alpha_p t} Z^phi(t):
/// E[phi_hat(alpha_p)] / (alpha_p * p * mu_bar(alpha_p)).
double martingale_mean_limit(const FamilyModel& family, double p);

/// (alpha - alpha_p) * mu_bar(alpha) / (1 - p); approaches 1 as p -> 1.
double clonal_shift_ratio(const FamilyModel& family, double p);

struct AnalysisReport {
  double alpha = 0.0;
  double alpha_p = 0.0;
  double mu_bar = 0.0;
  double e_phi_hat = 0.0;
  double exponent = 0.0;        // alpha_p / alpha
  double giant_fraction = 0.0;  // regime-specific limit for the root cluster
  double p_star = 0.0;
  double p_n = 1.0;
  Regime regime = Regime::FixedP;
};

/// Deterministic predictions for a family under a schedule at size n.
/// giant_fraction: 0 for the weakly supercritical schedule,
/// e^{-c/(alpha mu_bar)} * E[phi_hat(alpha)] for supercritical(c), and
/// E[phi_hat(alpha)] for strongly supercritical. A fixed schedule predicts
/// 1/E[phi_hat(alpha)] at p = 1 (no percolation) and 0 for p < 1, whose
/// root cluster grows like n^{alpha_p/alpha}.
AnalysisReport predict(const FamilyModel& family, const RegimeSchedule& schedule, double n);

}  // namespace cmj
