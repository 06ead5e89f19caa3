#include "cmj/renewal.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace cmj {

namespace {

// CDF of a sum of independent exponentials with distinct rates:
// F(t) = 1 - sum_i C_i e^{-rate_i t}, C_i = prod_{j != i} rate_j/(rate_j - rate_i).
struct HypoExp {
  std::vector<double> rates;
  std::vector<double> coeff;

  explicit HypoExp(std::vector<double> r) : rates(std::move(r)) {
    coeff.resize(rates.size());
    for (std::size_t i = 0; i < rates.size(); ++i) {
      double c = 1.0;
      for (std::size_t j = 0; j < rates.size(); ++j) {
        if (j == i) continue;
        const double d = rates[j] - rates[i];
        if (d == 0.0) throw GridError("renewal: repeated rates in hypoexponential stage");
        c *= rates[j] / d;
      }
      coeff[i] = c;
    }
  }

  double cdf(double t) const {
    if (t <= 0.0) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < rates.size(); ++i) s += coeff[i] * std::exp(-rates[i] * t);
    return std::clamp(1.0 - s, 0.0, 1.0);
  }
};

// E[births by age t] for an explicit-weight pure birth process, tabulated on
// the renewal grid by integrating the master equations with RK4. The state
// vector grows whenever probability mass reaches its top entry.
std::vector<double> pure_birth_mean_grid(const WeightSeq& w, std::size_t n_steps, double h) {
  std::vector<double> prob = {1.0};
  prob.resize(16, 0.0);
  std::vector<double> k1, k2, k3, k4, tmp;

  auto deriv = [&](const std::vector<double>& s, std::vector<double>& d) {
    d.assign(s.size(), 0.0);
    for (std::size_t k = 0; k < s.size(); ++k) {
      const double wk = w.rate(k);
      d[k] -= wk * s[k];
      if (k + 1 < s.size()) d[k + 1] += wk * s[k];
    }
  };

  std::vector<double> mean(n_steps + 1, 0.0);
  for (std::size_t j = 1; j <= n_steps; ++j) {
    // keep the explicit integrator stable against the largest active rate
    double wmax = 0.0;
    for (std::size_t k = 0; k < prob.size(); ++k) wmax = std::max(wmax, w.rate(k));
    const int sub = std::max(1, static_cast<int>(std::ceil(h * wmax / 0.4)));
    const double dt = h / sub;
    for (int s = 0; s < sub; ++s) {
      deriv(prob, k1);
      tmp.resize(prob.size());
      for (std::size_t k = 0; k < prob.size(); ++k) tmp[k] = prob[k] + 0.5 * dt * k1[k];
      deriv(tmp, k2);
      for (std::size_t k = 0; k < prob.size(); ++k) tmp[k] = prob[k] + 0.5 * dt * k2[k];
      deriv(tmp, k3);
      for (std::size_t k = 0; k < prob.size(); ++k) tmp[k] = prob[k] + dt * k3[k];
      deriv(tmp, k4);
      for (std::size_t k = 0; k < prob.size(); ++k)
        prob[k] += dt / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
    }
    if (prob.back() > 1e-14) prob.resize(prob.size() + prob.size() / 2 + 8, 0.0);
    double m = 0.0;
    for (std::size_t k = 1; k < prob.size(); ++k) m += static_cast<double>(k) * prob[k];
    mean[j] = m;
    if (prob.size() > 2'000'000)
      throw GridError("renewal: pure-birth state space exploded; reduce T");
  }
  return mean;
}

std::vector<double> mu_cdf_grid(const FamilyModel& family, std::size_t n_steps, double h) {
  std::vector<double> mu(n_steps + 1, 0.0);
  switch (family.kind()) {
    case FamilyKind::GeneralPA: {
      const auto& w = family.general_pa().weights;
      if (w.form == WeightSeq::Form::Affine) {
        // intensity density rho * e^{beta t}
        for (std::size_t j = 1; j <= n_steps; ++j) {
          const double t = static_cast<double>(j) * h;
          mu[j] = w.beta == 0.0 ? w.rho * t : w.rho * std::expm1(w.beta * t) / w.beta;
        }
      } else {
        mu = pure_birth_mean_grid(w, n_steps, h);
      }
      return mu;
    }
    case FamilyKind::MarySearch: {
      const int m = family.mary_search().m;
      if (m > 30) throw GridError("renewal: mary-search kernel supported for m <= 30");
      std::vector<double> rates = {1.0};
      for (int i = 2; i <= m - 1; ++i) rates.push_back(static_cast<double>(i));
      HypoExp hx(std::move(rates));
      for (std::size_t j = 1; j <= n_steps; ++j)
        mu[j] = m * hx.cdf(static_cast<double>(j) * h);
      return mu;
    }
    case FamilyKind::MedianBST: {
      const int l = family.median_bst().ell;
      if (l > 30) throw GridError("renewal: median-bst kernel supported for ell <= 30");
      std::vector<double> rates;
      for (int i = 1; i <= l + 1; ++i) rates.push_back(static_cast<double>(l + i));
      HypoExp hx(std::move(rates));
      for (std::size_t j = 1; j <= n_steps; ++j)
        mu[j] = 2.0 * hx.cdf(static_cast<double>(j) * h);
      return mu;
    }
    case FamilyKind::Fragmentation: {
      const auto& d = family.fragmentation().dislocation;
      for (std::size_t j = 1; j <= n_steps; ++j)
        mu[j] = d.count_ge(std::exp(-static_cast<double>(j) * h));
      return mu;
    }
    case FamilyKind::Homogeneous: {
      const auto& hp = family.homogeneous();
      for (std::size_t j = 1; j <= n_steps; ++j)
        mu[j] = hp.b * hp.lifetime.integrated_survival(static_cast<double>(j) * h);
      return mu;
    }
  }
  return mu;
}

std::vector<double> forcing_grid(const FamilyModel& family, std::size_t n_steps, double h) {
  std::vector<double> g(n_steps + 1, 1.0);
  switch (family.kind()) {
    case FamilyKind::GeneralPA:
    case FamilyKind::Fragmentation:
    case FamilyKind::Homogeneous:
      return g;  // phi == 1
    case FamilyKind::MarySearch: {
      const int m = family.mary_search().m;
      std::vector<HypoExp> stages;
      std::vector<double> rates;
      for (int k = 2; k <= m - 1; ++k) {
        rates.push_back(static_cast<double>(k));
        stages.emplace_back(rates);
      }
      for (std::size_t j = 0; j <= n_steps; ++j) {
        const double t = static_cast<double>(j) * h;
        double v = 1.0;
        for (const auto& st : stages) v += st.cdf(t);
        g[j] = v;
      }
      return g;
    }
    case FamilyKind::MedianBST: {
      const int l = family.median_bst().ell;
      std::vector<HypoExp> stages;
      std::vector<double> rates;
      for (int k = 1; k <= l + 1; ++k) {
        rates.push_back(static_cast<double>(l + k));
        stages.emplace_back(rates);
      }
      for (std::size_t j = 0; j <= n_steps; ++j) {
        const double t = static_cast<double>(j) * h;
        double v = static_cast<double>(l);
        for (int k = 0; k < l; ++k) v += stages[static_cast<std::size_t>(k)].cdf(t);
        v -= (2.0 * l - 1.0) * stages.back().cdf(t);
        g[j] = v;
      }
      return g;
    }
  }
  return g;
}

}  // namespace

double RenewalTable::at(double time) const {
  const double idx = time / h;
  const auto j = static_cast<std::size_t>(std::llround(idx));
  if (std::abs(idx - static_cast<double>(j)) > 1e-9 || j >= t.size())
    throw GridError("RenewalTable::at: time is not on the grid");
  return mean[j];
}

RenewalTable mean_count(const FamilyModel& family, double p, double T, double h) {
  if (!(h > 0.0) || !(T > 0.0)) throw GridError("mean_count: need h > 0 and T > 0");
  if (!(p > 0.0) || p > 1.0) throw GridError("mean_count: p must lie in (0, 1]");
  const double steps = T / h;
  const auto n_steps = static_cast<std::size_t>(std::llround(steps));
  if (n_steps < 1 || std::abs(steps - static_cast<double>(n_steps)) > 1e-9)
    throw GridError("mean_count: h must divide T");
  if (n_steps > 200'000) throw GridError("mean_count: grid capped at 200000 points");

  const std::vector<double> mu = mu_cdf_grid(family, n_steps, h);
  const std::vector<double> g = forcing_grid(family, n_steps, h);

  std::vector<double> kernel(n_steps + 1, 0.0);
  for (std::size_t j = 1; j <= n_steps; ++j) kernel[j] = p * (mu[j] - mu[j - 1]);

  RenewalTable table;
  table.h = h;
  table.t.resize(n_steps + 1);
  table.mean.resize(n_steps + 1);
  for (std::size_t j = 0; j <= n_steps; ++j) table.t[j] = static_cast<double>(j) * h;
  table.mean[0] = g[0];
  for (std::size_t j = 1; j <= n_steps; ++j) {
    double conv = 0.0;
    for (std::size_t i = 1; i <= j; ++i) conv += kernel[i] * table.mean[j - i];
    table.mean[j] = g[j] + conv;
  }
  return table;
}

}  // namespace cmj
