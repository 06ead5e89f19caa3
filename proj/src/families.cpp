#include "cmj/families.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace cmj {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kMaxSeriesTerms = 1'000'000;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

// Adaptive Simpson on [a,b]; integrand must be smooth on the interval.
inline double simpson_rule(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <typename F>
double adaptive_simpson_rec(const F& f, double a, double b, double fa, double fm,
                            double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson_rule(a, m, fa, flm, fm);
  const double right = simpson_rule(m, b, fm, frm, fb);
  if (depth > 40 || std::abs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
}

template <typename F>
double adaptive_simpson(const F& f, double a, double b, double tol) {
  if (b <= a) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  return adaptive_simpson_rec(f, a, b, fa, fm, fb, simpson_rule(a, b, fa, fm, fb), tol, 0);
}

// x^theta with the suppressed-child convention: zero mass contributes nothing
// even at theta = 0 (the corresponding birth age is infinite).
double mass_pow(double v, double theta) {
  if (v <= 0.0) return 0.0;
  return std::pow(v, theta);
}

double mass_pow_log(double v, double theta) {
  if (v <= 0.0) return 0.0;
  return std::pow(v, theta) * std::log(v);
}

}  // namespace

std::string to_string(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::GeneralPA: return "general-pa";
    case FamilyKind::MarySearch: return "mary-search";
    case FamilyKind::MedianBST: return "median-bst";
    case FamilyKind::Fragmentation: return "fragmentation";
    case FamilyKind::Homogeneous: return "homogeneous";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// WeightSeq

WeightSeq WeightSeq::explicit_prefix(std::vector<double> w, Tail tail) {
  WeightSeq s;
  s.form = Form::Explicit;
  s.prefix = std::move(w);
  s.tail = tail;
  return s;
}

WeightSeq WeightSeq::affine(double beta, double rho) {
  WeightSeq s;
  s.form = Form::Affine;
  s.beta = beta;
  s.rho = rho;
  return s;
}

double WeightSeq::rate(std::uint64_t k) const {
  if (form == Form::Affine) {
    const double w = beta * static_cast<double>(k) + rho;
    return w > 0.0 ? w : 0.0;
  }
  if (k < prefix.size()) return prefix[k];
  return tail == Tail::Const ? prefix.back() : 0.0;
}

double WeightSeq::theta_min() const {
  if (form == Form::Affine) return beta;
  // Explicit: only weights before the first zero matter; a constant positive
  // tail additionally forces theta > 0 for the series to converge.
  double min_pos = kInf;
  bool hit_zero = false;
  for (double w : prefix) {
    if (w <= 0.0) {
      hit_zero = true;
      break;
    }
    min_pos = std::min(min_pos, w);
  }
  const bool const_tail = tail == Tail::Const && !hit_zero && prefix.back() > 0.0;
  if (const_tail) return 0.0;
  return -min_pos;
}

std::string WeightSeq::describe() const {
  std::ostringstream os;
  if (form == Form::Affine) {
    os << "w_k=" << format_double(beta) << "*k+" << format_double(rho);
  } else {
    os << "w=";
    for (std::size_t i = 0; i < prefix.size(); ++i) {
      if (i) os << ",";
      os << format_double(prefix[i]);
    }
    os << (tail == Tail::Const ? ";const" : ";zero");
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Dislocation

Dislocation Dislocation::uniform_binary() {
  Dislocation d;
  d.form = Form::UniformBinary;
  return d;
}

Dislocation Dislocation::deterministic(std::vector<double> masses) {
  Dislocation d;
  d.form = Form::Deterministic;
  d.values = std::move(masses);
  return d;
}

Dislocation Dislocation::quantile_table(std::vector<double> knots) {
  Dislocation d;
  d.form = Form::QuantileTable;
  d.values = std::move(knots);
  return d;
}

int Dislocation::b() const {
  return form == Form::Deterministic ? static_cast<int>(values.size()) : 2;
}

namespace {

// Piecewise-linear quantile function through knots at u = j/K.
double quantile_eval(const std::vector<double>& knots, double u) {
  const std::size_t k = knots.size() - 1;
  const double x = u * static_cast<double>(k);
  const auto j = static_cast<std::size_t>(std::min(x, static_cast<double>(k - 1)));
  const double frac = x - static_cast<double>(j);
  return knots[j] + frac * (knots[j + 1] - knots[j]);
}

// Measure of {u : Q(u) < x} for a nondecreasing piecewise-linear Q.
double quantile_measure_below(const std::vector<double>& knots, double x) {
  const std::size_t k = knots.size() - 1;
  if (x <= knots.front()) return 0.0;
  if (x > knots.back()) return 1.0;
  for (std::size_t j = 0; j < k; ++j) {
    if (x <= knots[j + 1]) {
      const double span = knots[j + 1] - knots[j];
      const double frac = span > 0.0 ? (x - knots[j]) / span : 0.0;
      return (static_cast<double>(j) + frac) / static_cast<double>(k);
    }
  }
  return 1.0;
}

}  // namespace

double Dislocation::moment(double theta) const {
  switch (form) {
    case Form::UniformBinary:
      return 2.0 / (1.0 + theta);
    case Form::Deterministic: {
      double s = 0.0;
      for (double v : values) s += mass_pow(v, theta);
      return s;
    }
    case Form::QuantileTable: {
      const std::size_t k = values.size() - 1;
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const double a = static_cast<double>(j) / static_cast<double>(k);
        const double b2 = static_cast<double>(j + 1) / static_cast<double>(k);
        s += adaptive_simpson(
            [&](double u) {
              const double v = quantile_eval(values, u);
              return mass_pow(v, theta) + mass_pow(1.0 - v, theta);
            },
            a, b2, 1e-12);
      }
      return s;
    }
  }
  return 0.0;
}

double Dislocation::moment_dtheta(double theta) const {
  switch (form) {
    case Form::UniformBinary:
      return -2.0 / ((1.0 + theta) * (1.0 + theta));
    case Form::Deterministic: {
      double s = 0.0;
      for (double v : values) s += mass_pow_log(v, theta);
      return s;
    }
    case Form::QuantileTable: {
      const std::size_t k = values.size() - 1;
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const double a = static_cast<double>(j) / static_cast<double>(k);
        const double b2 = static_cast<double>(j + 1) / static_cast<double>(k);
        s += adaptive_simpson(
            [&](double u) {
              const double v = quantile_eval(values, u);
              return mass_pow_log(v, theta) + mass_pow_log(1.0 - v, theta);
            },
            a, b2, 1e-12);
      }
      return s;
    }
  }
  return 0.0;
}

double Dislocation::count_ge(double x) const {
  switch (form) {
    case Form::UniformBinary:
      // P(V1 >= x) + P(1 - V1 >= x), V1 uniform.
      return 2.0 * std::max(0.0, 1.0 - x);
    case Form::Deterministic: {
      double s = 0.0;
      for (double v : values)
        if (v >= x) s += 1.0;
      return s;
    }
    case Form::QuantileTable: {
      const double v1 = 1.0 - quantile_measure_below(values, x);
      const double v2 = quantile_measure_below(values, 1.0 - x);  // P(Q <= 1-x) approx
      return v1 + v2;
    }
  }
  return 0.0;
}

void Dislocation::sample(Rng& rng, std::vector<double>& out) const {
  out.clear();
  switch (form) {
    case Form::UniformBinary: {
      const double u = rng.uniform01();
      out = {u, 1.0 - u};
      return;
    }
    case Form::Deterministic:
      out = values;
      return;
    case Form::QuantileTable: {
      const double v = quantile_eval(values, rng.uniform01());
      out = {v, 1.0 - v};
      return;
    }
  }
}

std::string Dislocation::describe() const {
  switch (form) {
    case Form::UniformBinary: return "uniform-binary";
    case Form::Deterministic: {
      std::ostringstream os;
      os << "deterministic:";
      for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) os << ",";
        os << format_double(values[i]);
      }
      return os.str();
    }
    case Form::QuantileTable: return "quantile-table[" + std::to_string(values.size()) + "]";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// LifetimeLaw

LifetimeLaw LifetimeLaw::exponential(double rate) {
  LifetimeLaw l;
  l.components = {{Component::Form::Exponential, rate, 1.0}};
  return l;
}

LifetimeLaw LifetimeLaw::deterministic(double duration) {
  LifetimeLaw l;
  l.components = {{Component::Form::Deterministic, duration, 1.0}};
  return l;
}

LifetimeLaw LifetimeLaw::mixture(std::vector<Component> comps) {
  LifetimeLaw l;
  l.components = std::move(comps);
  return l;
}

double LifetimeLaw::mean() const {
  double m = 0.0;
  for (const auto& c : components)
    m += c.weight * (c.form == Component::Form::Exponential ? 1.0 / c.param : c.param);
  return m;
}

double LifetimeLaw::sample(Rng& rng) const {
  const Component* chosen = &components.front();
  if (components.size() > 1) {
    double u = rng.uniform01();
    for (const auto& c : components) {
      if (u < c.weight || &c == &components.back()) {
        chosen = &c;
        break;
      }
      u -= c.weight;
    }
  }
  return chosen->form == Component::Form::Exponential ? rng.exponential(chosen->param)
                                                      : chosen->param;
}

double LifetimeLaw::survival(double t) const {
  double s = 0.0;
  for (const auto& c : components)
    s += c.weight * (c.form == Component::Form::Exponential ? std::exp(-c.param * t)
                                                            : (t < c.param ? 1.0 : 0.0));
  return s;
}

double LifetimeLaw::integrated_survival(double t) const {
  double s = 0.0;
  for (const auto& c : components) {
    if (c.form == Component::Form::Exponential)
      s += c.weight * (-std::expm1(-c.param * t)) / c.param;
    else
      s += c.weight * std::min(t, c.param);
  }
  return s;
}

double LifetimeLaw::one_minus_laplace_over_theta(double theta) const {
  double s = 0.0;
  for (const auto& c : components) {
    if (c.form == Component::Form::Exponential) {
      s += c.weight / (c.param + theta);
    } else {
      const double x = theta * c.param;
      s += c.weight * (x < 1e-4 ? c.param * (1.0 - x / 2.0 + x * x / 6.0)
                                : -std::expm1(-x) / theta);
    }
  }
  return s;
}

double LifetimeLaw::one_minus_laplace_over_theta_deriv(double theta) const {
  double s = 0.0;
  for (const auto& c : components) {
    if (c.form == Component::Form::Exponential) {
      s += -c.weight / ((c.param + theta) * (c.param + theta));
    } else {
      const double d = c.param, x = theta * d;
      if (x < 1e-3) {
        s += c.weight * d * d * (-0.5 + x / 3.0 - x * x / 8.0);
      } else {
        s += c.weight * (d * std::exp(-x) * theta + std::expm1(-x)) / (theta * theta);
      }
    }
  }
  return s;
}

std::string LifetimeLaw::describe() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < components.size(); ++i) {
    const auto& c = components[i];
    if (i) os << "+";
    if (components.size() > 1) os << format_double(c.weight) << "*";
    os << (c.form == Component::Form::Exponential ? "exp:" : "deterministic:")
       << format_double(c.param);
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Validation / make_family

namespace {

void validate_weights(const WeightSeq& w) {
  if (w.form == WeightSeq::Form::Affine) {
    if (w.beta != -1.0 && w.beta != 0.0 && w.beta != 1.0)
      throw InvalidParams("affine weights: beta must be one of {-1, 0, 1}");
    if (!(w.rho > 0.0) || !std::isfinite(w.rho))
      throw InvalidParams("affine weights: rho must be positive and finite");
    if (w.beta == -1.0) {
      const double r = std::round(w.rho);
      if (std::abs(w.rho - r) > 1e-9 || r < 1.0)
        throw InvalidParams(
            "affine weights with beta = -1: rho must be a positive integer so the "
            "sequence terminates at zero");
    }
    return;
  }
  if (w.prefix.empty()) throw InvalidParams("explicit weights: prefix must be non-empty");
  if (!(w.prefix[0] > 0.0)) throw InvalidParams("explicit weights: w_0 must be positive");
  for (double v : w.prefix)
    if (!(v >= 0.0) || !std::isfinite(v))
      throw InvalidParams("explicit weights: all w_k must be finite and nonnegative");
}

void validate_dislocation(int b, const Dislocation& d) {
  if (b < 2) throw InvalidParams("fragmentation: b must be at least 2");
  if (d.b() != b)
    throw InvalidParams("fragmentation: dislocation arity does not match b");
  switch (d.form) {
    case Dislocation::Form::UniformBinary:
      break;
    case Dislocation::Form::Deterministic: {
      double sum = 0.0;
      for (double v : d.values) {
        if (!(v >= 0.0) || !(v < 1.0) || !std::isfinite(v))
          throw InvalidParams("fragmentation: each mass must lie in [0, 1)");
        sum += v;
      }
      if (std::abs(sum - 1.0) > 1e-12)
        throw InvalidParams("fragmentation: deterministic masses must sum to 1 (1e-12)");
      break;
    }
    case Dislocation::Form::QuantileTable: {
      if (d.values.size() < 2)
        throw InvalidParams("fragmentation: quantile table needs at least 2 knots");
      for (std::size_t i = 0; i < d.values.size(); ++i) {
        const double v = d.values[i];
        if (!(v >= 0.0) || !(v < 1.0) || !std::isfinite(v))
          throw InvalidParams("fragmentation: quantile knots must lie in [0, 1)");
        if (i > 0 && v < d.values[i - 1])
          throw InvalidParams("fragmentation: quantile knots must be nondecreasing");
      }
      break;
    }
  }
}

void validate_lifetime(double b, const LifetimeLaw& l) {
  if (!(b > 0.0) || !std::isfinite(b))
    throw InvalidParams("homogeneous: total mass b must be positive and finite");
  if (l.components.empty())
    throw InvalidParams("homogeneous: lifetime law needs at least one component");
  double wsum = 0.0;
  for (const auto& c : l.components) {
    if (!(c.weight > 0.0)) throw InvalidParams("homogeneous: mixture weights must be positive");
    if (!(c.param > 0.0) || !std::isfinite(c.param))
      throw InvalidParams("homogeneous: lifetime parameters must be positive and finite");
    wsum += c.weight;
  }
  if (std::abs(wsum - 1.0) > 1e-9)
    throw InvalidParams("homogeneous: mixture weights must sum to 1");
  const double m = b * l.mean();
  if (!(m > 1.0) || !std::isfinite(m))
    throw InvalidParams("homogeneous: mean offspring count b*E[lifetime] must exceed 1 (got " +
                        format_double(m) + ")");
}

}  // namespace

FamilyModel make_family(FamilyKind kind, FamilyParams params) {
  switch (kind) {
    case FamilyKind::GeneralPA: {
      const auto* p = std::get_if<GeneralPAParams>(&params);
      if (!p) throw InvalidParams("make_family: params do not match kind general-pa");
      validate_weights(p->weights);
      break;
    }
    case FamilyKind::MarySearch: {
      const auto* p = std::get_if<MarySearchParams>(&params);
      if (!p) throw InvalidParams("make_family: params do not match kind mary-search");
      if (p->m < 2 || p->m > 1'000'000) throw InvalidParams("mary-search: m must be >= 2");
      break;
    }
    case FamilyKind::MedianBST: {
      const auto* p = std::get_if<MedianBSTParams>(&params);
      if (!p) throw InvalidParams("make_family: params do not match kind median-bst");
      if (p->ell < 1 || p->ell > 1'000'000) throw InvalidParams("median-bst: ell must be >= 1");
      break;
    }
    case FamilyKind::Fragmentation: {
      const auto* p = std::get_if<FragmentationParams>(&params);
      if (!p) throw InvalidParams("make_family: params do not match kind fragmentation");
      validate_dislocation(p->b, p->dislocation);
      break;
    }
    case FamilyKind::Homogeneous: {
      const auto* p = std::get_if<HomogeneousParams>(&params);
      if (!p) throw InvalidParams("make_family: params do not match kind homogeneous");
      validate_lifetime(p->b, p->lifetime);
      break;
    }
  }
  return FamilyModel(kind, std::move(params));
}

double FamilyModel::theta_min() const {
  switch (kind_) {
    case FamilyKind::GeneralPA: return general_pa().weights.theta_min();
    case FamilyKind::MarySearch: return -1.0;
    case FamilyKind::MedianBST: return -static_cast<double>(median_bst().ell + 1);
    case FamilyKind::Fragmentation: return 0.0;
    case FamilyKind::Homogeneous: return 0.0;
  }
  return 0.0;
}

std::string FamilyModel::describe() const {
  switch (kind_) {
    case FamilyKind::GeneralPA: return "general-pa(" + general_pa().weights.describe() + ")";
    case FamilyKind::MarySearch: return "mary-search(m=" + std::to_string(mary_search().m) + ")";
    case FamilyKind::MedianBST: return "median-bst(ell=" + std::to_string(median_bst().ell) + ")";
    case FamilyKind::Fragmentation:
      return "fragmentation(b=" + std::to_string(fragmentation().b) + "," +
             fragmentation().dislocation.describe() + ")";
    case FamilyKind::Homogeneous:
      return "homogeneous(b=" + format_double(homogeneous().b) + "," +
             homogeneous().lifetime.describe() + ")";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Cursor

ReproductionCursor spawn_cursor(const FamilyModel& family, Rng& rng) {
  ReproductionCursor c;
  switch (family.kind()) {
    case FamilyKind::GeneralPA:
      c.prod_ = ReproductionCursor::Prod::LazyBirth;
      c.weights_ = &family.general_pa().weights;
      break;

    case FamilyKind::MarySearch: {
      const int m = family.mary_search().m;
      // Key-arrival clock: rates 2..m-1 (none for m = 2), so that the
      // transform comes out as m! * prod_{i=1}^{m-1} (i+theta)^{-1}.
      double t = 0.0;
      if (m > 2) c.jumps_.reserve(static_cast<std::size_t>(m) - 2);
      for (int i = 2; i <= m - 1; ++i) {
        t += rng.exponential(static_cast<double>(i));
        c.jumps_.push_back({t, 1.0});
      }
      c.offsets_.resize(static_cast<std::size_t>(m));
      for (auto& off : c.offsets_) off = t + rng.exponential(1.0);
      std::sort(c.offsets_.begin(), c.offsets_.end());
      c.prod_ = ReproductionCursor::Prod::Presampled;
      break;
    }

    case FamilyKind::MedianBST: {
      const int l = family.median_bst().ell;
      double t = 0.0;
      c.jumps_.reserve(static_cast<std::size_t>(l) + 1);
      for (int i = 1; i <= l; ++i) {
        t += rng.exponential(static_cast<double>(l + i));
        c.jumps_.push_back({t, 1.0});
      }
      t += rng.exponential(static_cast<double>(2 * l + 1));
      c.jumps_.push_back({t, 1.0 - 2.0 * l});  // key count drops to 1 at the split
      c.prod_ = ReproductionCursor::Prod::TwinAt;
      c.acc_ = t;
      c.char_init_ = static_cast<double>(l);
      break;
    }

    case FamilyKind::Fragmentation: {
      const auto& d = family.fragmentation().dislocation;
      std::vector<double> v;
      d.sample(rng, v);
      const double sum = std::accumulate(v.begin(), v.end(), 0.0);
      if (std::abs(sum - 1.0) > 1e-12)
        throw std::runtime_error("fragmentation: sampled dislocation left the simplex");
      c.offsets_.reserve(v.size());
      for (double vi : v)
        if (vi > 0.0) c.offsets_.push_back(-std::log(vi));
      std::sort(c.offsets_.begin(), c.offsets_.end());
      c.prod_ = ReproductionCursor::Prod::Presampled;
      break;
    }

    case FamilyKind::Homogeneous: {
      const auto& p = family.homogeneous();
      c.prod_ = ReproductionCursor::Prod::PoissonLife;
      c.rate_ = p.b;
      c.limit_ = p.lifetime.sample(rng);
      break;
    }
  }
  return c;
}

std::optional<double> ReproductionCursor::next_offset(Rng& rng) {
  switch (prod_) {
    case Prod::LazyBirth: {
      const double w = weights_->rate(k_);
      if (w <= 0.0) return std::nullopt;
      acc_ += rng.exponential(w);
      ++k_;
      return acc_;
    }
    case Prod::PoissonLife: {
      if (acc_ >= limit_) return std::nullopt;
      acc_ += rng.exponential(rate_);
      if (acc_ >= limit_) return std::nullopt;
      return acc_;
    }
    case Prod::TwinAt: {
      if (k_ >= 2) return std::nullopt;
      ++k_;
      return acc_;
    }
    case Prod::Presampled: {
      if (k_ >= offsets_.size()) return std::nullopt;
      return offsets_[k_++];
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Transforms

namespace {

// Sum over k >= 1 of prod_{i<k} w_i/(w_i + theta), optionally the
// theta-derivative. Truncates once the running term falls below 1e-16 of the
// partial sum; declares divergence after 1e6 terms.
double general_pa_series(const WeightSeq& w, double theta, bool deriv) {
  double sum = 0.0, dsum = 0.0, term = 1.0, logd = 0.0;
  for (std::uint64_t k = 0; k < kMaxSeriesTerms; ++k) {
    const double wk = w.rate(k);
    if (wk <= 0.0) return deriv ? dsum : sum;
    const double denom = wk + theta;
    if (denom <= 0.0)
      throw DomainError("laplace_mu: theta outside the transform domain");
    term *= wk / denom;
    logd -= 1.0 / denom;
    sum += term;
    dsum += term * logd;
    if (term < 1e-16 * sum) return deriv ? dsum : sum;
  }
  throw DomainError("laplace_mu: series did not converge within 1e6 terms");
}

double require_domain(const FamilyModel& family, double theta) {
  const double lo = family.theta_min();
  const bool closed_left = family.kind() == FamilyKind::Fragmentation;
  if (closed_left ? theta < lo : theta <= lo)
    throw DomainError("laplace_mu: theta = " + format_double(theta) +
                      " outside domain of " + family.describe());
  return theta;
}

}  // namespace

double laplace_mu(const FamilyModel& family, double theta) {
  require_domain(family, theta);
  switch (family.kind()) {
    case FamilyKind::GeneralPA: {
      const auto& w = family.general_pa().weights;
      if (w.form == WeightSeq::Form::Affine) return w.rho / (theta - w.beta);
      return general_pa_series(w, theta, false);
    }
    case FamilyKind::MarySearch: {
      const int m = family.mary_search().m;
      double v = 1.0;
      for (int i = 1; i <= m - 1; ++i) v *= static_cast<double>(i) / (i + theta);
      return v * m;  // m * (m-1)! / prod(i+theta) = m! * prod (i+theta)^{-1}
    }
    case FamilyKind::MedianBST: {
      const int l = family.median_bst().ell;
      double v = 2.0;
      for (int i = 1; i <= l + 1; ++i) v *= static_cast<double>(l + i) / (l + i + theta);
      return v;
    }
    case FamilyKind::Fragmentation:
      return family.fragmentation().dislocation.moment(theta);
    case FamilyKind::Homogeneous: {
      const auto& p = family.homogeneous();
      return p.b * p.lifetime.one_minus_laplace_over_theta(theta);
    }
  }
  return 0.0;
}

double laplace_mu_deriv(const FamilyModel& family, double theta) {
  require_domain(family, theta);
  switch (family.kind()) {
    case FamilyKind::GeneralPA: {
      const auto& w = family.general_pa().weights;
      if (w.form == WeightSeq::Form::Affine)
        return -w.rho / ((theta - w.beta) * (theta - w.beta));
      return general_pa_series(w, theta, true);
    }
    case FamilyKind::MarySearch: {
      const int m = family.mary_search().m;
      double logd = 0.0;
      for (int i = 1; i <= m - 1; ++i) logd -= 1.0 / (i + theta);
      return laplace_mu(family, theta) * logd;
    }
    case FamilyKind::MedianBST: {
      const int l = family.median_bst().ell;
      double logd = 0.0;
      for (int i = 1; i <= l + 1; ++i) logd -= 1.0 / (l + i + theta);
      return laplace_mu(family, theta) * logd;
    }
    case FamilyKind::Fragmentation:
      return family.fragmentation().dislocation.moment_dtheta(theta);
    case FamilyKind::Homogeneous: {
      const auto& p = family.homogeneous();
      return p.b * p.lifetime.one_minus_laplace_over_theta_deriv(theta);
    }
  }
  return 0.0;
}

double expected_phi_hat(const FamilyModel& family, double theta) {
  if (!(theta > 0.0)) throw DomainError("expected_phi_hat: theta must be positive");
  switch (family.kind()) {
    case FamilyKind::GeneralPA:
    case FamilyKind::Fragmentation:
    case FamilyKind::Homogeneous:
      return 1.0;  // phi == 1
    case FamilyKind::MarySearch: {
      // phi_hat(theta) = 1 + sum_{k=2}^{m-1} e^{-theta T_k}.
      const int m = family.mary_search().m;
      double s = 1.0, prod = 1.0;
      for (int k = 2; k <= m - 1; ++k) {
        prod *= static_cast<double>(k) / (k + theta);
        s += prod;
      }
      return s;
    }
    case FamilyKind::MedianBST: {
      // phi_hat(theta) = ell + sum_{k=1}^{ell} e^{-theta T_k} - (2ell-1) e^{-theta T}.
      const int l = family.median_bst().ell;
      double s = static_cast<double>(l), prod = 1.0;
      for (int k = 1; k <= l; ++k) {
        prod *= static_cast<double>(l + k) / (l + k + theta);
        s += prod;
      }
      prod *= static_cast<double>(2 * l + 1) / (2 * l + 1 + theta);
      return s - (2.0 * l - 1.0) * prod;
    }
  }
  return 1.0;
}

// ---------------------------------------------------------------------------
// Assumption checks

namespace {

// Local bisection for mu_hat(theta) = 1 on theta > max(theta_min, 0); used
// only for the survival-conditioning note (the analysis module has the
// full solver).
std::optional<double> local_malthusian(const FamilyModel& family) {
  const double base = std::max(family.theta_min(), 0.0);
  double lo = base + 1e-9, hi = std::max(1.0, lo * 2.0);
  const auto mu = [&](double t) {
    try {
      return laplace_mu(family, t);
    } catch (const DomainError&) {
      return kInf;
    }
  };
  if (!(mu(lo) > 1.0)) return std::nullopt;
  int guard = 0;
  while (mu(hi) >= 1.0) {
    hi = base + (hi - base) * 2.0;
    if (++guard > 200) return std::nullopt;
  }
  for (int i = 0; i < 200 && hi - lo > 1e-13; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mu(mid) >= 1.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

AssumptionReport check_assumptions(const FamilyModel& family) {
  using Status = AssumptionCheck::Status;
  AssumptionReport rep;
  auto add = [&](const char* id, Status st, std::string msg) {
    rep.checks.push_back({id, st, std::move(msg)});
    if (st == Status::Fail) rep.ok = false;
  };

  // A1: no mass at age zero for any supported family.
  add("A1", Status::Pass, "birth ages are strictly positive; no atom at zero");

  // A2: lattice support is only possible for atomic dislocation laws.
  if (family.kind() == FamilyKind::Fragmentation &&
      family.fragmentation().dislocation.form == Dislocation::Form::Deterministic) {
    const auto& v = family.fragmentation().dislocation.values;
    double first_pos = -1.0;
    bool all_equal = true;
    for (double x : v) {
      if (x <= 0.0) continue;
      if (first_pos < 0.0)
        first_pos = x;
      else if (std::abs(x - first_pos) > 1e-15)
        all_equal = false;
    }
    if (all_equal)
      add("A2", Status::Fail, "deterministic equal split: intensity concentrated on a lattice");
    else
      add("A2", Status::Note, "atomic dislocation law; lattice condition not verified");
  } else {
    add("A2", Status::Pass, "birth ages have a continuous distribution");
  }

  // A3: at least one child almost surely, except Homogeneous.
  if (family.kind() == FamilyKind::Homogeneous) {
    const double b = family.homogeneous().b;
    std::string msg = "results hold conditioned on survival";
    if (auto alpha = local_malthusian(family))
      msg += "; extinction probability 1 - alpha/b = " + format_double(1.0 - *alpha / b);
    add("A3", Status::Note, msg);
  } else {
    add("A3", Status::Pass, "every individual has at least one child almost surely");
  }

  // A4 / E1: locate theta1 with 1 < mu_hat(theta1) < inf by grid search.
  const double base = std::max(family.theta_min(), 0.0);
  double theta1 = -1.0, mu1 = 0.0;
  for (int i = 0; i < 240; ++i) {
    // log-spaced offsets from 1e-6 up to 1e3 above the domain edge
    const double d = 1e-6 * std::pow(10.0, 9.0 * i / 239.0);
    const double th = base + d;
    double v;
    try {
      v = laplace_mu(family, th);
    } catch (const DomainError&) {
      continue;
    }
    if (v > 1.0 && std::isfinite(v)) {
      theta1 = th;  // keep the largest witness
      mu1 = v;
    }
  }
  if (theta1 > 0.0) {
    rep.theta1 = theta1;
    add("A4/E1", Status::Pass,
        "theta1 = " + format_double(theta1) + " gives mu_hat = " + format_double(mu1) +
            " in (1, inf); Malthusian parameter exists");
  } else {
    add("A4/E1", Status::Fail, "mu_hat never exceeds 1 on the search grid; not supercritical");
  }

  // A5 / E2: variance of the discounted birth sum.
  switch (family.kind()) {
    case FamilyKind::GeneralPA: {
      if (theta1 > 0.0) {
        double mu2 = kInf;
        try {
          mu2 = laplace_mu(family, 2.0 * theta1);
        } catch (const DomainError&) {
        }
        if (std::isfinite(mu2))
          add("A5/E2", Status::Pass,
              "mu_hat(2*theta1) = " + format_double(mu2) +
                  " finite; discounted birth sum has finite variance for the accepted "
                  "weight descriptors");
        else
          add("A5/E2", Status::Fail, "mu_hat(2*theta1) diverges");
      } else {
        add("A5/E2", Status::Note, "skipped: no theta1 witness");
      }
      break;
    }
    case FamilyKind::MarySearch:
      add("A5/E2", Status::Pass, "finite for theta > -1/2 (closed-form second moment)");
      break;
    case FamilyKind::MedianBST:
      add("A5/E2", Status::Pass,
          "Var = 2 mu_hat(2 theta) - mu_hat(theta)^2, finite for theta > -(ell+1)/2");
      break;
    case FamilyKind::Fragmentation:
      add("A5/E2", Status::Pass, "discounted birth sum bounded by b");
      break;
    case FamilyKind::Homogeneous:
      add("A5/E2", Status::Pass, "Campbell formula: finite for theta > 0");
      break;
  }

  // A6/A7: all canonical characteristics are bounded.
  double bound = 1.0;
  if (family.kind() == FamilyKind::MarySearch)
    bound = family.mary_search().m - 1.0;
  else if (family.kind() == FamilyKind::MedianBST)
    bound = 2.0 * family.median_bst().ell;
  add("A6", Status::Pass,
      "characteristic bounded by " + format_double(bound) + "; discounted sup integrable");
  add("A7", Status::Pass, "Var(phi(t)) bounded by " + format_double(bound * bound));

  // E3 applies to Homogeneous only (enforced at construction).
  if (family.kind() == FamilyKind::Homogeneous) {
    const auto& p = family.homogeneous();
    add("E3", Status::Pass,
        "mean offspring count m = " + format_double(p.b * p.lifetime.mean()) + " in (1, inf)");
  }

  return rep;
}

// ---------------------------------------------------------------------------
// Presets

namespace presets {

FamilyModel rrt() { return make_family(GeneralPAParams{WeightSeq::affine(0.0, 1.0)}); }

FamilyModel bst() {
  return make_family(GeneralPAParams{WeightSeq::explicit_prefix({2.0, 1.0})});
}

FamilyModel binary_pyramid() {
  return make_family(GeneralPAParams{WeightSeq::explicit_prefix({1.0, 1.0})});
}

FamilyModel mary_increasing(int m) {
  return make_family(GeneralPAParams{WeightSeq::affine(-1.0, static_cast<double>(m))});
}

FamilyModel mary_search(int m) { return make_family(MarySearchParams{m}); }

FamilyModel median_bst(int ell) { return make_family(MedianBSTParams{ell}); }

FamilyModel linear_pa(double beta, double rho) {
  return make_family(GeneralPAParams{WeightSeq::affine(beta, rho)});
}

FamilyModel fragmentation_uniform() {
  return make_family(FragmentationParams{2, Dislocation::uniform_binary()});
}

FamilyModel homogeneous_exp(double b, double rate) {
  return make_family(HomogeneousParams{b, LifetimeLaw::exponential(rate)});
}

std::vector<std::pair<std::string, FamilyModel>> catalogue() {
  std::vector<std::pair<std::string, FamilyModel>> v;
  v.emplace_back("rrt", rrt());
  v.emplace_back("bst", bst());
  v.emplace_back("binary-pyramid", binary_pyramid());
  v.emplace_back("mary-increasing-3", mary_increasing(3));
  v.emplace_back("mary-search-3", mary_search(3));
  v.emplace_back("mary-search-4", mary_search(4));
  v.emplace_back("median-1", median_bst(1));
  v.emplace_back("median-2", median_bst(2));
  v.emplace_back("linear-pa-1-1", linear_pa(1.0, 1.0));
  v.emplace_back("frag-uniform", fragmentation_uniform());
  v.emplace_back("homogeneous-2-exp1", homogeneous_exp(2.0, 1.0));
  return v;
}

}  // namespace presets

}  // namespace cmj
