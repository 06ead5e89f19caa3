#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "cmj/families.hpp"
#include "cmj/rng.hpp"
#include "cmj/stats.hpp"
#include "doctest.h"

using namespace cmj;

namespace {

// Independent quadrature oracle for the binary-uniform dislocation moment:
// integrates x^theta + (1-x)^theta over (0,1) with a fine Simpson grid.
double uniform_binary_moment_quadrature(double theta) {
  const int n = 20000;
  const double h = 1.0 / n;
  double s = 0.0;
  auto f = [&](double x) { return std::pow(x, theta) + std::pow(1.0 - x, theta); };
  for (int i = 0; i < n; ++i) {
    const double a = i * h;
    s += h / 6.0 * (f(a + 1e-12) + 4.0 * f(a + 0.5 * h) + f(a + h - 1e-12));
  }
  return s;
}

// Monte Carlo estimate of E[sum_i e^{-theta xi_i}] from sampled cursors,
// checked against the transform within 4 standard errors plus an explicit
// truncation allowance for lazily enumerated families.
void check_sampler_matches_transform(const FamilyModel& family, double theta,
                                     std::size_t replicates, double term_cut,
                                     double truncation_allowance, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> vals(replicates);
  for (auto& v : vals) {
    ReproductionCursor cur = spawn_cursor(family, rng);
    double sum = 0.0;
    for (int k = 0; k < 2'000'000; ++k) {
      const auto off = cur.next_offset(rng);
      if (!off) break;
      const double term = std::exp(-theta * *off);
      sum += term;
      if (term < term_cut) break;
    }
    v = sum;
  }
  const MeanSe s = mean_se(vals);
  const double expect = laplace_mu(family, theta);
  const double tol = 4.0 * s.se + truncation_allowance;
  INFO("family=", family.describe(), " theta=", theta, " mc=", s.mean, " mu_hat=", expect,
       " tol=", tol);
  CHECK(std::abs(s.mean - expect) <= tol);
}

double solve_alpha_bisect(const FamilyModel& family) {
  double lo = std::max(family.theta_min(), 0.0) + 1e-9, hi = lo + 1.0;
  auto mu = [&](double t) { return laplace_mu(family, t); };
  while (mu(hi) >= 1.0) hi = 2.0 * hi;
  for (int i = 0; i < 200 && hi - lo > 1e-13; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mu(mid) >= 1.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_SUITE("families") {

TEST_CASE("construction accepts the reference models") {
  CHECK_NOTHROW(presets::rrt());
  CHECK_NOTHROW(presets::bst());
  CHECK_NOTHROW(presets::binary_pyramid());
  CHECK_NOTHROW(make_family(FragmentationParams{2, Dislocation::deterministic({0.5, 0.5})}));
  CHECK_NOTHROW(presets::homogeneous_exp(2.0, 1.0));
}

TEST_CASE("construction rejects invalid parameters") {
  CHECK_THROWS_AS(make_family(GeneralPAParams{WeightSeq::explicit_prefix({})}), InvalidParams);
  CHECK_THROWS_AS(make_family(GeneralPAParams{WeightSeq::explicit_prefix({0.0, 1.0})}),
                  InvalidParams);
  CHECK_THROWS_AS(make_family(GeneralPAParams{WeightSeq::explicit_prefix({1.0, -0.5})}),
                  InvalidParams);
  CHECK_THROWS_AS(make_family(GeneralPAParams{WeightSeq::affine(2.0, 1.0)}), InvalidParams);
  CHECK_THROWS_AS(make_family(GeneralPAParams{WeightSeq::affine(0.0, 0.0)}), InvalidParams);
  CHECK_THROWS_AS(make_family(GeneralPAParams{WeightSeq::affine(-1.0, 2.5)}), InvalidParams);
  CHECK_THROWS_AS(make_family(MarySearchParams{1}), InvalidParams);
  CHECK_THROWS_AS(make_family(MedianBSTParams{0}), InvalidParams);
  CHECK_THROWS_AS(make_family(FragmentationParams{2, Dislocation::deterministic({0.6, 0.5})}),
                  InvalidParams);
  CHECK_THROWS_AS(make_family(FragmentationParams{2, Dislocation::deterministic({1.0, 0.0})}),
                  InvalidParams);
  CHECK_THROWS_AS(make_family(FragmentationParams{3, Dislocation::uniform_binary()}),
                  InvalidParams);
  CHECK_THROWS_AS(make_family(FragmentationParams{2, Dislocation::quantile_table({0.5, 0.3})}),
                  InvalidParams);
  CHECK_THROWS_AS(make_family(HomogeneousParams{0.0, LifetimeLaw::exponential(1.0)}),
                  InvalidParams);
  CHECK_THROWS_AS(make_family(HomogeneousParams{2.0, LifetimeLaw::exponential(-1.0)}),
                  InvalidParams);
  // mean offspring b*E[lifetime] <= 1 violates the growth condition
  CHECK_THROWS_AS(make_family(HomogeneousParams{2.0, LifetimeLaw::exponential(3.0)}),
                  InvalidParams);
  CHECK_THROWS_AS(make_family(HomogeneousParams{1.0, LifetimeLaw::exponential(1.0)}),
                  InvalidParams);
}

TEST_CASE("laplace_mu closed-form values") {
  CHECK(laplace_mu(presets::rrt(), 2.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(laplace_mu(presets::mary_search(3), 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(laplace_mu(presets::bst(), 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(laplace_mu(presets::fragmentation_uniform(), 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(laplace_mu(presets::homogeneous_exp(2.0, 1.0), 1.0) ==
        doctest::Approx(1.0).epsilon(1e-12));
  // binary pyramid: 1/(1+t) + 1/(1+t)^2
  const double t = 0.7;
  CHECK(laplace_mu(presets::binary_pyramid(), t) ==
        doctest::Approx(1.0 / (1.0 + t) + 1.0 / ((1.0 + t) * (1.0 + t))).epsilon(1e-12));
}

TEST_CASE("uniform-binary moment cross-checked by quadrature") {
  const auto frag = presets::fragmentation_uniform();
  // the integrand has an endpoint singularity in the derivative for theta < 1,
  // which limits the oracle itself to ~1e-5 relative accuracy
  for (double theta : {1.0, 1.7, 0.3})
    CHECK(laplace_mu(frag, theta) ==
          doctest::Approx(uniform_binary_moment_quadrature(theta)).epsilon(1e-5));
}

TEST_CASE("explicit and affine descriptors agree") {
  const auto affine = presets::mary_increasing(3);
  const auto expl = make_family(GeneralPAParams{WeightSeq::explicit_prefix({3.0, 2.0, 1.0})});
  for (double t : {0.2, 1.0, 2.5, 7.0})
    CHECK(laplace_mu(affine, t) == doctest::Approx(laplace_mu(expl, t)).epsilon(1e-12));
  const auto rrt_expl = make_family(
      GeneralPAParams{WeightSeq::explicit_prefix({1.0}, WeightSeq::Tail::Const)});
  for (double t : {0.5, 1.0, 3.0})
    CHECK(laplace_mu(presets::rrt(), t) == doctest::Approx(laplace_mu(rrt_expl, t)).epsilon(1e-12));
}

TEST_CASE("laplace_mu domain errors") {
  CHECK_THROWS_AS(laplace_mu(presets::rrt(), 0.0), DomainError);
  CHECK_THROWS_AS(laplace_mu(presets::bst(), -1.0), DomainError);
  CHECK_THROWS_AS(laplace_mu(presets::fragmentation_uniform(), -0.1), DomainError);
  CHECK_THROWS_AS(laplace_mu(presets::homogeneous_exp(2.0, 1.0), 0.0), DomainError);
  CHECK_THROWS_AS(laplace_mu(presets::linear_pa(1.0, 1.0), 1.0), DomainError);
  // fragmentation's domain is closed at zero: counts the positive masses
  CHECK(laplace_mu(make_family(FragmentationParams{2, Dislocation::deterministic({0.3, 0.7})}),
                   0.0) == doctest::Approx(2.0));
}

TEST_CASE("laplace_mu_deriv closed-form values") {
  CHECK(laplace_mu_deriv(presets::rrt(), 1.0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(laplace_mu_deriv(presets::bst(), 1.0) == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(laplace_mu_deriv(presets::mary_search(3), 1.0) ==
        doctest::Approx(-5.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("laplace_mu_deriv agrees with central finite differences") {
  for (const auto& [name, family] : presets::catalogue()) {
    const double alpha = solve_alpha_bisect(family);
    for (double scale : {0.75, 1.0, 1.4, 2.0}) {
      const double theta = std::max(family.theta_min() + 0.3 * alpha, scale * alpha);
      const double step = 1e-6 * std::max(1.0, std::abs(theta));
      const double fd =
          (laplace_mu(family, theta + step) - laplace_mu(family, theta - step)) / (2.0 * step);
      const double d = laplace_mu_deriv(family, theta);
      INFO(name, " theta=", theta);
      CHECK(d == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("expected_phi_hat values") {
  for (double t : {0.5, 1.0, 7.0}) CHECK(expected_phi_hat(presets::rrt(), t) == 1.0);
  CHECK(expected_phi_hat(presets::fragmentation_uniform(), 2.0) == 1.0);
  CHECK(expected_phi_hat(presets::mary_search(3), 1.0) ==
        doctest::Approx(5.0 / 3.0).epsilon(1e-12));
  CHECK(expected_phi_hat(presets::median_bst(1), 1.0) ==
        doctest::Approx(7.0 / 6.0).epsilon(1e-12));
  const double h6 = harmonic_number(6), h3 = harmonic_number(3);
  CHECK(expected_phi_hat(presets::median_bst(2), 1.0) ==
        doctest::Approx(3.0 * (h6 - h3)).epsilon(1e-12));
  CHECK_THROWS_AS(expected_phi_hat(presets::rrt(), 0.0), DomainError);
  CHECK_THROWS_AS(expected_phi_hat(presets::mary_search(3), -1.0), DomainError);
}

TEST_CASE("mu_hat is strictly decreasing on a 100-point grid") {
  for (const auto& [name, family] : presets::catalogue()) {
    const double lo = std::max(family.theta_min(), 0.0) + 0.01;
    double prev = laplace_mu(family, lo);
    for (int i = 1; i < 100; ++i) {
      const double theta = lo + 5.0 * i / 99.0;
      const double v = laplace_mu(family, theta);
      INFO(name, " theta=", theta);
      CHECK(v < prev);
      prev = v;
    }
  }
}

TEST_CASE("sampled cursors reproduce the transform") {
  std::uint64_t seed = 0xBADDECAF;
  for (const auto& [name, family] : presets::catalogue()) {
    const double alpha = solve_alpha_bisect(family);
    const bool heavy = name == "linear-pa-1-1";  // exponentially many offsets per cursor
    const std::size_t reps = heavy ? 30'000 : 100'000;
    const double cut = heavy ? 1e-6 : 1e-12;
    for (double theta : {alpha, alpha + 0.5}) {
      // allowance bounds the discarded tail sum for the lazy families
      double allowance = 1e-9;
      if (heavy) {
        const double beta = 1.0;
        const double cutoff_age = -std::log(cut) / theta;
        allowance = std::exp(-(theta - beta) * cutoff_age) / (theta - beta);
      }
      check_sampler_matches_transform(family, theta, reps, cut, allowance, ++seed);
    }
  }
}

TEST_CASE("first offset of the constant-weight family has mean 1") {
  Rng rng(99);
  const auto rrt = presets::rrt();
  const std::size_t n = 1'000'000;
  std::vector<double> first(n);
  for (auto& v : first) {
    ReproductionCursor cur = spawn_cursor(rrt, rng);
    v = *cur.next_offset(rng);
  }
  const MeanSe s = mean_se(first);
  CHECK(std::abs(s.mean - 1.0) <= 3.0 * s.se);
}

TEST_CASE("fragmentation offsets satisfy the mass identity exactly") {
  Rng rng(7);
  const auto frag = presets::fragmentation_uniform();
  for (int i = 0; i < 1000; ++i) {
    ReproductionCursor cur = spawn_cursor(frag, rng);
    const double o1 = *cur.next_offset(rng);
    const double o2 = *cur.next_offset(rng);
    CHECK(!cur.next_offset(rng).has_value());
    CHECK(std::exp(-o1) + std::exp(-o2) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("every sampled dislocation vector stays on the simplex") {
  Rng rng(11);
  std::vector<double> v;
  const auto laws = {
      Dislocation::uniform_binary(),
      Dislocation::deterministic({0.2, 0.3, 0.5}),
      Dislocation::quantile_table({0.0, 0.1, 0.4, 0.45, 0.9}),
  };
  for (const auto& law : laws) {
    for (int i = 0; i < 100'000; ++i) {
      law.sample(rng, v);
      const double sum = std::accumulate(v.begin(), v.end(), 0.0);
      REQUIRE(std::abs(sum - 1.0) <= 1e-12);
      for (double x : v) REQUIRE((x >= 0.0 && x < 1.0));
    }
  }
}

TEST_CASE("mary-search cursor shape") {
  Rng rng(1234);
  const int m = 4;
  const auto fam = presets::mary_search(m);
  for (int i = 0; i < 1000; ++i) {
    ReproductionCursor cur = spawn_cursor(fam, rng);
    const auto& jumps = cur.char_jumps();
    CHECK(cur.char_initial() == 1.0);
    REQUIRE(jumps.size() == static_cast<std::size_t>(m - 2));
    double level = 1.0, prev_age = 0.0;
    for (const auto& j : jumps) {
      CHECK(j.delta == 1.0);
      CHECK(j.age >= prev_age);
      prev_age = j.age;
      level += j.delta;
    }
    CHECK(level == doctest::Approx(m - 1.0));
    const double split_age = jumps.back().age;
    std::vector<double> offs;
    while (auto off = cur.next_offset(rng)) offs.push_back(*off);
    REQUIRE(offs.size() == static_cast<std::size_t>(m));
    CHECK(std::is_sorted(offs.begin(), offs.end()));
    for (double o : offs) CHECK(o >= split_age);
  }
}

TEST_CASE("the two-way search cursor degenerates to plain exponential births") {
  Rng rng(55);
  const auto fam = presets::mary_search(2);
  std::vector<double> firsts;
  for (int i = 0; i < 200'000; ++i) {
    ReproductionCursor cur = spawn_cursor(fam, rng);
    CHECK(cur.char_jumps().empty());  // no key-arrival waits at m = 2
    CHECK(cur.char_initial() == 1.0);
    const auto o1 = cur.next_offset(rng), o2 = cur.next_offset(rng);
    REQUIRE((o1 && o2));
    CHECK(!cur.next_offset(rng).has_value());
    firsts.push_back(std::min(*o1, *o2));
  }
  // min of two unit exponentials is Exp(2): mean 1/2
  const MeanSe s = mean_se(firsts);
  CHECK(std::abs(s.mean - 0.5) <= 3.0 * s.se);
}

TEST_CASE("median cursor emits twins and the key-count schedule") {
  Rng rng(4321);
  const int ell = 2;
  const auto fam = presets::median_bst(ell);
  for (int i = 0; i < 1000; ++i) {
    ReproductionCursor cur = spawn_cursor(fam, rng);
    CHECK(cur.char_initial() == static_cast<double>(ell));
    const auto& jumps = cur.char_jumps();
    REQUIRE(jumps.size() == static_cast<std::size_t>(ell + 1));
    for (int k = 0; k < ell; ++k) CHECK(jumps[k].delta == 1.0);
    CHECK(jumps.back().delta == 1.0 - 2.0 * ell);
    const double split = jumps.back().age;
    const auto o1 = cur.next_offset(rng), o2 = cur.next_offset(rng);
    REQUIRE(o1.has_value());
    REQUIRE(o2.has_value());
    CHECK(*o1 == split);
    CHECK(*o2 == split);
    CHECK(!cur.next_offset(rng).has_value());
  }
}

TEST_CASE("homogeneous cursor respects the lifetime") {
  Rng rng(5);
  const auto fam = presets::homogeneous_exp(2.0, 1.0);
  for (int i = 0; i < 5000; ++i) {
    ReproductionCursor cur = spawn_cursor(fam, rng);
    const double life = cur.lifetime();
    while (auto off = cur.next_offset(rng)) CHECK(*off < life);
  }
}

TEST_CASE("check_assumptions on the constant-weight family") {
  const AssumptionReport rep = check_assumptions(presets::rrt());
  CHECK(rep.ok);
  CHECK(rep.theta1 > 0.0);
  CHECK(rep.theta1 < 1.0);
  for (const auto& c : rep.checks) CHECK(c.status != AssumptionCheck::Status::Fail);
}

TEST_CASE("check_assumptions flags a non-supercritical weight sequence") {
  const auto weak = make_family(GeneralPAParams{WeightSeq::explicit_prefix({1.0})});
  const AssumptionReport rep = check_assumptions(weak);
  CHECK(!rep.ok);
  bool found = false;
  for (const auto& c : rep.checks)
    if (c.id == "A4/E1") found = c.status == AssumptionCheck::Status::Fail;
  CHECK(found);
}

TEST_CASE("check_assumptions flags the lattice dislocation law") {
  const auto frag = make_family(FragmentationParams{2, Dislocation::deterministic({0.5, 0.5})});
  const AssumptionReport rep = check_assumptions(frag);
  bool lattice = false;
  for (const auto& c : rep.checks)
    if (c.id == "A2") lattice = c.status == AssumptionCheck::Status::Fail;
  CHECK(lattice);
  CHECK(!rep.ok);
}

TEST_CASE("survival conditioning note matches a direct extinction estimate") {
  const auto fam = presets::homogeneous_exp(2.0, 1.0);

  // Independent oracle: walk lineages without the event engine, counting
  // those that die out before producing 300 births.
  Rng rng(2025);
  const std::size_t reps = 100'000;
  std::size_t extinct = 0;
  const auto& hp = fam.homogeneous();
  for (std::size_t r = 0; r < reps; ++r) {
    std::vector<int> stack{1};  // pending individuals (counts batched)
    long births = 1;
    bool died = true;
    while (!stack.empty()) {
      if (births > 300) {
        died = false;
        break;
      }
      int& top = stack.back();
      if (top == 0) {
        stack.pop_back();
        continue;
      }
      --top;
      const double life = hp.lifetime.sample(rng);
      int kids = 0;
      for (double t = rng.exponential(hp.b); t < life; t += rng.exponential(hp.b)) ++kids;
      births += kids;
      if (kids > 0) stack.push_back(kids);
    }
    if (died) ++extinct;
  }
  const double q = static_cast<double>(extinct) / reps;
  const double se = std::sqrt(q * (1.0 - q) / reps);
  CHECK(std::abs(q - 0.5) <= 3.0 * se + 1e-3);

  const AssumptionReport rep = check_assumptions(fam);
  bool noted = false;
  for (const auto& c : rep.checks)
    if (c.id == "A3" && c.status == AssumptionCheck::Status::Note)
      noted = c.message.find("0.5") != std::string::npos;
  CHECK(noted);
}

TEST_CASE("cursor streams are reproducible for a fixed seed") {
  const auto fam = presets::mary_search(3);
  for (int run = 0; run < 2; ++run) {
    Rng a(42), b(42);
    ReproductionCursor ca = spawn_cursor(fam, a), cb = spawn_cursor(fam, b);
    for (;;) {
      const auto oa = ca.next_offset(a), ob = cb.next_offset(b);
      REQUIRE(oa.has_value() == ob.has_value());
      if (!oa) break;
      REQUIRE(*oa == *ob);
    }
  }
}

}  // TEST_SUITE
