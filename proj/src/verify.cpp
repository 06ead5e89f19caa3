#include "cmj/verify.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <sstream>
#include <thread>

#include "cmj/analysis.hpp"
#include "cmj/experiments.hpp"
#include "cmj/families.hpp"
#include "cmj/renewal.hpp"
#include "cmj/sim.hpp"
#include "cmj/stats.hpp"

namespace cmj {

namespace {

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[48];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

struct Checker {
  bool pass = true;
  std::ostringstream detail;
  int items = 0;

  void note(const std::string& s) {
    if (items++) detail << "; ";
    detail << s;
  }
  void check(bool ok, const std::string& s) {
    if (!ok) pass = false;
    note(std::string(ok ? "" : "FAIL ") + s);
  }
};

// Replicate-parallel map: fills out[i] = f(seed_i, i) on a small pool.
template <typename F>
std::vector<double> parallel_replicates(std::size_t count, int threads, std::uint64_t seed_lane,
                                        std::uint64_t master, F f) {
  std::vector<double> out(count);
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      out[i] = f(derive_seed(master, seed_lane, i));
    }
  };
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  const std::size_t k = std::min<std::size_t>(threads > 0 ? threads : hw, count);
  if (k <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < k; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return out;
}

ExperimentConfig make_cfg(FamilyModel family, RegimeSchedule schedule,
                          std::vector<double> n_values, int replicates, int threads,
                          std::uint64_t master_seed) {
  ExperimentConfig cfg{std::move(family)};
  cfg.schedule = schedule;
  cfg.n_values = std::move(n_values);
  cfg.replicates = replicates;
  cfg.master_seed = master_seed;
  cfg.parallelism = threads;
  return cfg;
}

// --- deterministic criteria -------------------------------------------------

CriterionResult c1_table_constants(int, std::uint64_t) {
  struct Row {
    std::string name;
    FamilyModel family;
    double alpha, mu_bar;
  };
  const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
  const double pyramid_mu =
      4.0 * std::sqrt(5.0) / ((1.0 + std::sqrt(5.0)) * (1.0 + std::sqrt(5.0)));
  std::vector<Row> rows;
  rows.push_back({"rrt", presets::rrt(), 1.0, 1.0});
  rows.push_back({"bst", presets::bst(), 1.0, 0.5});
  for (int m : {2, 3, 5})
    rows.push_back({"mary-increasing-" + std::to_string(m), presets::mary_increasing(m),
                    m - 1.0, 1.0 / m});
  rows.push_back({"linear-pa(1,1)", presets::linear_pa(1.0, 1.0), 2.0, 1.0});
  rows.push_back({"linear-pa(0,2)", presets::linear_pa(0.0, 2.0), 2.0, 0.5});
  rows.push_back({"linear-pa(-1,4)", presets::linear_pa(-1.0, 4.0), 3.0, 0.25});
  rows.push_back({"binary-pyramid", presets::binary_pyramid(), golden, pyramid_mu});

  Checker ck;
  double worst = 0.0;
  for (const Row& r : rows) {
    const double a = solve_malthusian(r.family);
    const double mb = mu_bar_at(r.family, a);
    const double err = std::max(std::abs(a - r.alpha), std::abs(mb - r.mu_bar));
    worst = std::max(worst, err);
    ck.check(err <= 1e-9, r.name + " err=" + fmt(err, "%.2e"));
  }
  return {1, "Malthusian constants reproduce the reference table", ck.pass,
          "max|err|=" + fmt(worst, "%.2e"), 0.0};
}

CriterionResult c2_harmonic_constants(int, std::uint64_t) {
  Checker ck;
  for (int m : {2, 3, 4}) {
    const auto fam = presets::mary_search(m);
    const double hm = harmonic_number(m);
    const double a = solve_malthusian(fam);
    const double e1 = std::abs(mu_bar_at(fam, a) - (hm - 1.0));
    const double e2 = std::abs(expected_phi_hat(fam, 1.0) - 2.0 * (hm - 1.0));
    ck.check(std::abs(a - 1.0) <= 1e-9 && e1 <= 1e-9 && e2 <= 1e-9,
             "mary m=" + std::to_string(m) + " errs=" + fmt(e1, "%.2e") + "," + fmt(e2, "%.2e"));
  }
  for (int l : {1, 2}) {
    const auto fam = presets::median_bst(l);
    const double target = harmonic_number(2 * l + 2) - harmonic_number(l + 1);
    const double a = solve_malthusian(fam);
    const double e1 = std::abs(mu_bar_at(fam, a) - target);
    const double e2 = std::abs(expected_phi_hat(fam, 1.0) - (l + 1.0) * target);
    ck.check(std::abs(a - 1.0) <= 1e-9 && e1 <= 1e-9 && e2 <= 1e-9,
             "median ell=" + std::to_string(l) + " errs=" + fmt(e1, "%.2e") + "," +
                 fmt(e2, "%.2e"));
  }
  return {2, "m-ary and median harmonic-number constants", ck.pass, ck.detail.str(), 0.0};
}

CriterionResult c3_clonal_shift(int, std::uint64_t) {
  Checker ck;
  for (const auto& [name, family] : presets::catalogue()) {
    double dev[3];
    const double eps[3] = {1e-2, 1e-3, 1e-4};
    for (int i = 0; i < 3; ++i) dev[i] = std::abs(clonal_shift_ratio(family, 1.0 - eps[i]) - 1.0);
    const bool decreasing = dev[0] >= dev[1] - 1e-9 && dev[1] >= dev[2] - 1e-9;
    const bool small = dev[2] < 1e-2;
    ck.check(decreasing && small,
             name + " devs=" + fmt(dev[0], "%.2e") + ">" + fmt(dev[1], "%.2e") + ">" +
                 fmt(dev[2], "%.2e"));
  }
  return {3, "first-order shift of the clonal Malthusian parameter", ck.pass, ck.detail.str(),
          0.0};
}

CriterionResult c4_renewal(int, std::uint64_t) {
  Checker ck;
  const auto rrt = presets::rrt();
  for (double p : {1.0, 0.5}) {
    const RenewalTable tbl = mean_count(rrt, p, 5.0, 1e-3);
    const double expect = std::exp(5.0 * p);
    const double rel = std::abs(tbl.at(5.0) - expect) / expect;
    ck.check(rel < 0.005, "p=" + fmt(p, "%.2g") + " rel_err=" + fmt(rel, "%.3e"));
  }
  return {4, "renewal oracle matches the exponential-growth closed form", ck.pass,
          ck.detail.str(), 0.0};
}

// --- statistical criteria ---------------------------------------------------

CriterionResult c5_size_ratio(int threads, std::uint64_t seed) {
  Checker ck;
  {
    auto rep = run_experiment(make_cfg(presets::mary_search(3), RegimeSchedule::fixed(1.0),
                                       {1e5}, 200, threads, derive_seed(seed, 5, 1)));
    const MeanSe s = rep.aggregates[0].ztotal_over_n;
    const double dev = std::abs(s.mean - 0.6);
    ck.check(dev <= 3.0 * s.se && dev <= 0.02,
             "mary3 mean=" + fmt(s.mean) + " se=" + fmt(s.se, "%.2e"));
  }
  {
    auto rep = run_experiment(make_cfg(presets::median_bst(1), RegimeSchedule::fixed(1.0),
                                       {1e5}, 200, threads, derive_seed(seed, 5, 2)));
    const MeanSe s = rep.aggregates[0].ztotal_over_n;
    const double target = 6.0 / 7.0;
    ck.check(std::abs(s.mean - target) <= 3.0 * s.se,
             "median1 mean=" + fmt(s.mean) + " se=" + fmt(s.se, "%.2e") + " target=" +
                 fmt(target));
  }
  return {5, "vertex count over weight approaches 1/E[phi_hat(alpha)]", ck.pass,
          ck.detail.str(), 0.0};
}

CriterionResult c6_time_ratio(int threads, std::uint64_t seed) {
  Checker ck;
  int lane = 1;
  for (const auto& [name, family] :
       {std::pair<std::string, FamilyModel>{"rrt", presets::rrt()},
        std::pair<std::string, FamilyModel>{"mary3", presets::mary_search(3)}}) {
    auto rep = run_experiment(make_cfg(family, RegimeSchedule::fixed(1.0), {1e5}, 200, threads,
                                       derive_seed(seed, 6, lane++)));
    const MeanSe s = rep.aggregates[0].tau_over_logn;
    const double dev = std::abs(s.mean - 1.0);
    ck.check(dev <= 3.0 * s.se, name + " mean=" + fmt(s.mean) + " se=" + fmt(s.se, "%.2e") +
                                    " dev=" + fmt(dev, "%.3e") + " (bias ~ -E[ln W]/ln n)");
  }
  return {6, "stopping time over ln n approaches 1/alpha", ck.pass, ck.detail.str(), 0.0};
}

CriterionResult c7_giant_fraction(int threads, std::uint64_t seed) {
  auto rep = run_experiment(make_cfg(presets::rrt(), RegimeSchedule::supercritical(1.0),
                                     {1e4, 1e5, 1e6}, 200, threads, derive_seed(seed, 7, 0)));
  const double target = std::exp(-1.0);
  Checker ck;
  double dev[3];
  for (int i = 0; i < 3; ++i) {
    dev[i] = std::abs(rep.aggregates[i].frac.mean - target);
    ck.note("n=1e" + std::to_string(4 + i) + " mean=" + fmt(rep.aggregates[i].frac.mean) +
            " dev=" + fmt(dev[i], "%.3e"));
  }
  ck.check(dev[0] >= dev[1] && dev[1] >= dev[2], "deviation decreasing in n");
  ck.check(dev[2] < 0.05, "final deviation < 0.05");
  return {7, "supercritical giant fraction approaches e^{-c/(alpha mu_bar)}", ck.pass,
          ck.detail.str(), 0.0};
}

CriterionResult c8_exponent_slopes(int threads, std::uint64_t seed) {
  Checker ck;
  {
    auto rep = run_experiment(make_cfg(presets::rrt(), RegimeSchedule::fixed(0.9),
                                       {1e4, 1e5, 1e6}, 200, threads, derive_seed(seed, 8, 1)));
    const double slope = slope_fit(rep);
    ck.check(std::abs(slope - 0.9) <= 0.02, "rrt slope=" + fmt(slope, "%.4f"));
  }
  {
    auto rep = run_experiment(make_cfg(presets::bst(), RegimeSchedule::fixed(0.9),
                                       {1e4, 1e5, 1e6}, 200, threads, derive_seed(seed, 8, 2)));
    const double slope = slope_fit(rep);
    ck.check(std::abs(slope - 0.8) <= 0.02, "bst slope=" + fmt(slope, "%.4f"));
  }
  return {8, "root-cluster growth exponent alpha_p/alpha from log-log fits", ck.pass,
          ck.detail.str(), 0.0};
}

CriterionResult c9_regime_separation(int threads, std::uint64_t seed) {
  Checker ck;
  {
    auto rep = run_experiment(make_cfg(presets::rrt(), RegimeSchedule::weakly(), {1e6}, 100,
                                       threads, derive_seed(seed, 9, 1)));
    const double mean = rep.aggregates[0].frac.mean;
    ck.check(mean < 0.15, "weak mean_frac=" + fmt(mean));
  }
  {
    auto rep = run_experiment(make_cfg(presets::rrt(), RegimeSchedule::strongly(), {1e6}, 100,
                                       threads, derive_seed(seed, 9, 2)));
    const double mean = rep.aggregates[0].frac.mean;
    ck.check(mean > 0.85, "strong mean_frac=" + fmt(mean));
  }
  return {9, "weak/strong schedules separate toward fractions 0 and 1", ck.pass,
          ck.detail.str(), 0.0};
}

CriterionResult c10_martingale_mean(int threads, std::uint64_t seed) {
  const auto rrt = presets::rrt();
  const double t = 8.0;
  SimOptions opts;
  opts.stop_at_time = t;
  auto vals = parallel_replicates(10'000, threads, 10, seed, [&](std::uint64_t s) {
    Rng rng(s);
    const SimOutcome o = simulate(rrt, 0.0, 1.0, rng, opts);
    return std::exp(-t) * static_cast<double>(o.z_total);
  });
  const MeanSe s = mean_se(vals);
  const bool ok = std::abs(s.mean - 1.0) <= 4.0 * s.se;
  return {10, "discounted population mean matches the martingale limit", ok,
          "mean=" + fmt(s.mean) + " se=" + fmt(s.se, "%.2e"), 0.0};
}

CriterionResult c11_extinction_conditioning(int threads, std::uint64_t seed) {
  const auto fam = presets::homogeneous_exp(2.0, 1.0);
  auto vals = parallel_replicates(10'000, threads, 11, seed, [&](std::uint64_t s) {
    Rng rng(s);
    const SimOutcome o = simulate(fam, 200.0, 1.0, rng);
    return o.retries >= 1 ? 1.0 : 0.0;
  });
  double q = 0.0;
  for (double v : vals) q += v;
  q /= static_cast<double>(vals.size());
  const double se = std::sqrt(q * (1.0 - q) / static_cast<double>(vals.size()));
  const bool ok = std::abs(q - 0.5) <= 3.0 * se;
  return {11, "first-attempt extinction frequency matches 1 - alpha/b", ok,
          "freq=" + fmt(q) + " se=" + fmt(se, "%.2e"), 0.0};
}

}  // namespace

std::vector<int> criteria_for_tier(const std::string& tier) {
  if (tier == "fast") return {1, 2, 3, 4};
  if (tier == "full") return {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
  throw InvalidParams("verify: tier must be 'fast' or 'full'");
}

CriterionResult run_criterion(int id, int threads, std::uint64_t master_seed) {
  using Fn = std::function<CriterionResult(int, std::uint64_t)>;
  static const Fn table[] = {c1_table_constants, c2_harmonic_constants, c3_clonal_shift,
                             c4_renewal,         c5_size_ratio,          c6_time_ratio,
                             c7_giant_fraction,  c8_exponent_slopes,     c9_regime_separation,
                             c10_martingale_mean, c11_extinction_conditioning};
  if (id < 1 || id > 11) throw InvalidParams("verify: criterion id must be in 1..11");
  const auto start = std::chrono::steady_clock::now();
  CriterionResult r = table[id - 1](threads, master_seed);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::vector<CriterionResult> run_criteria(const std::vector<int>& ids, int threads,
                                          std::uint64_t master_seed) {
  std::vector<CriterionResult> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(run_criterion(id, threads, master_seed));
  return out;
}

bool print_results(const std::vector<CriterionResult>& results, std::ostream& os) {
  bool all = true;
  for (const auto& r : results) {
    all = all && r.pass;
    char head[64];
    std::snprintf(head, sizeof(head), "[%2d] %s  (%.1fs) ", r.id, r.pass ? "PASS" : "FAIL",
                  r.seconds);
    os << head << r.name << "\n      " << r.detail << "\n";
  }
  return all;
}

}  // namespace cmj
