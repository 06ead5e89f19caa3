#include "cmj/experiments.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <thread>

namespace cmj {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_n(double n) {
  char buf[40];
  if (n == std::floor(n) && std::abs(n) < 1e15)
    std::snprintf(buf, sizeof(buf), "%.0f", n);
  else
    std::snprintf(buf, sizeof(buf), "%.17g", n);
  return buf;
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.replicates < 1) throw InvalidParams("experiment: replicates must be >= 1");
  if (cfg.n_values.empty()) throw InvalidParams("experiment: n_values must be non-empty");
  for (std::size_t i = 0; i < cfg.n_values.size(); ++i) {
    if (!(cfg.n_values[i] >= 1.0))
      throw InvalidParams("experiment: every n must be at least 1");
    if (i > 0 && !(cfg.n_values[i] > cfg.n_values[i - 1]))
      throw InvalidParams("experiment: n_values must be strictly increasing");
    cfg.schedule.p_of_n(cfg.n_values[i]);  // throws when p_n leaves (0,1)
  }
}

AggregateRow aggregate_from_rows(const std::vector<RawRow>& rows, double n, double p,
                                 double exponent, double predicted_frac) {
  std::vector<double> frac, scaled, zn, tln;
  const double logn = std::log(n);
  const double scale = std::pow(n, exponent);
  for (const RawRow& r : rows) {
    if (r.failed) continue;
    frac.push_back(static_cast<double>(r.root_cluster) / n);
    scaled.push_back(static_cast<double>(r.root_cluster) / scale);
    zn.push_back(static_cast<double>(r.z_total) / n);
    tln.push_back(logn > 0.0 ? r.tau / logn : std::numeric_limits<double>::quiet_NaN());
  }
  AggregateRow a;
  a.n = n;
  a.p = p;
  a.frac = mean_se(frac);
  a.scaled = mean_se(scaled);
  a.ztotal_over_n = mean_se(zn);
  a.tau_over_logn = mean_se(tln);
  a.predicted_frac = predicted_frac;
  a.predicted_exponent = exponent;
  return a;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);

  const std::size_t n_count = cfg.n_values.size();
  const auto reps = static_cast<std::size_t>(cfg.replicates);

  ExperimentReport report;
  report.family_label = cfg.family_label.empty() ? to_string(cfg.family.kind())
                                                 : cfg.family_label;
  report.params_label = cfg.params_label.empty() ? cfg.family.describe() : cfg.params_label;
  report.schedule = cfg.schedule;
  report.n_values = cfg.n_values;
  report.rows.assign(n_count, std::vector<RawRow>(reps));
  report.total_count = static_cast<std::int64_t>(n_count * reps);

  std::vector<AnalysisReport> analysis(n_count);
  for (std::size_t i = 0; i < n_count; ++i)
    analysis[i] = predict(cfg.family, cfg.schedule, cfg.n_values[i]);

  SimOptions opts;
  opts.mode = cfg.mode;

  std::atomic<std::size_t> next{0};
  const std::size_t task_count = n_count * reps;
  auto worker = [&]() {
    for (;;) {
      const std::size_t task = next.fetch_add(1);
      if (task >= task_count) return;
      const std::size_t ni = task / reps;
      const std::size_t r = task % reps;
      RawRow& row = report.rows[ni][r];
      row.n = cfg.n_values[ni];
      row.p = analysis[ni].p_n;
      row.replicate = static_cast<int>(r);
      row.seed = derive_seed(cfg.master_seed, ni, r);
      try {
        Rng rng(row.seed);
        const SimOutcome o = simulate(cfg.family, row.n, row.p, rng, opts);
        row.tau = o.tau;
        row.z_total = o.z_total;
        row.z_phi = o.z_phi;
        row.root_cluster = o.root_cluster;
        row.n_mutants = o.n_mutants;
        row.retries = o.retries;
      } catch (const std::exception& e) {
        row.failed = true;
        row.error = e.what();
      }
    }
  };

  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  const std::size_t n_threads =
      std::min<std::size_t>(cfg.parallelism > 0 ? static_cast<std::size_t>(cfg.parallelism) : hw,
                            task_count);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (std::size_t i = 0; i < n_count; ++i) {
    for (const RawRow& r : report.rows[i])
      if (r.failed) ++report.failure_count;
    report.aggregates.push_back(aggregate_from_rows(report.rows[i], cfg.n_values[i],
                                                    analysis[i].p_n, analysis[i].exponent,
                                                    analysis[i].giant_fraction));
  }
  if (cfg.schedule.regime == Regime::FixedP && n_count >= 3) {
    try {
      report.slope = slope_fit(report);
    } catch (const InsufficientData&) {
    }
  }
  return report;
}

double slope_fit(const ExperimentReport& report) {
  if (report.n_values.size() < 3)
    throw InsufficientData("slope_fit: need at least 3 thresholds");
  const double p0 = report.aggregates.front().p;
  for (const auto& a : report.aggregates)
    if (a.p != p0)
      throw InsufficientData("slope_fit: thresholds were not run at one fixed p");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < report.n_values.size(); ++i) {
    std::vector<double> logs;
    for (const RawRow& r : report.rows[i]) {
      if (r.failed) continue;
      if (r.root_cluster < 1)
        throw InsufficientData("slope_fit: replicate with empty root cluster");
      logs.push_back(std::log(static_cast<double>(r.root_cluster)));
    }
    if (logs.empty()) throw InsufficientData("slope_fit: a threshold has no usable rows");
    x.push_back(std::log(report.n_values[i]));
    y.push_back(mean_se(logs).mean);
  }
  return least_squares_slope(x, y);
}

void write_raw_csv(const ExperimentReport& report, std::ostream& os) {
  os << "family,kind_params,n,regime,c,p,seed,replicate,tau,z_total,z_phi,root_cluster,"
        "n_mutants,retries\n";
  const std::string regime = to_string(report.schedule.regime);
  const std::string c_field =
      report.schedule.regime == Regime::Supercritical ? fmt(report.schedule.c) : "";
  for (const auto& per_n : report.rows) {
    for (const RawRow& r : per_n) {
      if (r.failed) continue;
      os << report.family_label << ",\"" << report.params_label << "\"," << fmt_n(r.n) << ","
         << regime << "," << c_field << "," << fmt(r.p) << "," << r.seed << "," << r.replicate
         << "," << fmt(r.tau) << "," << r.z_total << "," << fmt(r.z_phi) << ","
         << r.root_cluster << "," << r.n_mutants << "," << r.retries << "\n";
    }
  }
}

void write_aggregate_csv(const ExperimentReport& report, std::ostream& os) {
  // Aggregates must be reproducible from the raw rows.
  for (std::size_t i = 0; i < report.aggregates.size(); ++i) {
    const AggregateRow& a = report.aggregates[i];
    const AggregateRow check = aggregate_from_rows(report.rows[i], a.n, a.p,
                                                   a.predicted_exponent, a.predicted_frac);
    if (check.frac.mean != a.frac.mean || check.frac.se != a.frac.se ||
        check.scaled.mean != a.scaled.mean || check.ztotal_over_n.mean != a.ztotal_over_n.mean)
      throw std::logic_error("write_aggregate_csv: aggregates do not match raw rows");
  }
  os << "n,p,mean_frac,se_frac,mean_scaled,se_scaled,mean_ztotal_over_n,se,"
        "mean_tau_over_logn,se,predicted_frac,predicted_exponent\n";
  for (const AggregateRow& a : report.aggregates) {
    os << fmt_n(a.n) << "," << fmt(a.p) << "," << fmt(a.frac.mean) << "," << fmt(a.frac.se)
       << "," << fmt(a.scaled.mean) << "," << fmt(a.scaled.se) << ","
       << fmt(a.ztotal_over_n.mean) << "," << fmt(a.ztotal_over_n.se) << ","
       << fmt(a.tau_over_logn.mean) << "," << fmt(a.tau_over_logn.se) << ","
       << fmt(a.predicted_frac) << "," << fmt(a.predicted_exponent) << "\n";
  }
}

void write_failures_csv(const ExperimentReport& report, std::ostream& os) {
  os << "n,replicate,seed,error\n";
  for (const auto& per_n : report.rows) {
    for (const RawRow& r : per_n) {
      if (!r.failed) continue;
      std::string msg = r.error;
      for (char& ch : msg)
        if (ch == ',' || ch == '\n') ch = ';';
      os << fmt_n(r.n) << "," << r.replicate << "," << r.seed << "," << msg << "\n";
    }
  }
}

}  // namespace cmj
