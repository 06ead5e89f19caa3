#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cmj/analysis.hpp"
#include "cmj/families.hpp"
#include "cmj/sim.hpp"
#include "cmj/stats.hpp"

namespace cmj {

struct InsufficientData : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  explicit ExperimentConfig(FamilyModel fam) : family(std::move(fam)) {}

  FamilyModel family;
  std::string family_label;  // family kind, for the raw CSV
  std::string params_label;  // parameter summary, for the raw CSV
  RegimeSchedule schedule;
  std::vector<double> n_values;  // strictly increasing weight thresholds
  int replicates = 1;
  std::uint64_t master_seed = 1;
  SimMode mode = SimMode::Streaming;
  std::string outputs_dir = "out";
  int parallelism = 0;  // 0 = hardware concurrency
};

struct RawRow {
  double n = 0.0;
  double p = 1.0;
  std::uint64_t seed = 0;
  int replicate = 0;
  double tau = 0.0;
  std::int64_t z_total = 0;
  double z_phi = 0.0;
  std::int64_t root_cluster = 0;
  std::int64_t n_mutants = 0;
  std::int64_t retries = 0;
  bool failed = false;
  std::string error;
};

struct AggregateRow {
  double n = 0.0;
  double p = 1.0;
  MeanSe frac;           // root_cluster / n
  MeanSe scaled;         // root_cluster / n^(alpha_p/alpha)
  MeanSe ztotal_over_n;  // z_total / n
  MeanSe tau_over_logn;  // tau / ln n
  double predicted_frac = 0.0;
  double predicted_exponent = 0.0;
};

struct ExperimentReport {
  std::string family_label;
  std::string params_label;
  RegimeSchedule schedule;
  std::vector<double> n_values;
  std::vector<std::vector<RawRow>> rows;  // [n_index][replicate]
  std::vector<AggregateRow> aggregates;
  /// Log-log slope of the root-cluster size against n; filled for fixed-p
  /// studies covering at least three thresholds.
  std::optional<double> slope;
  std::int64_t failure_count = 0;
  std::int64_t total_count = 0;

  /// More than 1% of replicates failed; callers should abort the study.
  bool excessive_failures() const { return failure_count * 100 > total_count; }
};

/// Runs R replicates per threshold on a bounded worker pool. Replicate seeds
/// derive from (master_seed, n-index, replicate-index), so the report is
/// identical for any worker count. Engine errors are recorded per replicate
/// without aborting the study.
ExperimentReport run_experiment(const ExperimentConfig& config);

/// Least-squares slope of the per-n mean of ln(root_cluster) against ln n;
/// estimates alpha_p/alpha. Needs >= 3 thresholds run at one fixed p.
double slope_fit(const ExperimentReport& report);

/// Raw CSV: family,kind_params,n,regime,c,p,seed,replicate,tau,z_total,
/// z_phi,root_cluster,n_mutants,retries. Failed replicates go to the
/// failures writer instead.
void write_raw_csv(const ExperimentReport& report, std::ostream& os);

/// Aggregate CSV: n,p,mean_frac,se_frac,mean_scaled,se_scaled,
/// mean_ztotal_over_n,se,mean_tau_over_logn,se,predicted_frac,
/// predicted_exponent. Recomputes every aggregate from the raw rows and
/// refuses to write on mismatch.
void write_aggregate_csv(const ExperimentReport& report, std::ostream& os);

/// One line per failed replicate: n,replicate,seed,error.
void write_failures_csv(const ExperimentReport& report, std::ostream& os);

}  // namespace cmj
