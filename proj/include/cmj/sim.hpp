#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cmj/families.hpp"
#include "cmj/rng.hpp"

namespace cmj {

struct CapExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonTerminating : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotRecorded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class SimMode { Streaming, Full };

struct SimOptions {
  SimMode mode = SimMode::Streaming;
  /// When set, the run stops at this clock time instead of at the weight
  /// threshold (renewal-oracle support); the threshold n is then ignored.
  std::optional<double> stop_at_time;
  std::uint64_t node_cap = 100'000'000;
  std::int64_t retry_limit = 100'000;
  bool record_cluster_sizes = false;
  /// Full mode only: log every applied weight change as (time, delta).
  bool record_weight_log = false;
};

struct TreeNode {
  std::uint32_t parent;  // kNoParent for the root
  double sigma;
  bool is_clone;
  bool in_root_cluster;
};

inline constexpr std::uint32_t kNoParent = 0xFFFFFFFFu;

struct SimOutcome {
  double tau = 0.0;
  std::int64_t z_total = 0;
  double z_phi = 0.0;
  std::int64_t root_cluster = 0;
  std::int64_t n_mutants = 0;
  std::int64_t retries = 0;
  std::optional<std::vector<TreeNode>> tree;
  std::optional<std::vector<std::int64_t>> cluster_sizes;  // descending
  std::optional<std::vector<std::pair<double, double>>> weight_log;
};

/// Event-driven growth of one family tree with dynamic percolation marking,
/// stopped at the first time the total weight reaches n (or at the fixed
/// clock time from the options). Events sharing a timestamp are drained
/// before the stop check, so simultaneous twins are never split.
///
/// Homogeneous families restart with fresh randomness when the population
/// dies out before the threshold (conditioning on survival); the restart
/// count is reported in `retries`.
SimOutcome simulate(const FamilyModel& family, double n, double p, Rng& rng,
                    const SimOptions& options = {});

/// root_cluster / n: the root-cluster size normalized by the weight
/// threshold (not by the vertex count).
double root_cluster_fraction(const SimOutcome& outcome, double n);

enum class TreeFormat { Csv };

/// Edge list `child_id,parent_id,sigma,is_clone`, ids in birth order from 0.
/// Throws NotRecorded unless the run used full-tree mode.
std::string export_tree(const SimOutcome& outcome, TreeFormat format = TreeFormat::Csv);

}  // namespace cmj
