#pragma once

#include <stdexcept>
#include <vector>

#include "cmj/families.hpp"

namespace cmj {

struct GridError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RenewalTable {
  double h = 0.0;
  std::vector<double> t;
  std::vector<double> mean;  // E[Z^phi(t)] for the clonal process at parameter p

  /// Value at a clock time that must sit on the grid (within 1e-9).
  double at(double time) const;
};

/// Deterministic mean of the thinned counted process via the renewal
/// representation m = g + (p mu) * m, solved by forward recursion on a
/// uniform grid of step h over [0, T]. Kernel mass over (t_{j-1}, t_j] is
/// assigned to the right endpoint, so the discretization error is O(h).
/// h must divide T; the grid is capped at 200000 points.
RenewalTable mean_count(const FamilyModel& family, double p, double T, double h);

}  // namespace cmj
