#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace cmj {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

inline constexpr std::uint64_t kDefaultVerifySeed = 20260810ull;

/// Criterion ids for a tier: "fast" covers the deterministic checks 1-4,
/// "full" additionally runs the statistical suite 5-11.
std::vector<int> criteria_for_tier(const std::string& tier);

CriterionResult run_criterion(int id, int threads, std::uint64_t master_seed);

std::vector<CriterionResult> run_criteria(const std::vector<int>& ids, int threads,
                                          std::uint64_t master_seed);

/// Prints one pass/fail line per criterion; returns true when all passed.
bool print_results(const std::vector<CriterionResult>& results, std::ostream& os);

}  // namespace cmj
