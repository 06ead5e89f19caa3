// Acceptance runner: executes the verification criteria and prints one
// pass/fail line per criterion. Exit code 0 iff everything selected passed.
//
//   cmj_acceptance [--tier fast|full] [--criterion N] [--threads K] [--seed S]

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <iostream>
#include <string>
#include <vector>

#include "cmj/verify.hpp"

int main(int argc, char** argv) {
  std::string tier = "full";
  int criterion = 0;
  int threads = 0;
  std::uint64_t seed = cmj::kDefaultVerifySeed;

  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    auto next = [&]() -> const char* {
      if (i + 1 >= argc) {
        std::fprintf(stderr, "missing value for %s\n", arg.c_str());
        std::exit(1);
      }
      return argv[++i];
    };
    if (arg == "--tier") {
      tier = next();
    } else if (arg == "--criterion") {
      criterion = std::atoi(next());
    } else if (arg == "--threads") {
      threads = std::atoi(next());
    } else if (arg == "--seed") {
      seed = std::strtoull(next(), nullptr, 10);
    } else {
      std::fprintf(stderr, "unknown argument '%s'\n", arg.c_str());
      return 1;
    }
  }

  std::vector<int> ids;
  if (criterion > 0) {
    ids = {criterion};
  } else {
    try {
      ids = cmj::criteria_for_tier(tier);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "%s\n", e.what());
      return 1;
    }
  }

  const auto results = cmj::run_criteria(ids, threads, seed);
  const bool all = cmj::print_results(results, std::cout);
  return all ? 0 : 1;
}
