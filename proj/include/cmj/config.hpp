#pragma once

#include <map>
#include <stdexcept>
#include <string>

#include "cmj/experiments.hpp"

namespace cmj {

struct ConfigError : std::runtime_error {
  int line;  // 0 when the error is not tied to a specific line
  ConfigError(int line_, const std::string& msg)
      : std::runtime_error(msg), line(line_) {}
};

/// Builds a family from config-style keys. `kind` is one of general-pa,
/// mary-search, median-bst, fragmentation, homogeneous; `keys` carries the
/// kind-specific entries (weights, beta, rho, m, ell, b, dislocation,
/// lifetime). Rejects unknown or missing keys via InvalidParams.
FamilyModel family_from_keys(const std::string& kind,
                             const std::map<std::string, std::string>& keys);

/// Parses the sectioned key-value experiment description:
///
///   [family]
///   kind = general-pa
///   weights = 1;tail=const
///
///   [schedule]
///   regime = super
///   c = 1.0
///
///   [experiment]
///   n_values = 10000,100000
///   replicates = 200
///   master_seed = 42
///   mode = streaming
///   outputs = out
///   parallelism = 0
///
/// Unknown sections/keys and constraint violations raise ConfigError with
/// the offending line number.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

}  // namespace cmj
