#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gsw/io.hpp"

namespace gsw {

/// One oracle comparison inside a suite.
struct CheckResult {
  std::string name;
  bool passed = true;
  double max_error = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct SuiteReport {
  std::string suite;
  std::vector<CheckResult> checks;
  /// Row-level data for the printed table.
  Json table = Json::array();

  bool passed() const;
};

/// srswor, identities, downdate, enumeration, qv, concentration, coupling.
const std::vector<std::string>& suite_names();

/// Runs one suite; "all" is expanded by the caller. Unknown names raise
/// ParameterError.
SuiteReport run_suite(const std::string& name, std::uint64_t seed);

Json to_json(const SuiteReport& report);

}  // namespace gsw
