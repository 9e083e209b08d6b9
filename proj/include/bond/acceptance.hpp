#pragma once

// End-to-end acceptance checks. Each criterion runs a fixed, seeded
// experiment and compares against pinned tolerances.

#include <string>
#include <vector>

namespace bond {

struct CriterionResult {
  int id = 0;
  std::string title;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Criteria 1 to 12; criterion 13 (timing the CLI verify run) needs the
/// executable and lives with the acceptance test.
CriterionResult run_criterion(int id);

/// The criteria executed by `bond_lab verify`.
const std::vector<int>& verify_criteria();

/// Extra oracle and property checks printed by `bond_lab verify`.
std::vector<CriterionResult> run_invariant_checks();

/// "PASS  3  Composition ... (0.01 s)" style line.
std::string format_result(const CriterionResult& result);

}  // namespace bond
