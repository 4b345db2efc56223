#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace gradtd::verify {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct SuiteOptions {
  /// Skips criterion 9 (the five-minute queueing sweep).
  bool quick = false;
  /// Criteria to run; empty runs all (subject to `quick`).
  std::vector<int> only;
  std::uint64_t seed = 20240917;
  /// Directory for the determinism criterion's output files.
  std::string scratch_dir = "verify_scratch";
  std::function<void(const CriterionResult&)> on_result;
};

/// "[PASS] 3 variance reduction ...: detail (1.2 s)"
std::string format_result(const CriterionResult& result);

std::vector<CriterionResult> run_acceptance(const SuiteOptions& options);

bool all_passed(const std::vector<CriterionResult>& results);

}  // namespace gradtd::verify
