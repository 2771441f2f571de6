#pragma once

#include <string>
#include <vector>

#include "c2f/verify/gradcheck.hpp"

namespace c2f::verify {

struct SuiteResult {
  std::string name;
  bool passed = true;
  std::vector<std::string> lines;  // one per check, prefixed ok/FAIL
  double seconds = 0;

  void check(bool ok, const std::string& what);
};

/// gradcheck, conv-oracle, edt-oracle, metric-oracle, loss-identities.
const std::vector<std::string>& suite_names();

/// Throws ContractError for an unknown name.
SuiteResult run_suite(const std::string& name);

// Pieces of the gradient suite, exposed for finer-grained tests.
std::vector<GradcheckReport> gradcheck_ops();
std::vector<GradcheckReport> gradcheck_blocks();
std::vector<GradcheckReport> gradcheck_losses();
std::vector<GradcheckReport> gradcheck_networks();

}  // namespace c2f::verify
