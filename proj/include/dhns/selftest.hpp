#pragma once

#include <string>
#include <vector>

namespace dhns {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Quick invariant suite behind `dhns selftest`: schedule and reconstruction,
// margins and weights, gradient checks, ranking, losses, checkpoint round trip
// and stream determinism. Takes a few seconds.
std::vector<CheckResult> run_selftest();

}  // namespace dhns
