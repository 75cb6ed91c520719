#pragma once

#include <string>
#include <vector>

#include "abmkit/gradcheck.hpp"

namespace abmkit {

/// One named composite checked against central finite differences over a
/// number of random seeds.
struct GradCheckCase {
  std::string name;
  std::size_t seeds = 0;
  double tolerance = 0.0;
  double max_error = 0.0;
  bool passed = false;
};

/// Every check the suite knows: primitive ops at 1e-6, ABM composites and
/// the 3-layer top stack at 1e-4.
std::vector<std::string> gradcheck_suite_names();

/// Runs one named check over `seeds` random configurations. With
/// corrupt_backward set, a deliberately wrong backward rule is spliced into
/// the computation; the check must then fail (negative control for the
/// harness itself).
GradCheckCase run_gradcheck_case(const std::string& name, std::size_t seeds, double eps,
                                 bool corrupt_backward = false);

}  // namespace abmkit
