#pragma once

// Battery of analytic inequalities behind the MSE bound, checked exactly
// by enumeration for every n up to a limit and every p on a grid.

#include <optional>
#include <string>
#include <vector>

namespace selfcons {

struct InvariantCheck {
  std::string name;
  std::string relation;  // what `worst` is compared against, e.g. "<= 1e-12"
  double worst = 0;      // largest residual, or smallest slack
  int witness_n = 0;
  std::optional<double> witness_p;
  bool passed = true;
  long long cases = 0;
};

struct InvariantReport {
  int max_n = 0;
  double grid_step = 0;
  std::vector<InvariantCheck> checks;

  bool all_passed() const;
};

/// grid_step must divide 1 into an even number of steps (so p = 1/2 is on
/// the grid), e.g. 0.01, 0.05, 0.1.
InvariantReport run_invariant_battery(int max_n, double grid_step = 0.01);

}  // namespace selfcons
