#pragma once

#include "occplan/types.hpp"

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace occplan::acceptance {

struct Options {
  double gradient_scale = 1.0;  // != 1 corrupts the analytic gradient (negative control)
  unsigned threads = 0;         // 0 = hardware concurrency
};

struct CriterionResult {
  int id = 0;
  std::string title;
  bool pass = false;
  double seconds = 0.0;
  double budget = 0.0;  // runtime limit in seconds, 0 = none
  std::string detail;
};

CriterionResult limited_visibility_cruise(const Options& opt);
CriterionResult sensor_range_monotonicity(const Options& opt);
CriterionResult adversarial_noise_free(const Options& opt);
CriterionResult adversarial_noisy(const Options& opt);
CriterionResult gradient_check(const Options& opt);
CriterionResult variance_propagation(const Options& opt);
CriterionResult pinning(const Options& opt);
CriterionResult visibility_oracle(const Options& opt);
CriterionResult no_return_surface(const Options& opt);
CriterionResult idm_equilibria(const Options& opt);

/// The four adversarial scenarios; the hidden-spawn case at several spawn times.
std::vector<std::pair<std::string, WorldState>> adversarial_suite();

std::string format(const CriterionResult& r);

/// Runs every criterion, printing one line each to `out`.
std::vector<CriterionResult> run_all(const Options& opt, std::ostream& out);

bool all_passed(const std::vector<CriterionResult>& results);

}  // namespace occplan::acceptance
