#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dfl {

struct LemmaResult {
  std::string name;
  bool passed = false;
  double max_deviation = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct VerifyOptions {
  /// Test hook: added to w_01 of every mixing matrix checked by the
  /// double-stochasticity oracle (0 leaves them untouched).
  double mixing_perturbation = 0.0;
  /// Brute-force horizon for the kappa_psi bound.
  std::size_t kappa_t_max = 10000;
};

/// Lemma-oracle suite on built-in fixtures: mixing double stochasticity,
/// local-update closed form (incl. lambda = 0), bounded local update, the
/// mean / auxiliary / virtual sequence recursions, and the kappa_psi bound.
std::vector<LemmaResult> run_verification(const VerifyOptions& opts = {});

bool all_passed(const std::vector<LemmaResult>& results);
void print_verification(std::ostream& out, const std::vector<LemmaResult>& results);

}  // namespace dfl
