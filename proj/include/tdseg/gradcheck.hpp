#ifndef TDSEG_GRADCHECK_HPP
#define TDSEG_GRADCHECK_HPP

#include <string>
#include <vector>

#include "tdseg/tensor.hpp"

namespace tdseg {

// Central finite-difference verification of every analytic backward pass,
// per op and end-to-end through a tiny dual-branch network with the
// composite loss. Probes stay clear of activation kinks: relu probes keep
// |x| > 1e-2, threshold margins are constructed >= 0.05, and an end-to-end
// probe is discarded if any activation mask flips between the two
// perturbed evaluations.

struct GradCheckOptions {
  std::uint32_t seed = 7;
  double h = 1e-3;
  // Test hook: deliberately corrupts one analytic gradient so the harness
  // itself can be shown to catch bad gradients.
  bool perturb = false;
};

struct GradCheckEntry {
  std::string component;
  double worst_rel = 0.0;
  double tol = 1e-3;
  int probes = 0;
  bool pass = false;
  std::string worst_at;  // tensor/index of the worst probe
};

std::vector<GradCheckEntry> run_gradcheck(const GradCheckOptions& opts = {});
bool all_pass(const std::vector<GradCheckEntry>& entries);
std::string format_gradcheck(const std::vector<GradCheckEntry>& entries);

}  // namespace tdseg

#endif
