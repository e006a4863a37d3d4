#pragma once

// Counting-argument generalization bound for K-box classifiers whose
// boundaries are drawn from finite per-feature grids.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "boxdraw/core.hpp"
#include "boxdraw/exactboxes.hpp"

namespace boxdraw {

struct BoundInputs {
  std::size_t K = 1;
  std::vector<std::size_t> M;  // grid size per feature, each >= 2
  std::size_t m = 1;
  double delta = 0.05;

  void validate() const {
    if (K < 1) throw InputError("K must be at least 1");
    if (M.empty()) throw InputError("at least one grid size is required");
    for (auto Mj : M)
      if (Mj < 2) throw InputError("every grid size must be at least 2");
    if (m < 1) throw InputError("m must be at least 1");
    if (!(delta > 0.0 && delta <= 1.0)) throw InputError("delta must be in (0,1]");
  }
};

/// log K! as a sum of logs.
inline double log_factorial(std::size_t K) {
  double s = 0.0;
  for (std::size_t i = 2; i <= K; ++i) s += std::log(static_cast<double>(i));
  return s;
}

/// K * sum_j log(M_j (M_j - 1) / 2) - log K! + log(1/delta), before clamping.
inline double bound_log_term(const BoundInputs& in) {
  in.validate();
  double per_box = 0.0;
  for (auto Mj : in.M) {
    const double a = static_cast<double>(Mj);
    per_box += std::log(a * (a - 1.0) / 2.0);
  }
  return static_cast<double>(in.K) * per_box - log_factorial(in.K) - std::log(in.delta);
}

struct BoundResult {
  double value = 0.0;
  std::vector<std::string> warnings;
};

inline BoundResult generalization_bound_detailed(const BoundInputs& in) {
  BoundResult r;
  double term = bound_log_term(in);
  if (term < 0.0) {
    r.warnings.push_back("log term " + detail::format_exact(term) + " is negative; clamped to 0");
    term = 0.0;
  }
  r.value = std::sqrt(term / (2.0 * static_cast<double>(in.m)));
  return r;
}

inline double generalization_bound(const BoundInputs& in) { return generalization_bound_detailed(in).value; }

/// Unregularized weighted accuracy, as a count (not averaged).
inline double empirical_risk(const BoxModel& model, const Dataset& data, double c_I) {
  return objective_value(model, data, c_I, 0.0);
}

}  // namespace boxdraw
