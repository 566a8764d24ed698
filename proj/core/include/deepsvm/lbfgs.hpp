#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace deepsvm {

struct LbfgsOptions {
  std::size_t memory = 20;
  std::size_t max_iterations = 5000;
  double c1 = 1e-4;
  double c2 = 0.9;
  /// Stop when |f_k - f_{k+1}| <= rel_tolerance * max(|f_k|, 1e-300).
  double rel_tolerance = 1e-12;
  /// Stop when ||g|| <= gradient_tolerance (0 disables).
  double gradient_tolerance = 0.0;
  std::size_t max_line_search_evaluations = 30;
  /// Steepest-descent step length used when the line search fails.
  double fallback_step = 1e-6;
  int max_consecutive_failures = 5;

  void validate() const;
};

/// Returns f(x) and writes the gradient into `grad`.
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct LbfgsIteration {
  std::size_t iteration = 0;  // 1-based
  double f = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
  bool fallback = false;  // steepest-descent fallback, not a Wolfe step
  std::size_t evaluations = 0;
};

enum class LbfgsStatus { kIterationCap, kRelativeDecrease, kGradientTolerance, kLineSearchFailure };

struct LbfgsResult {
  LbfgsStatus status = LbfgsStatus::kIterationCap;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  double f = 0.0;
  double grad_norm = 0.0;
};

/// Limited-memory BFGS (two-loop recursion) with a strong-Wolfe line search.
/// `x` is updated in place to the final iterate.
LbfgsResult minimize_lbfgs(const Objective& objective, std::vector<double>& x,
                           const LbfgsOptions& options = {},
                           const std::function<void(const LbfgsIteration&)>& on_iteration = {});

}  // namespace deepsvm
