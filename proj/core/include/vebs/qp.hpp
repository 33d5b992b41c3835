#pragma once

#include <vector>

namespace vebs::qp {

/// Minimize sum(x_k^2) subject to A x = b and lower <= x <= upper.
struct Problem {
  int n = 0;                  // variables
  int m = 0;                  // equality constraints
  std::vector<double> a;      // row-major m x n
  std::vector<double> b;      // m
  std::vector<double> lower;  // n
  std::vector<double> upper;  // n
};

struct Solution {
  bool feasible = false;
  std::vector<double> x;  // optimum if feasible, else best-effort point
  double objective = 0;
  double residual_inf = 0;  // max_j |(A x - b)_j|
  int iterations = 0;

  /// Equality multipliers: at the optimum 2 x = A^T lambda + bound forces.
  std::vector<double> eq_multipliers;

  /// Per-constraint range of A x achievable inside the box, for
  /// infeasibility reporting (a necessary bound; exact when m == 1).
  std::vector<double> achievable_lo;
  std::vector<double> achievable_hi;
};

/// Two-phase solver: a bounded-variable least-squares phase lands on the
/// constraint set (exactly, for consistent systems), then a primal active-set
/// phase walks bound constraints to the optimum. Never throws on infeasible
/// input; inspect `feasible`.
Solution solve(const Problem& problem, double tol = 1e-9, int max_iterations = 200);

}  // namespace vebs::qp
