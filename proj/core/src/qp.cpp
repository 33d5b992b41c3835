#include "vebs/qp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace vebs::qp {

namespace {

constexpr double kFeasTol = 1e-8;  // accepted equality residual after phase 1

void validate(const Problem& p) {
  if (p.n < 1 || p.m < 1) throw std::invalid_argument("empty problem");
  if (p.a.size() != static_cast<std::size_t>(p.n) * static_cast<std::size_t>(p.m) ||
      p.b.size() != static_cast<std::size_t>(p.m) ||
      p.lower.size() != static_cast<std::size_t>(p.n) ||
      p.upper.size() != static_cast<std::size_t>(p.n)) {
    throw std::invalid_argument("inconsistent problem dimensions");
  }
  for (int k = 0; k < p.n; ++k) {
    if (!(p.lower[static_cast<std::size_t>(k)] <= p.upper[static_cast<std::size_t>(k)])) {
      throw std::invalid_argument("lower bound exceeds upper bound");
    }
  }
}

Eigen::VectorXd clamp(const Eigen::VectorXd& x, const Eigen::VectorXd& lo,
                      const Eigen::VectorXd& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

// Phase 1: bounded-variable least squares, min ||A x - b||^2 over the box.
// Primal active set with exact least-squares solves on the free block; a
// feasible problem has a zero-residual optimum, so this lands on the
// constraint set to factorization precision regardless of column scaling.
Eigen::VectorXd feasible_point(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                               const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  const int n = static_cast<int>(A.cols());
  Eigen::VectorXd x = clamp(0.5 * (lo + hi), lo, hi);
  const double span = (hi - lo).lpNorm<Eigen::Infinity>();
  const double bound_tol = 1e-12 * std::max(1.0, span);
  std::vector<int> at_bound(static_cast<std::size_t>(n), 0);  // -1 lower, +1 upper, 0 free
  for (int k = 0; k < n; ++k) {
    if (hi(k) - lo(k) <= bound_tol) at_bound[static_cast<std::size_t>(k)] = -1;
  }

  for (int round = 0; round < 50 * (n + 1); ++round) {
    std::vector<int> free_idx;
    for (int k = 0; k < n; ++k) {
      if (at_bound[static_cast<std::size_t>(k)] == 0) free_idx.push_back(k);
    }
    const int nf = static_cast<int>(free_idx.size());

    Eigen::VectorXd x_target = x;
    if (nf > 0) {
      Eigen::VectorXd t = b;
      for (int k = 0; k < n; ++k) {
        if (at_bound[static_cast<std::size_t>(k)] != 0) t -= A.col(k) * x(k);
      }
      Eigen::MatrixXd Af(A.rows(), nf);
      for (int i = 0; i < nf; ++i) Af.col(i) = A.col(free_idx[static_cast<std::size_t>(i)]);
      const Eigen::VectorXd xf = Af.completeOrthogonalDecomposition().solve(t);
      for (int i = 0; i < nf; ++i) x_target(free_idx[static_cast<std::size_t>(i)]) = xf(i);
    }

    // Longest box-feasible step toward the free-block optimum.
    double alpha = 1.0;
    int blocker = -1, blocker_side = 0;
    for (int i = 0; i < nf; ++i) {
      const int k = free_idx[static_cast<std::size_t>(i)];
      const double d = x_target(k) - x(k);
      if (d > bound_tol && x_target(k) > hi(k)) {
        const double a = (hi(k) - x(k)) / d;
        if (a < alpha) {
          alpha = a;
          blocker = k;
          blocker_side = 1;
        }
      } else if (d < -bound_tol && x_target(k) < lo(k)) {
        const double a = (lo(k) - x(k)) / d;
        if (a < alpha) {
          alpha = a;
          blocker = k;
          blocker_side = -1;
        }
      }
    }
    if (blocker >= 0) {
      x = clamp(x + alpha * (x_target - x), lo, hi);
      at_bound[static_cast<std::size_t>(blocker)] = blocker_side;
      x(blocker) = blocker_side > 0 ? hi(blocker) : lo(blocker);
      continue;
    }
    x = clamp(x_target, lo, hi);

    // Release the pinned variable whose residual gradient points inward; at
    // the constrained optimum none does, and for a feasible system the
    // residual itself is already zero.
    const Eigen::VectorXd g = A.transpose() * (A * x - b);
    const double g_tol = 1e-12 * std::max(1.0, g.lpNorm<Eigen::Infinity>());
    int release = -1;
    double worst = g_tol;
    for (int k = 0; k < n; ++k) {
      const int side = at_bound[static_cast<std::size_t>(k)];
      if (side == 0 || hi(k) - lo(k) <= bound_tol) continue;
      const double inward = side < 0 ? -g(k) : g(k);
      if (inward > worst) {
        worst = inward;
        release = k;
      }
    }
    if (release < 0) break;
    at_bound[static_cast<std::size_t>(release)] = 0;
  }
  return x;
}

}  // namespace

Solution solve(const Problem& problem, double tol, int max_iterations) {
  validate(problem);
  const int n = problem.n, m = problem.m;
  Eigen::MatrixXd A(m, n);
  for (int j = 0; j < m; ++j) {
    for (int k = 0; k < n; ++k) {
      A(j, k) = problem.a[static_cast<std::size_t>(j) * static_cast<std::size_t>(n) +
                          static_cast<std::size_t>(k)];
    }
  }
  Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(problem.b.data(), m);
  Eigen::VectorXd lo = Eigen::Map<const Eigen::VectorXd>(problem.lower.data(), n);
  Eigen::VectorXd hi = Eigen::Map<const Eigen::VectorXd>(problem.upper.data(), n);

  Solution sol;
  sol.achievable_lo.resize(static_cast<std::size_t>(m));
  sol.achievable_hi.resize(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    double jlo = 0, jhi = 0;
    for (int k = 0; k < n; ++k) {
      jlo += std::min(A(j, k) * lo(k), A(j, k) * hi(k));
      jhi += std::max(A(j, k) * lo(k), A(j, k) * hi(k));
    }
    sol.achievable_lo[static_cast<std::size_t>(j)] = jlo;
    sol.achievable_hi[static_cast<std::size_t>(j)] = jhi;
  }

  Eigen::VectorXd x = feasible_point(A, b, lo, hi);
  sol.residual_inf = (A * x - b).lpNorm<Eigen::Infinity>();
  const double scale = std::max(1.0, b.lpNorm<Eigen::Infinity>());
  if (sol.residual_inf > kFeasTol * scale) {
    sol.feasible = false;
    sol.x.assign(x.data(), x.data() + n);
    sol.objective = x.squaredNorm();
    return sol;
  }

  // Phase 2: primal active set over the bound constraints. The working set
  // holds variables pinned at a bound; each round solves the equality QP on
  // the free block, steps to the first blocking bound, and releases pinned
  // variables whose multiplier has the wrong sign.
  std::vector<int> at_bound(static_cast<std::size_t>(n), 0);  // -1 lower, +1 upper, 0 free
  const double span = (hi - lo).lpNorm<Eigen::Infinity>();
  const double bound_tol = 1e-12 * std::max(1.0, span);
  for (int k = 0; k < n; ++k) {
    if (x(k) <= lo(k) + bound_tol) {
      at_bound[static_cast<std::size_t>(k)] = -1;
      x(k) = lo(k);
    } else if (x(k) >= hi(k) - bound_tol) {
      at_bound[static_cast<std::size_t>(k)] = 1;
      x(k) = hi(k);
    }
  }

  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(m);
  int it = 0;
  for (; it < max_iterations; ++it) {
    std::vector<int> free_idx;
    for (int k = 0; k < n; ++k) {
      if (at_bound[static_cast<std::size_t>(k)] == 0) free_idx.push_back(k);
    }
    const int nf = static_cast<int>(free_idx.size());

    // Equality QP on the free block: min sum x_F^2 s.t. A_F x_F = t.
    Eigen::VectorXd t = b;
    for (int k = 0; k < n; ++k) {
      if (at_bound[static_cast<std::size_t>(k)] != 0) t -= A.col(k) * x(k);
    }
    Eigen::VectorXd x_target = x;
    if (nf > 0) {
      Eigen::MatrixXd Af(m, nf);
      for (int i = 0; i < nf; ++i) Af.col(i) = A.col(free_idx[static_cast<std::size_t>(i)]);
      const Eigen::MatrixXd gram = Af * Af.transpose();
      lambda = 2.0 * gram.completeOrthogonalDecomposition().solve(t);
      const Eigen::VectorXd xf = 0.5 * Af.transpose() * lambda;
      for (int i = 0; i < nf; ++i) x_target(free_idx[static_cast<std::size_t>(i)]) = xf(i);
    } else {
      lambda = 2.0 * (A * A.transpose())
                         .completeOrthogonalDecomposition()
                         .solve(A * x);  // least-squares multipliers, all pinned
    }

    // Longest box-feasible step toward the target.
    double alpha = 1.0;
    int blocker = -1, blocker_side = 0;
    for (int i = 0; i < nf; ++i) {
      const int k = free_idx[static_cast<std::size_t>(i)];
      const double d = x_target(k) - x(k);
      if (d > bound_tol && x_target(k) > hi(k)) {
        const double a = (hi(k) - x(k)) / d;
        if (a < alpha) {
          alpha = a;
          blocker = k;
          blocker_side = 1;
        }
      } else if (d < -bound_tol && x_target(k) < lo(k)) {
        const double a = (lo(k) - x(k)) / d;
        if (a < alpha) {
          alpha = a;
          blocker = k;
          blocker_side = -1;
        }
      }
    }

    if (blocker >= 0) {
      x += alpha * (x_target - x);
      at_bound[static_cast<std::size_t>(blocker)] = blocker_side;
      x(blocker) = blocker_side > 0 ? hi(blocker) : lo(blocker);
      continue;
    }

    x = x_target;
    // Bound multipliers: g = 2x - A^T lambda must push into the feasible
    // side at every pinned variable, otherwise release the worst offender.
    const Eigen::VectorXd g = 2.0 * x - A.transpose() * lambda;
    int release = -1;
    double worst = tol;
    for (int k = 0; k < n; ++k) {
      const int side = at_bound[static_cast<std::size_t>(k)];
      if (side == 0 || lo(k) == hi(k)) continue;
      const double violation = side < 0 ? -g(k) : g(k);
      if (violation > worst) {
        worst = violation;
        release = k;
      }
    }
    if (release < 0) break;  // KKT satisfied
    at_bound[static_cast<std::size_t>(release)] = 0;
  }

  sol.feasible = true;
  sol.iterations = it;
  sol.x.assign(x.data(), x.data() + n);
  sol.objective = x.squaredNorm();
  sol.residual_inf = (A * x - b).lpNorm<Eigen::Infinity>();
  sol.eq_multipliers.assign(lambda.data(), lambda.data() + m);
  return sol;
}

}  // namespace vebs::qp
