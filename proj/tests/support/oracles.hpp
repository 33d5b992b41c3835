#pragma once

// Independent reference implementations used to cross-check the library.
// Everything here is deliberately computed by a different route than the
// production code (numeric network solves, golden-section maximization,
// exhaustive active-set enumeration), so a shared algebra bug cannot hide.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

namespace oracle {

/// Gaussian elimination with partial pivoting; returns false on a (near-)
/// singular system. A is row-major n x n, b is overwritten with the solution.
inline bool solve_linear(int n, std::vector<double> a, std::vector<double>& b) {
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::fabs(a[static_cast<std::size_t>(r) * n + col]) >
          std::fabs(a[static_cast<std::size_t>(pivot) * n + col])) {
        pivot = r;
      }
    }
    if (std::fabs(a[static_cast<std::size_t>(pivot) * n + col]) < 1e-13) return false;
    if (pivot != col) {
      for (int c = 0; c < n; ++c) {
        std::swap(a[static_cast<std::size_t>(pivot) * n + c],
                  a[static_cast<std::size_t>(col) * n + c]);
      }
      std::swap(b[static_cast<std::size_t>(pivot)], b[static_cast<std::size_t>(col)]);
    }
    for (int r = col + 1; r < n; ++r) {
      const double f = a[static_cast<std::size_t>(r) * n + col] /
                       a[static_cast<std::size_t>(col) * n + col];
      for (int c = col; c < n; ++c) {
        a[static_cast<std::size_t>(r) * n + c] -= f * a[static_cast<std::size_t>(col) * n + c];
      }
      b[static_cast<std::size_t>(r)] -= f * b[static_cast<std::size_t>(col)];
    }
  }
  for (int r = n - 1; r >= 0; --r) {
    double s = b[static_cast<std::size_t>(r)];
    for (int c = r + 1; c < n; ++c) {
      s -= a[static_cast<std::size_t>(r) * n + c] * b[static_cast<std::size_t>(c)];
    }
    b[static_cast<std::size_t>(r)] = s / a[static_cast<std::size_t>(r) * n + r];
  }
  return true;
}

/// Stiffness of the band's spring chain solved as an explicit 3-node linear
/// system (ground - k_bottom - n1 - k_mid - n2 - k_top - load point) instead
/// of the series-composition formula. k_mid is the full mid-section
/// stiffness: the side pair 2*k_side alone, or 2*k_side + k_clutch with the
/// clutch modeled as a parallel spring (1e12 N/mm stands in for "rigid").
inline double band_network_stiffness(double k_bottom, double k_mid, double k_top) {
  const double f = 1.0;  // unit pull at the free end
  std::vector<double> k = {k_bottom + k_mid, -k_mid,        0,
                           -k_mid,           k_mid + k_top, -k_top,
                           0,                -k_top,         k_top};
  std::vector<double> u = {0, 0, f};
  if (!solve_linear(3, std::move(k), u)) return 0;
  return f / u[2];
}

/// Critical pressure ratio found numerically. The subsonic flux shape
/// g(r) = r^(2/g) - r^((g+1)/g) has a single interior maximum on (0, 1);
/// golden section on g itself only locates it to ~sqrt(eps) because the
/// function is flat there, so bisect the sign change of g'(r) instead, which
/// pins the maximizer to full precision. The analytic value
/// (2/(gamma+1))^(gamma/(gamma-1)) must agree.
inline double critical_ratio_numeric(double gamma) {
  auto slope = [gamma](double r) {
    return (2.0 / gamma) * std::pow(r, 2.0 / gamma - 1.0) -
           ((gamma + 1.0) / gamma) * std::pow(r, 1.0 / gamma);
  };
  double lo = 1e-6, hi = 1.0 - 1e-6;  // slope > 0 at lo, < 0 at hi
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (slope(mid) > 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Orifice mass flow re-derived from scratch (isentropic nozzle relations,
/// isothermal upstream state). Choked branch when p_down/p_up is at or below
/// the critical ratio, subsonic otherwise.
inline double nozzle_mass_flow(double p_up, double p_down, double cda, double gamma, double r_gas,
                               double temp_k) {
  if (p_down >= p_up) return 0;
  const double ratio = p_down / p_up;
  const double crit = std::pow(2.0 / (gamma + 1.0), gamma / (gamma - 1.0));
  if (ratio <= crit) {
    const double term = std::pow(2.0 / (gamma + 1.0), (gamma + 1.0) / (gamma - 1.0));
    return cda * p_up * std::sqrt(gamma / (r_gas * temp_k) * term);
  }
  const double shape =
      std::pow(ratio, 2.0 / gamma) - std::pow(ratio, (gamma + 1.0) / gamma);
  return cda * p_up * std::sqrt(2.0 * gamma / (r_gas * temp_k * (gamma - 1.0)) * shape);
}

/// Window statistics computed directly (two-pass, no incremental tricks).
struct WindowStats {
  double mean, stddev, min, max, first, last, slope_per_s, delta_mean;
};

inline WindowStats window_stats(const std::vector<double>& x, double dt_s) {
  const auto n = x.size();
  WindowStats w{};
  for (double v : x) w.mean += v;
  w.mean /= static_cast<double>(n);
  double var = 0;
  for (double v : x) var += (v - w.mean) * (v - w.mean);
  w.stddev = std::sqrt(var / static_cast<double>(n));
  w.min = *std::min_element(x.begin(), x.end());
  w.max = *std::max_element(x.begin(), x.end());
  w.first = x.front();
  w.last = x.back();
  // Least squares on (t_i, x_i) with t_i = i * dt.
  double st = 0, sx = 0, stt = 0, stx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * dt_s;
    st += t;
    sx += x[i];
    stt += t * t;
    stx += t * x[i];
  }
  const double dn = static_cast<double>(n);
  w.slope_per_s = (dn * stx - st * sx) / (dn * stt - st * st);
  double lo_half = 0, hi_half = 0;
  for (std::size_t i = 0; i < n / 2; ++i) lo_half += x[i];
  for (std::size_t i = n / 2; i < n; ++i) hi_half += x[i];
  w.delta_mean = (hi_half - lo_half) / (dn / 2.0);
  return w;
}

/// Brute-force minimizer of sum(x^2) s.t. A x = b, lo <= x <= hi, by
/// enumerating every bound pattern (each variable free / at lower / at
/// upper). For each pattern the equality-restricted least-norm point comes
/// from the KKT system of the free block; candidates violating bounds or the
/// equalities are discarded. The true optimum's active set is one of the
/// patterns, so the best surviving candidate is the global optimum.
struct BoxQpOracle {
  bool feasible = false;
  std::vector<double> x;
  double objective = 0;
};

inline BoxQpOracle solve_box_qp_enumerate(int n, int m, const std::vector<double>& a,
                                          const std::vector<double>& b,
                                          const std::vector<double>& lo,
                                          const std::vector<double>& hi) {
  BoxQpOracle best;
  std::vector<int> pattern(static_cast<std::size_t>(n), 0);  // 0 free, 1 lower, 2 upper
  long total = 1;
  for (int i = 0; i < n; ++i) total *= 3;
  for (long code = 0; code < total; ++code) {
    long c = code;
    for (int i = 0; i < n; ++i) {
      pattern[static_cast<std::size_t>(i)] = static_cast<int>(c % 3);
      c /= 3;
    }
    std::vector<int> free_idx;
    std::vector<double> x(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
      if (pattern[static_cast<std::size_t>(i)] == 0) {
        free_idx.push_back(i);
      } else {
        x[static_cast<std::size_t>(i)] =
            pattern[static_cast<std::size_t>(i)] == 1 ? lo[static_cast<std::size_t>(i)]
                                                      : hi[static_cast<std::size_t>(i)];
      }
    }
    // rhs = b - A_bound * x_bound
    std::vector<double> rhs(static_cast<std::size_t>(m), 0.0);
    for (int j = 0; j < m; ++j) {
      double s = b[static_cast<std::size_t>(j)];
      for (int i = 0; i < n; ++i) {
        if (pattern[static_cast<std::size_t>(i)] != 0) {
          s -= a[static_cast<std::size_t>(j) * n + i] * x[static_cast<std::size_t>(i)];
        }
      }
      rhs[static_cast<std::size_t>(j)] = s;
    }
    if (!free_idx.empty()) {
      // Least-norm x_F = A_F^T (A_F A_F^T)^-1 rhs, via the m x m gram system
      // with a tiny ridge for rank-deficient patterns.
      std::vector<double> gram(static_cast<std::size_t>(m) * m, 0.0);
      double scale = 0;
      for (int j = 0; j < m; ++j) {
        for (int k = 0; k < m; ++k) {
          double s = 0;
          for (int i : free_idx) {
            s += a[static_cast<std::size_t>(j) * n + i] * a[static_cast<std::size_t>(k) * n + i];
          }
          gram[static_cast<std::size_t>(j) * m + k] = s;
          if (j == k) scale = std::max(scale, std::fabs(s));
        }
      }
      for (int j = 0; j < m; ++j) {
        gram[static_cast<std::size_t>(j) * m + j] += std::max(scale, 1.0) * 1e-13;
      }
      std::vector<double> lambda = rhs;
      if (!solve_linear(m, gram, lambda)) continue;
      for (int i : free_idx) {
        double s = 0;
        for (int j = 0; j < m; ++j) {
          s += a[static_cast<std::size_t>(j) * n + i] * lambda[static_cast<std::size_t>(j)];
        }
        x[static_cast<std::size_t>(i)] = s;
      }
    }
    // Feasibility screen.
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      ok = x[static_cast<std::size_t>(i)] >= lo[static_cast<std::size_t>(i)] - 1e-9 &&
           x[static_cast<std::size_t>(i)] <= hi[static_cast<std::size_t>(i)] + 1e-9;
    }
    double feas_scale = 1.0;
    for (int j = 0; j < m; ++j) feas_scale = std::max(feas_scale, std::fabs(b[static_cast<std::size_t>(j)]));
    for (int j = 0; j < m && ok; ++j) {
      double s = 0;
      for (int i = 0; i < n; ++i) {
        s += a[static_cast<std::size_t>(j) * n + i] * x[static_cast<std::size_t>(i)];
      }
      ok = std::fabs(s - b[static_cast<std::size_t>(j)]) <= 1e-7 * feas_scale;
    }
    if (!ok) continue;
    double obj = 0;
    for (double v : x) obj += v * v;
    if (!best.feasible || obj < best.objective) {
      best.feasible = true;
      best.x = x;
      best.objective = obj;
    }
  }
  return best;
}

/// KKT stationarity residual for min sum(x^2) s.t. Ax=b, lo<=x<=hi at a
/// candidate (x, lambda): free variables need 2x = A^T lambda; variables at
/// a bound need the corresponding multiplier sign. Returns the worst
/// violation (0 at an exact KKT point).
inline double kkt_stationarity_residual(int n, int m, const std::vector<double>& a,
                                        const std::vector<double>& lo,
                                        const std::vector<double>& hi,
                                        const std::vector<double>& x,
                                        const std::vector<double>& lambda,
                                        double bound_tol = 1e-8) {
  double worst = 0;
  for (int i = 0; i < n; ++i) {
    double at_l = 0;
    for (int j = 0; j < m; ++j) {
      at_l += a[static_cast<std::size_t>(j) * n + i] * lambda[static_cast<std::size_t>(j)];
    }
    // g is the reduced gradient; it equals the lower-bound multiplier (must
    // be >= 0 there) and minus the upper-bound multiplier (so <= 0 there).
    const double g = 2.0 * x[static_cast<std::size_t>(i)] - at_l;
    const double span = hi[static_cast<std::size_t>(i)] - lo[static_cast<std::size_t>(i)];
    const double tol = bound_tol * std::max(1.0, span);
    const bool at_lo = x[static_cast<std::size_t>(i)] <= lo[static_cast<std::size_t>(i)] + tol;
    const bool at_hi = x[static_cast<std::size_t>(i)] >= hi[static_cast<std::size_t>(i)] - tol;
    if (at_lo) {
      worst = std::max(worst, std::max(0.0, -g));
    } else if (at_hi) {
      worst = std::max(worst, std::max(0.0, g));
    } else {
      worst = std::max(worst, std::fabs(g));
    }
  }
  return worst;
}

/// Dwell filter re-stated as a lookback rule: the output switches to label L
/// at sample i exactly when L differs from the previous output and the last
/// `dwell` raw samples (ending at i) all equal L.
inline std::vector<int> dwell_reference(const std::vector<int>& raw, int dwell) {
  std::vector<int> out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (i == 0) {
      out.push_back(raw[0]);
      continue;
    }
    int prev = out[i - 1];
    if (raw[i] == prev) {
      out.push_back(prev);
      continue;
    }
    bool run = i + 1 >= static_cast<std::size_t>(dwell);
    for (std::size_t k = 0; run && k < static_cast<std::size_t>(dwell); ++k) {
      run = raw[i - k] == raw[i];
    }
    out.push_back(run ? raw[i] : prev);
  }
  return out;
}

}  // namespace oracle
