#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "sgw/coupling.hpp"
#include "sgw/embedding.hpp"
#include "sgw/errors.hpp"
#include "sgw/matrix.hpp"

namespace sgw {

struct GwResult {
  double value = 0.0;
  Coupling coupling;
  std::size_t iterations = 0;
  bool converged = false;
  // Objective after each outer iteration of the entropic solver; empty for
  // the brute-force path.
  std::vector<double> objective_history;
};

// Discrete squared-GW objective evaluated by the literal quadruple sum:
//   sum_{i,k,j,l} (dX[i][k] - dY[j][l])^2 plan[i][j] plan[k][l]
inline double gw_objective_quadruple(const DistanceMatrix& dx, const DistanceMatrix& dy,
                                     const Matrix& plan) {
  const std::size_t n = dx.size(), m = dy.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double pij = plan(i, j);
      if (pij == 0.0) continue;
      for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t l = 0; l < m; ++l) {
          const double diff = dx(i, k) - dy(j, l);
          total += diff * diff * pij * plan(k, l);
        }
      }
    }
  }
  return total;
}

// Same value by the three-term factorization
//   p^T (dX o dX) p + q^T (dY o dY) q - 2 <plan, dX plan dY>,
// where p, q are the plan's marginals. O(n^2 m + n m^2).
inline double gw_objective_factorized(const DistanceMatrix& dx, const DistanceMatrix& dy,
                                      const Matrix& plan) {
  const std::size_t n = dx.size(), m = dy.size();
  std::vector<double> p(n, 0.0), q(m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      p[i] += plan(i, j);
      q[j] += plan(i, j);
    }
  double t1 = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) t1 += dx(i, k) * dx(i, k) * p[i] * p[k];
  double t2 = 0.0;
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t l = 0; l < m; ++l) t2 += dy(j, l) * dy(j, l) * q[j] * q[l];
  const Matrix apb = matmul(matmul(dx.values(), plan), dy.values());
  const double t3 = frobenius_dot(plan, apb);
  return t1 + t2 - 2.0 * t3;
}

// Switches on the quadruple sum's operation count (n m)^2; both paths agree
// to 1e-9 and the choice only affects cost.
inline double gw_objective(const DistanceMatrix& dx, const DistanceMatrix& dy,
                           const Matrix& plan) {
  const std::size_t n = dx.size(), m = dy.size();
  if (plan.rows() != n || plan.cols() != m)
    throw DimensionMismatch("gw_objective: plan shape does not match distance matrices");
  if (n * m <= 2000) return gw_objective_quadruple(dx, dy, plan);
  return gw_objective_factorized(dx, dy, plan);
}

inline double gw_objective(const DistanceMatrix& dx, const DistanceMatrix& dy,
                           const Coupling& plan) {
  return gw_objective(dx, dy, plan.plan());
}

inline constexpr std::size_t kBruteForceCap = 9;

// Exact minimum over permutation couplings (uniform equal-size measures).
// For Euclidean distance matrices the GW quadratic is concave on the feasible
// directions of the Birkhoff polytope, so a vertex (permutation) attains the
// minimum and this search is exact.
inline GwResult gw_bruteforce(const EmbeddingSet& x, const EmbeddingSet& y,
                              std::size_t cap = kBruteForceCap) {
  if (x.size() != y.size())
    throw SizeMismatch("gw_bruteforce: |X| = " + std::to_string(x.size()) +
                       " but |Y| = " + std::to_string(y.size()));
  const std::size_t n = x.size();
  if (n > cap)
    throw TooLarge("gw_bruteforce: n = " + std::to_string(n) + " exceeds cap " +
                   std::to_string(cap));
  const DistanceMatrix dx = pairwise_distances(x);
  const DistanceMatrix dy = pairwise_distances(y);

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::size_t> best = perm;
  double best_value = std::numeric_limits<double>::infinity();
  const double inv_n2 = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  do {
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) {
        const double diff = dx(i, k) - dy(perm[i], perm[k]);
        v += diff * diff;
      }
    v *= inv_n2;
    if (v < best_value) {  // strict: first (lexicographic) argmin wins ties
      best_value = v;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  return GwResult{best_value, Coupling::permutation(best), 1, true, {}};
}

namespace detail {

inline double logsumexp(const std::vector<double>& v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

// Project an approximately feasible plan onto the exact marginals
// (Altschuler-style rounding): scale rows down to p, then columns down to q,
// then distribute the residual mass as a rank-one correction.
inline void round_to_marginals(Matrix& plan, const std::vector<double>& p,
                               const std::vector<double>& q) {
  const std::size_t n = p.size(), m = q.size();
  for (std::size_t i = 0; i < n; ++i) {
    double rs = 0.0;
    for (std::size_t j = 0; j < m; ++j) rs += plan(i, j);
    if (rs > p[i] && rs > 0.0) {
      const double s = p[i] / rs;
      for (std::size_t j = 0; j < m; ++j) plan(i, j) *= s;
    }
  }
  for (std::size_t j = 0; j < m; ++j) {
    double cs = 0.0;
    for (std::size_t i = 0; i < n; ++i) cs += plan(i, j);
    if (cs > q[j] && cs > 0.0) {
      const double s = q[j] / cs;
      for (std::size_t i = 0; i < n; ++i) plan(i, j) *= s;
    }
  }
  std::vector<double> err_r(n, 0.0), err_c(m, 0.0);
  double deficit = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double rs = 0.0;
    for (std::size_t j = 0; j < m; ++j) rs += plan(i, j);
    err_r[i] = std::max(0.0, p[i] - rs);  // clamp float wobble
    deficit += err_r[i];
  }
  for (std::size_t j = 0; j < m; ++j) {
    double cs = 0.0;
    for (std::size_t i = 0; i < n; ++i) cs += plan(i, j);
    err_c[j] = std::max(0.0, q[j] - cs);
  }
  if (deficit > 0.0) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j)
        plan(i, j) += err_r[i] * err_c[j] / deficit;
  }
}

// Log-domain Sinkhorn for cost C with marginals p, q: returns the plan
// exp((f_i + g_j - C_ij)/eps), rounded onto the exact marginal polytope.
// Stable at small eps.
inline Matrix sinkhorn_log(const Matrix& cost, const std::vector<double>& p,
                           const std::vector<double>& q, double eps, double marginal_tol,
                           std::size_t max_iter) {
  const std::size_t n = p.size(), m = q.size();
  std::vector<double> f(n, 0.0), g(m, 0.0);
  std::vector<double> scratch(std::max(n, m));
  const auto check_finite = [&](double v) {
    if (!std::isfinite(v))
      throw NumericalOverflow("sinkhorn: potentials overflowed at epsilon = " +
                              std::to_string(eps));
  };
  for (std::size_t it = 0; it < max_iter; ++it) {
    // f-update enforces row marginals exactly.
    for (std::size_t i = 0; i < n; ++i) {
      scratch.resize(m);
      for (std::size_t j = 0; j < m; ++j) scratch[j] = (g[j] - cost(i, j)) / eps;
      f[i] = eps * (std::log(p[i]) - logsumexp(scratch));
      check_finite(f[i]);
    }
    // g-update enforces column marginals exactly.
    for (std::size_t j = 0; j < m; ++j) {
      scratch.resize(n);
      for (std::size_t i = 0; i < n; ++i) scratch[i] = (f[i] - cost(i, j)) / eps;
      g[j] = eps * (std::log(q[j]) - logsumexp(scratch));
      check_finite(g[j]);
    }
    // After the g-update columns are exact; measure row violation.
    double viol = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double rs = 0.0;
      for (std::size_t j = 0; j < m; ++j) rs += std::exp((f[i] + g[j] - cost(i, j)) / eps);
      viol = std::max(viol, std::abs(rs - p[i]));
    }
    if (viol < marginal_tol) break;
  }
  Matrix plan(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      plan(i, j) = std::exp((f[i] + g[j] - cost(i, j)) / eps);
      check_finite(plan(i, j));
    }
  round_to_marginals(plan, p, q);
  return plan;
}

}  // namespace detail

namespace detail {

// Rank each point by its mean squared distance to the rest, centered to
// [-1, 1]; ties keep index order.
inline std::vector<double> centered_profile_ranks(const std::vector<double>& profile) {
  const std::size_t n = profile.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return profile[a] < profile[b]; });
  std::vector<double> r(n);
  for (std::size_t k = 0; k < n; ++k)
    r[idx[k]] = n == 1 ? 0.0 : 2.0 * static_cast<double>(k) / static_cast<double>(n - 1) - 1.0;
  return r;
}

inline std::vector<std::size_t> ascending_order(const std::vector<double>& profile) {
  std::vector<std::size_t> idx(profile.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return profile[a] < profile[b]; });
  return idx;
}

inline double perm_objective(const DistanceMatrix& dx, const DistanceMatrix& dy,
                             const std::vector<std::size_t>& s) {
  const std::size_t n = s.size();
  double v = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      const double diff = dx(i, k) - dy(s[i], s[k]);
      v += diff * diff;
    }
  return v / (static_cast<double>(n) * static_cast<double>(n));
}

// Objective change from swapping s[a] and s[b], O(n). The (a,b) corner terms
// cancel because the distance matrices are symmetric.
inline double swap_delta(const DistanceMatrix& dx, const DistanceMatrix& dy,
                         const std::vector<std::size_t>& s, std::size_t a, std::size_t b) {
  const std::size_t n = s.size();
  double delta = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == a || i == b) continue;
    const double da_new = dx(i, a) - dy(s[i], s[b]);
    const double db_new = dx(i, b) - dy(s[i], s[a]);
    const double da_old = dx(i, a) - dy(s[i], s[a]);
    const double db_old = dx(i, b) - dy(s[i], s[b]);
    delta += da_new * da_new + db_new * db_new - da_old * da_old - db_old * db_old;
  }
  return 2.0 * delta / (static_cast<double>(n) * static_cast<double>(n));
}

// Local descent over permutations: transpositions always; 3-cycles and
// disjoint double swaps on small instances. Every move is scored by O(n)
// incremental deltas (a cycle or double swap is two transpositions).
inline void vertex_descent(const DistanceMatrix& dx, const DistanceMatrix& dy,
                           std::vector<std::size_t>& s) {
  const std::size_t n = s.size();
  const bool cycles = n <= 48;
  const bool double_swaps = n <= 16;
  bool improved = true;
  std::size_t passes = 0;
  while (improved && ++passes < 200) {
    improved = false;
    for (std::size_t a = 0; a < n && !improved; ++a)
      for (std::size_t b = a + 1; b < n && !improved; ++b)
        if (swap_delta(dx, dy, s, a, b) < -1e-15) {
          std::swap(s[a], s[b]);
          improved = true;
        }
    if (improved) continue;
    if (cycles) {
      for (std::size_t a = 0; a < n && !improved; ++a)
        for (std::size_t b = 0; b < n && !improved; ++b) {
          if (b == a) continue;
          const double d1 = swap_delta(dx, dy, s, a, b);
          std::swap(s[a], s[b]);
          for (std::size_t c = 0; c < n; ++c) {
            if (c == a || c == b) continue;
            if (d1 + swap_delta(dx, dy, s, b, c) < -1e-15) {
              std::swap(s[b], s[c]);
              improved = true;
              break;
            }
          }
          if (!improved) std::swap(s[a], s[b]);  // revert the probe
        }
    }
    if (improved || !double_swaps) continue;
    for (std::size_t a = 0; a < n && !improved; ++a)
      for (std::size_t b = a + 1; b < n && !improved; ++b) {
        const double d1 = swap_delta(dx, dy, s, a, b);
        std::swap(s[a], s[b]);
        for (std::size_t c = 0; c < n && !improved; ++c) {
          if (c == a || c == b) continue;
          for (std::size_t d = c + 1; d < n; ++d) {
            if (d == a || d == b) continue;
            if (d1 + swap_delta(dx, dy, s, c, d) < -1e-15) {
              std::swap(s[c], s[d]);
              improved = true;
              break;
            }
          }
        }
        if (!improved) std::swap(s[a], s[b]);
      }
  }
}

// The permutation carrying most of the plan's mass, greedily.
inline std::vector<std::size_t> extract_permutation(const Matrix& plan) {
  const std::size_t n = plan.rows();
  std::vector<std::size_t> sigma(n);
  std::vector<bool> row_used(n, false), col_used(n, false);
  for (std::size_t pick = 0; pick < n; ++pick) {
    double best = -1.0;
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (row_used[i]) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (col_used[j]) continue;
        if (plan(i, j) > best) {
          best = plan(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    sigma[bi] = bj;
    row_used[bi] = true;
    col_used[bj] = true;
  }
  return sigma;
}

// Best vertex reachable by local descent from the plan's dominant
// permutation and from matchings of per-point distance profiles (mean,
// mean-square, max; aligned and reversed). Equal sizes only.
inline std::pair<std::vector<std::size_t>, double> best_vertex_refinement(
    const DistanceMatrix& dx, const DistanceMatrix& dy, const Matrix& plan) {
  const std::size_t n = dx.size();
  std::vector<std::size_t> best_perm;
  double best = std::numeric_limits<double>::infinity();
  const auto consider = [&](std::vector<std::size_t> s) {
    vertex_descent(dx, dy, s);
    const double v = perm_objective(dx, dy, s);
    if (v < best) {
      best = v;
      best_perm = std::move(s);
    }
  };
  consider(extract_permutation(plan));
  std::vector<double> m1x(n, 0.0), m1y(n, 0.0), m2x(n, 0.0), m2y(n, 0.0), mxx(n, 0.0),
      mxy(n, 0.0);
  const double dn = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      m1x[i] += dx(i, k) / dn;
      m2x[i] += dx(i, k) * dx(i, k) / dn;
      mxx[i] = std::max(mxx[i], dx(i, k));
      m1y[i] += dy(i, k) / dn;
      m2y[i] += dy(i, k) * dy(i, k) / dn;
      mxy[i] = std::max(mxy[i], dy(i, k));
    }
  const std::vector<double>* profiles[3][2] = {{&m1x, &m1y}, {&m2x, &m2y}, {&mxx, &mxy}};
  for (const auto& pair : profiles) {
    const auto ox = ascending_order(*pair[0]);
    const auto oy = ascending_order(*pair[1]);
    std::vector<std::size_t> aligned(n), reversed(n);
    for (std::size_t k = 0; k < n; ++k) {
      aligned[ox[k]] = oy[k];
      reversed[ox[k]] = oy[n - 1 - k];
    }
    consider(std::move(aligned));
    consider(std::move(reversed));
  }
  return {std::move(best_perm), best};
}

}  // namespace detail

// Entropic GW: alternate between linearizing the quadratic objective at the
// current plan and solving the resulting entropic transport problem with
// log-domain Sinkhorn. Three refinements make the descent reliable, all
// deterministic:
//   - the product-coupling start is a saddle of the iteration, so the init
//     is tilted by a marginal-preserving rank-one term that pairs points of
//     similar distance profiles;
//   - epsilon is annealed from the cost scale down to the target before the
//     convergence test engages (continuation, not a restart);
//   - when the iteration stalls at the target epsilon on an equal-size
//     problem, a local search over permutation vertices (seeded from the
//     dominant permutation and from distance-profile matchings) is offered
//     as an escape move; the loop resumes from an improving vertex.
// Accepted steps never increase the objective. Converged means the plan
// reached a fixed point (change < tol) or the objective became stationary at
// the inner solver's resolution; larger increases report converged = false.
inline GwResult gw_entropic(const EmbeddingSet& x, const EmbeddingSet& y, double epsilon,
                            std::size_t max_outer = 500, double tol = 1e-7,
                            std::size_t max_sinkhorn_iter = 600) {
  if (!(epsilon > 0.0)) throw InvalidArgument("gw_entropic: epsilon must be > 0");
  const std::size_t n = x.size(), m = y.size();
  const DistanceMatrix dx = pairwise_distances(x);
  const DistanceMatrix dy = pairwise_distances(y);
  const std::vector<double> p(n, 1.0 / static_cast<double>(n));
  const std::vector<double> q(m, 1.0 / static_cast<double>(m));

  if (n == 1 || m == 1) {
    // The coupling is forced by the marginals.
    Matrix plan(n, m);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) plan(i, j) = p[i] * q[j];
    const double value = gw_objective(dx, dy, plan);
    return GwResult{value, Coupling(std::move(plan), p, q), 0, true, {value}};
  }

  // Constant part of the linearized cost: cX_i + cY_j.
  std::vector<double> cx(n, 0.0), cy(m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) cx[i] += dx(i, k) * dx(i, k) * p[k];
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t l = 0; l < m; ++l) cy[j] += dy(j, l) * dy(j, l) * q[l];

  const auto ux = detail::centered_profile_ranks(cx);
  const auto vy = detail::centered_profile_ranks(cy);
  constexpr double kInitTilt = 0.25;
  Matrix plan(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      plan(i, j) = p[i] * q[j] * (1.0 + kInitTilt * ux[i] * vy[j]);
  double current = gw_objective(dx, dy, plan);

  const double scale =
      std::max(dx.max_entry() * dx.max_entry(), dy.max_entry() * dy.max_entry());
  constexpr double kAnnealDecay = 0.7;
  constexpr std::size_t kLevelCap = 2;
  double eps_level = std::max(epsilon, scale);
  const double level_tol = std::max(tol, 1e-4 / static_cast<double>(n * m));

  std::vector<double> history;
  bool converged = false;
  std::size_t it = 0;
  std::size_t steps_at_level = 0;
  std::size_t refinements = 0;
  // Objective-stagnation window at the target level: when five accepted
  // steps move the value by less than 1e-5 relative, the plan is only
  // reshuffling mass between near-tied couplings.
  double window_anchor = std::numeric_limits<double>::infinity();
  std::size_t window_steps = 0;
  // Escape move at a stall: jump to the best locally refined permutation
  // vertex if it strictly improves. Applies to equal-size problems only.
  bool incumbent_is_vertex = false;
  const auto try_refinement = [&]() -> bool {
    if (n != m || refinements >= 3) return false;
    auto [perm, value] = detail::best_vertex_refinement(dx, dy, plan);
    if (value < current - 1e-12 * std::max(1.0, std::abs(current))) {
      ++refinements;  // only strict improvements burn the budget
      Matrix vertex(n, n);
      for (std::size_t i = 0; i < n; ++i) vertex(i, perm[i]) = p[i];
      plan = std::move(vertex);
      current = value;
      history.push_back(current);
      incumbent_is_vertex = true;
      return true;
    }
    return false;
  };
  for (; it < max_outer; ++it) {
    const Matrix apb = matmul(matmul(dx.values(), plan), dy.values());
    Matrix cost(n, m);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) cost(i, j) = cx[i] + cy[j] - 2.0 * apb(i, j);
    const bool at_target = eps_level == epsilon;
    // Annealing levels only steer the continuation path; loose marginals
    // (repaired by rounding) are fine there and far cheaper. The target
    // level gets the tight solve.
    Matrix next = at_target
                      ? detail::sinkhorn_log(cost, p, q, eps_level, 1e-10, max_sinkhorn_iter)
                      : detail::sinkhorn_log(cost, p, q, eps_level, 1e-6, 300);
    const double next_obj = gw_objective(dx, dy, next);
    if (next_obj > current) {
      if (!at_target) {
        // Cooling overshot its usefulness at this level; move on.
        eps_level = std::max(epsilon, eps_level * kAnnealDecay);
        steps_at_level = 0;
        continue;
      }
      if (try_refinement()) continue;
      // No better vertex in reach. A locally optimal vertex incumbent is
      // this scheme's answer even when the entropic step bounces off it
      // (expected at moderate epsilon); otherwise a bounce within the
      // entropic blur counts as the fixed point and a large one means the
      // inner solve failed on a degenerate instance.
      converged = incumbent_is_vertex ||
                  next_obj - current <= 0.05 * std::abs(current) + 1e-12;
      break;
    }
    const double change = max_abs_diff(next, plan);
    plan = std::move(next);
    current = next_obj;
    history.push_back(current);
    incumbent_is_vertex = false;
    ++steps_at_level;
    if (at_target) {
      bool stationary = change < tol;
      if (++window_steps >= 5) {
        stationary = stationary ||
                     window_anchor - current <= 1e-5 * std::max(1.0, std::abs(current));
        window_anchor = current;
        window_steps = 0;
      }
      if (stationary) {
        if (try_refinement()) {
          window_anchor = std::numeric_limits<double>::infinity();
          window_steps = 0;
          continue;
        }
        converged = true;
        ++it;
        break;
      }
    }
    if (!at_target && (change < level_tol || steps_at_level >= kLevelCap)) {
      eps_level = std::max(epsilon, eps_level * kAnnealDecay);
      steps_at_level = 0;
    }
  }
  return GwResult{current, Coupling(std::move(plan), p, q), it, converged, std::move(history)};
}

// Scale-adaptive default: 1e-2 x median of the squared off-diagonal
// intra-domain distances.
inline double default_entropic_epsilon(const DistanceMatrix& dx) {
  const double med = dx.median_offdiag();
  const double eps = 1e-2 * med * med;
  return eps > 0.0 ? eps : 1e-6;
}

}  // namespace sgw
