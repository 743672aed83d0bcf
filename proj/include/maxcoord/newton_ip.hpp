// Interior-point Newton iteration on a graph-structured nonlinear system.
//
// A Problem provides
//   int size() const;
//   VecX residual(const VecX& s, double mu) const;
//   void jacobian(const VecX& s, double mu, BlockSparseMatrix& F) const;
//   BlockSparseMatrix make_matrix() const;
//   const GraphOrdering& ordering() const;
//   const std::vector<char>& cone_mask() const;
//   const std::vector<std::pair<int, int>>& complementarity_pairs() const;
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "maxcoord/errors.hpp"
#include "maxcoord/graph_ldu.hpp"
#include "maxcoord/integrator.hpp"

namespace maxcoord {

struct SolveOptions {
  double tol = 1e-10;
  int max_newton_iters = 100;
  int max_linesearch_halvings = 50;
  double mu0_scale = 1.0;  // times the mean complementarity of the start point
  double mu_shrink = 0.1;
  double fraction_to_boundary = 0.995;
  double cone_floor = 1e-10;
  // Sticking friction makes contact pivots condition like 1/mu, so the
  // singularity test is looser than the factorization default.
  double pivot_ratio = 1e-16;
  int refinement_steps = 2;

  void validate() const {
    if (!(tol > 0.0) || max_newton_iters < 1 || max_linesearch_halvings < 1 || !(mu0_scale > 0.0) ||
        !(mu_shrink > 0.0 && mu_shrink < 1.0) || !(fraction_to_boundary > 0.0 && fraction_to_boundary < 1.0) ||
        !(cone_floor > 0.0) || !(pivot_ratio > 0.0 && pivot_ratio < 1.0) ||
        refinement_steps < 0)
      throw Error("invalid solver options");
  }
  [[nodiscard]] double mu_floor() const { return tol / 10.0; }
};

struct SolveReport {
  bool converged = false;
  int iterations = 0;
  double residual_inf = 0.0;       // at the final mu
  double residual_inf_mu0 = 0.0;   // same point, mu = 0
  double residual_norm = 0.0;      // 2-norm at the final mu
  double mu = 0.0;
  std::vector<double> residual_trace;  // 2-norm after each accepted step (entry 0: start)
  std::vector<double> mu_trace;        // mu in force for each trace entry
  std::vector<double> step_trace;      // accepted alpha per Newton step
};

/// Iteration cap reached; carries the report of the failed solve.
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, SolveReport report) : Error(what), report_(std::move(report)) {}
  [[nodiscard]] const SolveReport& report() const { return report_; }

 private:
  SolveReport report_;
};

/// Solves F dS = -f, factoring F in place, followed by `refinement_steps`
/// rounds of iterative refinement with the same factors.
inline VecX newton_direction(BlockSparseMatrix& F, const VecX& f, const GraphOrdering& ord,
                             double pivot_ratio = kPivotRatio, int refinement_steps = 2) {
  const bool cyclic = ord.has_cycles();
  std::optional<BlockSparseMatrix> F0;
  if (refinement_steps > 0) F0.emplace(F);
  if (cyclic)
    factor_cyclic(F, ord, pivot_ratio);
  else
    factor_acyclic(F, ord, pivot_ratio);
  auto solve = [&](const VecX& rhs) { return cyclic ? solve_cyclic(F, rhs, ord) : solve_acyclic(F, rhs, ord); };
  VecX ds = solve(f);
  for (int r = 0; r < refinement_steps; ++r) {
    const VecX res = f + F0->multiply(ds);
    if (!(res.lpNorm<Eigen::Infinity>() > 0.0)) break;
    ds += solve(res);
  }
  return ds;
}

/// Largest alpha <= 1 keeping each cone coordinate >= (1 - tau) of its value.
inline double max_feasible_alpha(const VecX& ds, const VecX& s, const std::vector<char>& mask, double tau) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (mask[i] && ds[i] < 0.0) alpha = std::min(alpha, -tau * s[i] / ds[i]);
  return alpha;
}

inline VecX feasible_step(const VecX& ds, const VecX& s, const std::vector<char>& mask,
                          double tau = SolveOptions{}.fraction_to_boundary) {
  return max_feasible_alpha(ds, s, mask, tau) * ds;
}

struct LineSearchResult {
  VecX s;
  VecX f;
  double alpha = 1.0;
  int halvings = 0;
};

/// Backtracking on the residual 2-norm.  A trial whose evaluation throws
/// (e.g. angular-velocity overflow) counts as a failed trial.
inline LineSearchResult line_search(const VecX& ds, const VecX& s, const VecX& f_current,
                                    const std::function<VecX(const VecX&)>& residual, int max_halvings = 50) {
  const double merit = f_current.norm();
  double alpha = 1.0;
  for (int h = 0; h <= max_halvings; ++h, alpha *= 0.5) {
    VecX trial = s + alpha * ds;
    VecX ft;
    try {
      ft = residual(trial);
    } catch (const AngularVelocityOverflow&) {
      continue;
    } catch (const InfeasiblePoint&) {
      continue;
    }
    if (ft.allFinite() && ft.norm() < merit) return {std::move(trial), std::move(ft), alpha, h};
  }
  throw LineSearchFailure("no decrease of the residual norm after " + std::to_string(max_halvings) + " halvings");
}

inline LineSearchResult line_search(const VecX& ds, const VecX& s, const std::function<VecX(const VecX&)>& residual,
                                    int max_halvings = 50) {
  return line_search(ds, s, residual(s), residual, max_halvings);
}

/// Monotone barrier schedule.
inline double update_barrier(double mu, double residual_inf, const SolveOptions& opt) {
  const double floor = opt.mu_floor();
  if (mu <= floor) return floor;
  if (residual_inf <= std::max(opt.tol, mu)) return std::max(floor, opt.mu_shrink * mu);
  return mu;
}

inline double mean_complementarity(const VecX& s, const std::vector<std::pair<int, int>>& pairs) {
  if (pairs.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [a, b] : pairs) sum += s[a] * s[b];
  return sum / static_cast<double>(pairs.size());
}

template <class Problem>
std::pair<VecX, SolveReport> interior_point(const Problem& p, const VecX& s_init, const SolveOptions& opt = {}) {
  opt.validate();
  const auto& mask = p.cone_mask();
  const auto& pairs = p.complementarity_pairs();
  if (s_init.size() != p.size()) throw Error("initial guess has wrong dimension");

  VecX s = s_init;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (mask[i]) s[i] = std::max(s[i], opt.cone_floor);

  const double floor = opt.mu_floor();
  double mu = pairs.empty() ? floor : std::max(floor, opt.mu0_scale * mean_complementarity(s, pairs));

  SolveReport rep;
  VecX f = p.residual(s, mu);
  rep.residual_trace.push_back(f.norm());
  rep.mu_trace.push_back(mu);
  BlockSparseMatrix F = p.make_matrix();
  const auto eval = [&](const VecX& x) { return p.residual(x, mu); };

  for (;;) {
    double rinf = f.lpNorm<Eigen::Infinity>();
    while (mu > floor && rinf <= std::max(opt.tol, mu)) {
      mu = update_barrier(mu, rinf, opt);
      f = p.residual(s, mu);
      rinf = f.lpNorm<Eigen::Infinity>();
    }
    if (mu <= floor && rinf <= opt.tol) {
      rep.converged = true;
      break;
    }
    if (rep.iterations >= opt.max_newton_iters) break;

    p.jacobian(s, mu, F);
    const VecX ds = feasible_step(newton_direction(F, f, p.ordering(), opt.pivot_ratio, opt.refinement_steps), s, mask, opt.fraction_to_boundary);
    auto ls = line_search(ds, s, f, eval, opt.max_linesearch_halvings);
    s = std::move(ls.s);
    f = std::move(ls.f);
    ++rep.iterations;
    rep.residual_trace.push_back(f.norm());
    rep.mu_trace.push_back(mu);
    rep.step_trace.push_back(ls.alpha);
  }

  rep.mu = mu;
  rep.residual_inf = f.lpNorm<Eigen::Infinity>();
  rep.residual_norm = f.norm();
  rep.residual_inf_mu0 = p.residual(s, 0.0).template lpNorm<Eigen::Infinity>();
  if (!rep.converged)
    throw NonConvergence("interior point did not converge in " + std::to_string(opt.max_newton_iters) +
                             " iterations (residual " + std::to_string(rep.residual_inf) + ")",
                         rep);
  return {s, rep};
}

/// One implicit integration step as a Problem.
class StepProblem {
 public:
  StepProblem(const Mechanism& m, const SystemLayout& layout, const StepContext& ctx)
      : m_(m), layout_(layout), ctx_(ctx) {}

  [[nodiscard]] int size() const { return layout_.size(); }
  [[nodiscard]] VecX residual(const VecX& s, double mu) const { return assemble_residual(m_, layout_, ctx_, s, mu); }
  void jacobian(const VecX& s, double mu, BlockSparseMatrix& F) const {
    assemble_jacobian(m_, layout_, ctx_, s, mu, F);
  }
  [[nodiscard]] BlockSparseMatrix make_matrix() const { return layout_.make_matrix(); }
  [[nodiscard]] const GraphOrdering& ordering() const { return layout_.ordering(); }
  [[nodiscard]] const std::vector<char>& cone_mask() const { return layout_.cone_mask(); }
  [[nodiscard]] const std::vector<std::pair<int, int>>& complementarity_pairs() const {
    return layout_.complementarity_pairs();
  }

 private:
  const Mechanism& m_;
  const SystemLayout& layout_;
  const StepContext& ctx_;
};

inline std::pair<VecX, SolveReport> interior_point(const Mechanism& m, const SystemLayout& layout,
                                                   const StepContext& ctx, const VecX& s_init,
                                                   const SolveOptions& opt = {}) {
  return interior_point(StepProblem(m, layout, ctx), s_init, opt);
}

}  // namespace maxcoord
