// Time stepping: advance the configuration, solve for the next velocities
// with a warm-started interior-point run, record one row per step.
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "maxcoord/errors.hpp"
#include "maxcoord/integrator.hpp"
#include "maxcoord/mechanism.hpp"
#include "maxcoord/newton_ip.hpp"

namespace maxcoord {

struct SimulationOptions {
  double dt = 0.01;
  int steps = 100;
  SolveOptions solve;
};

/// Row k holds z_k and zdot_k (the velocity that carries z_k to z_{k+1}).
struct TrajectoryRow {
  double t = 0.0;
  std::vector<BodyState> states;
  std::vector<double> constraint_inf;  // per joint, |g(z_k)|_inf
  std::vector<double> gap;             // per contact, phi(z_k)
  std::vector<double> gamma;           // per contact, normal force of the solve producing zdot_k
  double energy = 0.0;
  int iterations = 0;
};

struct TrajectoryRecord {
  int num_bodies = 0;
  int num_joints = 0;
  int num_contacts = 0;
  double dt = 0.0;
  std::vector<TrajectoryRow> rows;

  [[nodiscard]] double max_constraint_violation() const {
    double m = 0.0;
    for (const auto& r : rows)
      for (double g : r.constraint_inf) m = std::max(m, g);
    return m;
  }
  bool operator==(const TrajectoryRecord&) const;
};

inline bool operator==(const BodyState& a, const BodyState& b) {
  return a.x == b.x && a.q.coeffs() == b.q.coeffs() && a.v == b.v && a.omega == b.omega;
}

inline bool operator==(const TrajectoryRow& a, const TrajectoryRow& b) {
  return a.t == b.t && a.states == b.states && a.constraint_inf == b.constraint_inf && a.gap == b.gap &&
         a.gamma == b.gamma && a.energy == b.energy && a.iterations == b.iterations;
}

inline bool TrajectoryRecord::operator==(const TrajectoryRecord& o) const {
  return num_bodies == o.num_bodies && num_joints == o.num_joints && num_contacts == o.num_contacts &&
         dt == o.dt && rows == o.rows;
}

/// Solver failure at a given step; keeps the rows recorded so far.
class StepFailure : public Error {
 public:
  StepFailure(int step, const std::string& what, SolveReport report, TrajectoryRecord partial)
      : Error("step " + std::to_string(step) + ": " + what),
        step_(step),
        report_(std::move(report)),
        partial_(std::move(partial)) {}
  [[nodiscard]] int step() const { return step_; }
  [[nodiscard]] const SolveReport& report() const { return report_; }
  [[nodiscard]] const TrajectoryRecord& partial() const { return partial_; }

 private:
  int step_;
  SolveReport report_;
  TrajectoryRecord partial_;
};

/// Kinetic energy of zdot_k plus the potential averaged over z_k and z_{k+1}.
inline double step_energy(const Mechanism& m, const std::vector<BodyState>& states, double dt) {
  std::vector<BodyState> next;
  next.reserve(states.size());
  for (const auto& s : states) next.push_back(advance_configuration(s, dt));
  return kinetic_energy(m, states) + 0.5 * (potential_energy(m, states) + potential_energy(m, next));
}

/// Steps one mechanism forward, keeping the previous solution as warm start.
class Simulator {
 public:
  Simulator(Mechanism m, std::vector<BodyState> states, double dt, SolveOptions opt = {})
      : m_(std::move(m)), layout_(m_), states_(std::move(states)), dt_(dt), opt_(opt) {
    if (static_cast<int>(states_.size()) != m_.num_bodies()) throw ModelError("state count does not match bodies");
    if (!(dt_ > 0.0)) throw Error("time step must be positive");
    opt_.validate();
    warm_ = initial_unknowns(m_, layout_, states_);
  }

  [[nodiscard]] const Mechanism& mechanism() const { return m_; }
  [[nodiscard]] const SystemLayout& layout() const { return layout_; }
  [[nodiscard]] const std::vector<BodyState>& states() const { return states_; }
  [[nodiscard]] const VecX& unknowns() const { return warm_; }
  [[nodiscard]] const SolveReport& last_report() const { return report_; }
  [[nodiscard]] double dt() const { return dt_; }

  /// Advances one step; throws NonConvergence / LineSearchFailure / SingularSystem.
  void step() {
    const StepContext ctx = make_step_context(m_, states_, dt_);
    VecX guess = warm_;
    for (int b = 0; b < m_.num_bodies(); ++b) {
      const int o = layout_.offset(layout_.body(b));
      guess.segment<3>(o) = states_[b].v;
      guess.segment<3>(o + 3) = states_[b].omega;
    }
    std::pair<VecX, SolveReport> sol;
    try {
      sol = interior_point(m_, layout_, ctx, guess, opt_);
      restarts_ = 0;
    } catch (const Error& e) {
      if (!retryable(e)) throw;
      // Warm starts pinned at the barrier floor stall when contacts switch;
      // retry from unit cone coordinates.
      const auto& mask = layout_.cone_mask();
      for (Eigen::Index i = 0; i < guess.size(); ++i)
        if (mask[i]) guess[i] = 1.0;
      sol = interior_point(m_, layout_, ctx, guess, opt_);
      restarts_ = 1;
    }
    states_ = states_from_solution(m_, layout_, ctx, sol.first);
    warm_ = std::move(sol.first);
    report_ = std::move(sol.second);
  }

  /// 1 when the last step needed the cold restart.
  [[nodiscard]] int restarts() const { return restarts_; }

  [[nodiscard]] TrajectoryRow row(double t, int iterations) const {
    TrajectoryRow r;
    r.t = t;
    r.states = states_;
    for (const auto& j : m_.joints) {
      const VecX g = joint_residual(j, state_of(states_, j.parent), states_[j.child]);
      r.constraint_inf.push_back(g.size() ? g.lpNorm<Eigen::Infinity>() : 0.0);
    }
    for (std::size_t c = 0; c < m_.contacts.size(); ++c) {
      const auto& ct = m_.contacts[c];
      r.gap.push_back(contact_gap(ct, states_[ct.body], state_of(states_, ct.other)));
      r.gamma.push_back(iterations > 0 ? warm_[layout_.offset(layout_.contact(static_cast<int>(c)))] : 0.0);
    }
    r.energy = step_energy(m_, states_, dt_);
    r.iterations = iterations;
    return r;
  }

 private:
  Mechanism m_;
  SystemLayout layout_;
  std::vector<BodyState> states_;
  double dt_;
  SolveOptions opt_;
  VecX warm_;
  SolveReport report_;
  int restarts_ = 0;

  [[nodiscard]] bool retryable(const Error& e) const {
    if (layout_.complementarity_pairs().empty()) return false;
    return dynamic_cast<const NonConvergence*>(&e) || dynamic_cast<const LineSearchFailure*>(&e) ||
           dynamic_cast<const SingularSystem*>(&e);
  }
};

inline TrajectoryRecord simulate(const Mechanism& m, const std::vector<BodyState>& states,
                                 const SimulationOptions& opt) {
  if (opt.steps < 0) throw Error("step count must be nonnegative");
  Simulator sim(m, states, opt.dt, opt.solve);
  TrajectoryRecord rec;
  rec.num_bodies = m.num_bodies();
  rec.num_joints = static_cast<int>(m.joints.size());
  rec.num_contacts = static_cast<int>(m.contacts.size());
  rec.dt = opt.dt;
  rec.rows.reserve(opt.steps + 1);
  rec.rows.push_back(sim.row(0.0, 0));
  for (int k = 1; k <= opt.steps; ++k) {
    try {
      sim.step();
    } catch (const NonConvergence& e) {
      throw StepFailure(k, e.what(), e.report(), rec);
    } catch (const AngularVelocityOverflow& e) {
      throw StepFailure(k, e.what(), {}, rec);
    } catch (const LineSearchFailure& e) {
      throw StepFailure(k, e.what(), {}, rec);
    } catch (const SingularSystem& e) {
      throw StepFailure(k, e.what(), {}, rec);
    }
    rec.rows.push_back(sim.row(k * opt.dt, sim.last_report().iterations));
  }
  return rec;
}

}  // namespace maxcoord
