// First-order variational integrator in maximal coordinates: residual f(s)
// and Jacobian F(s) of one implicit step, assembled on the constraint graph.
//
// Unknowns per body: zdot1 = [v1; omega1].  Per joint: lambda.  Per contact:
// [gamma, s_phi] and, with friction, [psi, s_psi, beta (2nf), eta (2nf)].
// The contact rows are
//   s_phi - phi(z2) = 0,            s_phi gamma = mu,
//   B zdot1 + E psi - eta = 0,      s_psi - (cf gamma - E^T beta) = 0,
//   s_psi psi = mu,                 beta .* eta = mu.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "maxcoord/errors.hpp"
#include "maxcoord/graph_ldu.hpp"
#include "maxcoord/mechanism.hpp"
#include "maxcoord/quat.hpp"

namespace maxcoord {

// ---------------------------------------------------------------------------
// Single-body pieces

/// z1 from z0 and zdot0; velocities are carried over unchanged.
inline BodyState advance_configuration(const BodyState& s, double dt) {
  BodyState out = s;
  out.x = s.x + dt * s.v;
  out.q = step_orientation(s.q, s.omega, dt);
  return out;
}

inline Vec3 d0_translational(double mass, const Vec3& x0, const Vec3& x1, const Vec3& v1,
                             const Vec3& grad, const Vec3& force, double dt) {
  const Vec3 v0 = (x1 - x0) / dt;
  return mass * (v1 - v0) / dt + grad - force;
}

inline Vec3 d0_rotational(const Mat3& J, const UnitQuaternion& q0, const UnitQuaternion& q1,
                          const Vec3& omega1, const Vec3& grad_r, const Vec3& torque, double dt) {
  const Vec3 w0 = discrete_angvel(q0, q1, dt).omega;
  const double s1 = angvel_scalar(omega1, dt);
  const double s0 = angvel_scalar(w0, dt);
  return s1 * J * omega1 + omega1.cross(J * omega1) - s0 * J * w0 + w0.cross(J * w0) + grad_r -
         2.0 * torque;
}

inline Mat3 d0_rotational_jacobian(const Mat3& J, const Vec3& omega1, double dt) {
  const double s1 = angvel_scalar(omega1, dt);
  const Vec3 Jw = J * omega1;
  return s1 * J - Jw * omega1.transpose() / s1 + skew(omega1) * J - skew(Jw);
}

// ---------------------------------------------------------------------------
// Energy and momentum

inline double kinetic_energy(const Mechanism& m, const std::vector<BodyState>& s) {
  double t = 0.0;
  for (int b = 0; b < m.num_bodies(); ++b) {
    t += 0.5 * m.bodies[b].mass * s[b].v.squaredNorm();
    t += 0.5 * s[b].omega.dot(m.bodies[b].inertia * s[b].omega);
  }
  return t;
}

inline double potential_energy(const Mechanism& m, const std::vector<BodyState>& s) {
  double v = 0.0;
  for (int b = 0; b < m.num_bodies(); ++b) v -= m.bodies[b].mass * m.gravity.dot(s[b].x);
  for (const auto& f : m.forces)
    if (f.kind == ForceKind::Spring) v += spring_potential(f, state_of(s, f.body_a), state_of(s, f.body_b));
  return v;
}

inline double total_energy(const Mechanism& m, const std::vector<BodyState>& s) {
  return kinetic_energy(m, s) + potential_energy(m, s);
}

/// Angular momentum (global) carried by the step q_k -> q_k1 with angular
/// velocity omega_k: vec(q_k1 (J omega_k)^ q_k^-1).
inline Vec3 discrete_angular_momentum(const Mat3& J, const UnitQuaternion& q_k, const UnitQuaternion& q_k1,
                                      const Vec3& omega_k) {
  return Vmat() * qprod(qprod(q_k1.coeffs(), expand(J * omega_k)), q_k.inverse().coeffs());
}

// ---------------------------------------------------------------------------
// Layout of the unknown vector on the (loop-opened) graph

struct Slot {
  int node = 0;
  int local = 0;
  int dim = 0;
};

class SystemLayout {
 public:
  explicit SystemLayout(const Mechanism& m) : mgraph_(build_graph(m)), opening_(open_loops(mgraph_.graph)) {
    const Graph& g = opening_.graph;
    ordering_ = dfs_order(g);
    node_offset_.assign(g.size() + 1, 0);
    for (int i = 0; i < g.size(); ++i) node_offset_[i + 1] = node_offset_[i] + g.dim(i);

    std::vector<int> local(mgraph_.graph.size(), 0);
    for (const auto& grp : opening_.groups) {
      int acc = 0;
      for (int o : grp) {
        local[o] = acc;
        acc += mgraph_.graph.dim(o);
      }
    }
    auto slot = [&](int o) { return Slot{opening_.node_of[o], local[o], mgraph_.graph.dim(o)}; };
    for (int n : mgraph_.body_node) bodies_.push_back(slot(n));
    for (int n : mgraph_.joint_node) joints_.push_back(slot(n));
    for (int n : mgraph_.contact_node) contacts_.push_back(slot(n));

    cone_.assign(size(), 0);
    for (std::size_t c = 0; c < contacts_.size(); ++c) {
      const int o = offset(contacts_[c]);
      for (int k = 0; k < contacts_[c].dim; ++k) cone_[o + k] = 1;
      const int nf2 = (contacts_[c].dim - 4) / 2;
      pairs_.emplace_back(o + 1, o);  // s_phi, gamma
      if (contacts_[c].dim > 2) {
        pairs_.emplace_back(o + 3, o + 2);  // s_psi, psi
        for (int k = 0; k < nf2; ++k) pairs_.emplace_back(o + 4 + k, o + 4 + nf2 + k);
      }
    }
  }

  [[nodiscard]] const MechanismGraph& mechanism_graph() const { return mgraph_; }
  [[nodiscard]] const LoopOpening& opening() const { return opening_; }
  [[nodiscard]] const Graph& graph() const { return opening_.graph; }
  [[nodiscard]] const GraphOrdering& ordering() const { return ordering_; }
  [[nodiscard]] int size() const { return node_offset_.back(); }
  [[nodiscard]] int offset(const Slot& s) const { return node_offset_[s.node] + s.local; }
  [[nodiscard]] const Slot& body(int b) const { return bodies_.at(b); }
  [[nodiscard]] const Slot& joint(int j) const { return joints_.at(j); }
  [[nodiscard]] const Slot& contact(int c) const { return contacts_.at(c); }
  [[nodiscard]] const std::vector<char>& cone_mask() const { return cone_; }
  /// (slack, dual) index pairs whose product is driven to mu.
  [[nodiscard]] const std::vector<std::pair<int, int>>& complementarity_pairs() const { return pairs_; }

  /// Zero matrix with the graph pattern plus the ordering's fill blocks.
  [[nodiscard]] BlockSparseMatrix make_matrix() const {
    auto F = BlockSparseMatrix::with_pattern(graph());
    allocate_fill(F, ordering_);
    return F;
  }

 private:
  MechanismGraph mgraph_;
  LoopOpening opening_;
  GraphOrdering ordering_;
  std::vector<int> node_offset_;
  std::vector<Slot> bodies_, joints_, contacts_;
  std::vector<char> cone_;
  std::vector<std::pair<int, int>> pairs_;
};

// ---------------------------------------------------------------------------
// Step context: everything fixed during one implicit solve

struct ContactTerms {
  int nf = 0;
  double cf = 0.0;
  // Per participant (body, other): N row and signed friction map, both at z1.
  Eigen::Matrix<double, 1, 6> N_body, N_other;
  MatX B_body, B_other;  // 2nf x 6, other already negated
};

struct StepContext {
  double dt = 0.01;
  std::vector<BodyState> z0;  // states at k: x0, q0, v0, omega0
  std::vector<BodyState> z1;  // x1, q1 from the update rule
  std::vector<Vec6> constant_rows;  // [grad_x V - f; grad^r V - 2 tau] at z1
  std::vector<JointJacobian> G;     // at z1
  std::vector<ContactTerms> contact;
  std::vector<Eigen::Matrix<double, 12, 12>> damper_SK;  // S K at z1 per force element
};

inline Vec6 torque_scaled(const Wrench& w) {
  Vec6 r;
  r << w.force, 2.0 * w.torque;
  return r;
}

/// Builds z1 and the constant terms for stepping from `states` (z0, zdot0).
inline StepContext make_step_context(const Mechanism& m, const std::vector<BodyState>& states, double dt) {
  if (!(dt > 0.0)) throw Error("time step must be positive");
  StepContext ctx;
  ctx.dt = dt;
  ctx.z0 = states;
  ctx.z1.reserve(states.size());
  for (const auto& s : states) ctx.z1.push_back(advance_configuration(s, dt));
  const auto& z1 = ctx.z1;

  ctx.constant_rows.assign(m.num_bodies(), Vec6::Zero());
  for (int b = 0; b < m.num_bodies(); ++b) ctx.constant_rows[b].head<3>() = gravity_gradient(m.bodies[b], m.gravity);
  auto add_rows = [&](int b, const Vec6& r) {
    if (b != kWorld) ctx.constant_rows[b] += r;
  };
  ctx.damper_SK.resize(m.forces.size());
  for (std::size_t i = 0; i < m.forces.size(); ++i) {
    const auto& f = m.forces[i];
    switch (f.kind) {
      case ForceKind::Spring: {
        const auto [ga, gb] = spring_gradient(f, state_of(z1, f.body_a), state_of(z1, f.body_b));
        add_rows(f.body_a, ga);
        add_rows(f.body_b, gb);
        break;
      }
      case ForceKind::Damper: {
        Eigen::Matrix<double, 12, 12> S = Eigen::Matrix<double, 12, 12>::Identity();
        S.block<3, 3>(3, 3) *= 2.0;
        S.block<3, 3>(9, 9) *= 2.0;
        ctx.damper_SK[i] = S * damper_matrix(f, state_of(z1, f.body_a), state_of(z1, f.body_b));
        break;
      }
      case ForceKind::Actuator: {
        const auto& j = m.joints[f.joint];
        const auto [wa, wb] = joint_actuator_wrench(j, state_of(z1, j.parent), z1[j.child], f.force, f.torque);
        add_rows(j.parent, -torque_scaled(wa));
        add_rows(j.child, -torque_scaled(wb));
        break;
      }
      case ForceKind::External: {
        add_rows(f.body_b, -torque_scaled(Wrench{f.force, f.torque}));
        break;
      }
    }
  }

  for (const auto& j : m.joints) ctx.G.push_back(joint_jacobian(j, state_of(z1, j.parent), z1[j.child]));

  for (const auto& c : m.contacts) {
    ContactTerms t;
    t.nf = c.nf;
    t.cf = c.cf;
    const BodyState& sb = z1[c.body];
    const BodyState& so = state_of(z1, c.other);
    const auto d = gap_derivative(c, sb, so);
    t.N_body << d.dx_body, d.dq_body * Lmat(sb.q) * Vmat().transpose();
    t.N_other << d.dx_other, d.dq_other * Lmat(so.q) * Vmat().transpose();
    if (c.frictional()) {
      const auto fb = friction_basis(c, sb.q, surface_point(c, sb.q));
      const auto fo = friction_basis(c, so.q, c.p_other);
      t.B_body.resize(2 * c.nf, 6);
      t.B_other.resize(2 * c.nf, 6);
      t.B_body << fb.Bx, fb.Bq;
      t.B_other << -fo.Bx, -fo.Bq;
    }
    ctx.contact.push_back(std::move(t));
  }
  return ctx;
}

// ---------------------------------------------------------------------------
// Residual and Jacobian

namespace detail {

inline Eigen::Matrix<double, 6, 1> zdot_of(const VecX& s, const SystemLayout& L, int b) {
  return s.segment<6>(L.offset(L.body(b)));
}

inline BodyState next_state(const BodyState& z1, const Eigen::Matrix<double, 6, 1>& zd, double dt) {
  BodyState z2 = z1;
  z2.v = zd.head<3>();
  z2.omega = zd.tail<3>();
  return advance_configuration(z2, dt);
}

// Dynamics rows map generalized forces with torques doubled.
inline MatX double_rotation_cols(MatX B) {
  B.rightCols(3) *= 2.0;
  return B;
}

inline void check_cone(const SystemLayout& L, const VecX& s) {
  const auto& mask = L.cone_mask();
  for (int i = 0; i < L.size(); ++i)
    if (mask[i] && !(s[i] > 0.0)) throw InfeasiblePoint("cone coordinate " + std::to_string(i) + " is not positive");
}

}  // namespace detail

/// All z2 = z2(zdot1) for the candidate s.
inline std::vector<BodyState> next_states(const Mechanism& m, const SystemLayout& L, const StepContext& ctx,
                                          const VecX& s) {
  std::vector<BodyState> z2;
  z2.reserve(m.num_bodies());
  for (int b = 0; b < m.num_bodies(); ++b) z2.push_back(detail::next_state(ctx.z1[b], detail::zdot_of(s, L, b), ctx.dt));
  return z2;
}

inline VecX assemble_residual(const Mechanism& m, const SystemLayout& L, const StepContext& ctx, const VecX& s,
                              double mu) {
  if (s.size() != L.size()) throw Error("unknown vector has wrong dimension");
  detail::check_cone(L, s);
  VecX r = VecX::Zero(L.size());
  const double dt = ctx.dt;
  const auto z2 = next_states(m, L, ctx, s);

  for (int b = 0; b < m.num_bodies(); ++b) {
    const auto zd = detail::zdot_of(s, L, b);
    const auto& body = m.bodies[b];
    auto rb = r.segment<6>(L.offset(L.body(b)));
    rb.head<3>() = d0_translational(body.mass, ctx.z0[b].x, ctx.z1[b].x, zd.head<3>(), Vec3::Zero(), Vec3::Zero(), dt);
    rb.tail<3>() = d0_rotational(body.inertia, ctx.z0[b].q, ctx.z1[b].q, zd.tail<3>(), Vec3::Zero(), Vec3::Zero(), dt);
    rb += ctx.constant_rows[b];
  }

  for (std::size_t i = 0; i < m.forces.size(); ++i) {
    const auto& f = m.forces[i];
    if (f.kind != ForceKind::Damper) continue;
    Eigen::Matrix<double, 12, 1> zz = Eigen::Matrix<double, 12, 1>::Zero();
    if (f.body_a != kWorld) zz.head<6>() = detail::zdot_of(s, L, f.body_a);
    zz.tail<6>() = detail::zdot_of(s, L, f.body_b);
    const Eigen::Matrix<double, 12, 1> w = ctx.damper_SK[i] * zz;
    if (f.body_a != kWorld) r.segment<6>(L.offset(L.body(f.body_a))) -= w.head<6>();
    r.segment<6>(L.offset(L.body(f.body_b))) -= w.tail<6>();
  }

  for (std::size_t ji = 0; ji < m.joints.size(); ++ji) {
    const auto& j = m.joints[ji];
    const int o = L.offset(L.joint(static_cast<int>(ji)));
    const VecX lambda = s.segment(o, j.rows());
    if (j.parent != kWorld) r.segment<6>(L.offset(L.body(j.parent))) -= ctx.G[ji].parent.transpose() * lambda;
    r.segment<6>(L.offset(L.body(j.child))) -= ctx.G[ji].child.transpose() * lambda;
    r.segment(o, j.rows()) = joint_residual(j, state_of(z2, j.parent), z2[j.child]);
  }

  for (std::size_t ci = 0; ci < m.contacts.size(); ++ci) {
    const auto& c = m.contacts[ci];
    const auto& t = ctx.contact[ci];
    const int o = L.offset(L.contact(static_cast<int>(ci)));
    const double gamma = s[o], sphi = s[o + 1];
    auto rbody = r.segment<6>(L.offset(L.body(c.body)));
    rbody -= t.N_body.transpose() * gamma;
    if (c.other != kWorld) r.segment<6>(L.offset(L.body(c.other))) -= t.N_other.transpose() * gamma;
    r[o] = sphi - contact_gap(c, z2[c.body], state_of(z2, c.other));
    r[o + 1] = sphi * gamma - mu;
    if (!c.frictional()) continue;
    const int n2 = 2 * c.nf;
    const double psi = s[o + 2], spsi = s[o + 3];
    const VecX beta = s.segment(o + 4, n2);
    const VecX eta = s.segment(o + 4 + n2, n2);
    rbody -= detail::double_rotation_cols(t.B_body).transpose() * beta;
    VecX vel = t.B_body * detail::zdot_of(s, L, c.body);
    if (c.other != kWorld) {
      r.segment<6>(L.offset(L.body(c.other))) -= detail::double_rotation_cols(t.B_other).transpose() * beta;
      vel += t.B_other * detail::zdot_of(s, L, c.other);
    }
    r.segment(o + 4, n2) = vel + VecX::Constant(n2, psi) - eta;
    r[o + 2] = spsi - (c.cf * gamma - beta.sum());
    r[o + 3] = spsi * psi - mu;
    r.segment(o + 4 + n2, n2) = beta.cwiseProduct(eta) - VecX::Constant(n2, mu);
  }
  return r;
}

namespace detail {

inline void add_block(BlockSparseMatrix& F, const Slot& a, const Slot& b, const MatX& m) {
  F.block(a.node, b.node).block(a.local, b.local, m.rows(), m.cols()) += m;
}

// d z2 / d zdot1 as [x2; q2] (7x6).
inline Eigen::Matrix<double, 7, 6> dz2_dzdot(const BodyState& z1, const Vec3& omega1, double dt) {
  Eigen::Matrix<double, 7, 6> d = Eigen::Matrix<double, 7, 6>::Zero();
  d.topLeftCorner<3, 3>() = dt * Mat3::Identity();
  d.bottomRightCorner<4, 3>() = dstep_orientation_domega(z1.q, omega1, dt);
  return d;
}

}  // namespace detail

/// Writes F = df/ds into a matrix from SystemLayout::make_matrix().
inline void assemble_jacobian(const Mechanism& m, const SystemLayout& L, const StepContext& ctx, const VecX& s,
                              double mu, BlockSparseMatrix& F) {
  (void)mu;
  detail::check_cone(L, s);
  F.set_zero();
  const double dt = ctx.dt;
  const auto z2 = next_states(m, L, ctx, s);

  for (int b = 0; b < m.num_bodies(); ++b) {
    const auto zd = detail::zdot_of(s, L, b);
    Mat6 d = Mat6::Zero();
    d.topLeftCorner<3, 3>() = m.bodies[b].mass / dt * Mat3::Identity();
    d.bottomRightCorner<3, 3>() = d0_rotational_jacobian(m.bodies[b].inertia, zd.tail<3>(), dt);
    detail::add_block(F, L.body(b), L.body(b), d);
  }

  for (std::size_t i = 0; i < m.forces.size(); ++i) {
    const auto& f = m.forces[i];
    if (f.kind != ForceKind::Damper) continue;
    const auto& SK = ctx.damper_SK[i];
    const Slot& sb = L.body(f.body_b);
    detail::add_block(F, sb, sb, -SK.bottomRightCorner<6, 6>());
    if (f.body_a != kWorld) {
      const Slot& sa = L.body(f.body_a);
      detail::add_block(F, sa, sa, -SK.topLeftCorner<6, 6>());
      detail::add_block(F, sa, sb, -SK.topRightCorner<6, 6>());
      detail::add_block(F, sb, sa, -SK.bottomLeftCorner<6, 6>());
    }
  }

  auto dg_dzdot = [&](const Eigen::Matrix<double, 6, 3>& dx, const Eigen::Matrix<double, 6, 4>& dq, int b) {
    Eigen::Matrix<double, 6, 7> dz;
    dz << dx, dq;
    return Eigen::Matrix<double, 6, 6>(dz * detail::dz2_dzdot(ctx.z1[b], detail::zdot_of(s, L, b).tail<3>(), dt));
  };

  for (std::size_t ji = 0; ji < m.joints.size(); ++ji) {
    const auto& j = m.joints[ji];
    const Slot& sj = L.joint(static_cast<int>(ji));
    const MatX sel = joint_selection(j);
    const auto d = constraint_derivative(j, state_of(z2, j.parent), z2[j.child]);
    detail::add_block(F, L.body(j.child), sj, -ctx.G[ji].child.transpose());
    detail::add_block(F, sj, L.body(j.child), sel * dg_dzdot(d.dxb, d.dqb, j.child));
    if (j.parent != kWorld) {
      detail::add_block(F, L.body(j.parent), sj, -ctx.G[ji].parent.transpose());
      detail::add_block(F, sj, L.body(j.parent), sel * dg_dzdot(d.dxa, d.dqa, j.parent));
    }
  }

  for (std::size_t ci = 0; ci < m.contacts.size(); ++ci) {
    const auto& c = m.contacts[ci];
    const auto& t = ctx.contact[ci];
    const Slot& sc = L.contact(static_cast<int>(ci));
    const int o = L.offset(sc);
    const double gamma = s[o], sphi = s[o + 1];
    const int dim = sc.dim;

    MatX D = MatX::Zero(dim, dim);
    D(0, 1) = 1.0;
    D(1, 0) = sphi;
    D(1, 1) = gamma;

    const auto gd = gap_derivative(c, z2[c.body], state_of(z2, c.other));
    auto gap_rows = [&](const RowVec3& dx, const RowVec4& dq, int b) {
      Eigen::Matrix<double, 1, 7> dz;
      dz << dx, dq;
      return Eigen::Matrix<double, 1, 6>(dz * detail::dz2_dzdot(ctx.z1[b], detail::zdot_of(s, L, b).tail<3>(), dt));
    };

    auto couple = [&](int b, const Eigen::Matrix<double, 1, 6>& N, const MatX& B, const Eigen::Matrix<double, 1, 6>& dphi) {
      MatX up = MatX::Zero(6, dim);
      MatX down = MatX::Zero(dim, 6);
      up.col(0) = -N.transpose();
      down.row(0) = -dphi;
      if (c.frictional()) {
        const int n2 = 2 * c.nf;
        up.middleCols(4, n2) = -detail::double_rotation_cols(B).transpose();
        down.middleRows(4, n2) = B;
      }
      detail::add_block(F, L.body(b), sc, up);
      detail::add_block(F, sc, L.body(b), down);
    };
    couple(c.body, t.N_body, t.B_body, gap_rows(gd.dx_body, gd.dq_body, c.body));
    if (c.other != kWorld) couple(c.other, t.N_other, t.B_other, gap_rows(gd.dx_other, gd.dq_other, c.other));

    if (c.frictional()) {
      const int n2 = 2 * c.nf;
      const double psi = s[o + 2], spsi = s[o + 3];
      // velocity rows (o+4 ..): d/dpsi = 1, d/deta = -I
      D.block(4, 2, n2, 1).setOnes();
      D.block(4, 4 + n2, n2, n2) = -MatX::Identity(n2, n2);
      // s_psi row (local 2)
      D(2, 0) = -c.cf;
      D(2, 3) = 1.0;
      D.block(2, 4, 1, n2).setOnes();
      // s_psi psi row (local 3)
      D(3, 2) = spsi;
      D(3, 3) = psi;
      // beta .* eta rows
      for (int k = 0; k < n2; ++k) {
        D(4 + n2 + k, 4 + k) = s[o + 4 + n2 + k];
        D(4 + n2 + k, 4 + n2 + k) = s[o + 4 + k];
      }
    }
    detail::add_block(F, sc, sc, D);
  }
}

// ---------------------------------------------------------------------------
// Initial guesses

/// Unknowns for a cold start: zdot1 = zdot0, lambda = 0, cone coordinates 1.
inline VecX initial_unknowns(const Mechanism& m, const SystemLayout& L, const std::vector<BodyState>& states) {
  VecX s = VecX::Zero(L.size());
  for (int b = 0; b < m.num_bodies(); ++b) {
    const int o = L.offset(L.body(b));
    s.segment<3>(o) = states[b].v;
    s.segment<3>(o + 3) = states[b].omega;
  }
  const auto& mask = L.cone_mask();
  for (int i = 0; i < L.size(); ++i)
    if (mask[i]) s[i] = 1.0;
  return s;
}

/// Writes the velocities of s back into body states (z1 configuration).
inline std::vector<BodyState> states_from_solution(const Mechanism& m, const SystemLayout& L, const StepContext& ctx,
                                                   const VecX& s) {
  std::vector<BodyState> out = ctx.z1;
  for (int b = 0; b < m.num_bodies(); ++b) {
    const auto zd = detail::zdot_of(s, L, b);
    out[b].v = zd.head<3>();
    out[b].omega = zd.tail<3>();
  }
  return out;
}

}  // namespace maxcoord
