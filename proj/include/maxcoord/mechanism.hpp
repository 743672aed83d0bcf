// Bodies, joints, contacts and force elements, with the constraint functions,
// their derivatives and the wrenches they produce.
#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "maxcoord/errors.hpp"
#include "maxcoord/graph_ldu.hpp"
#include "maxcoord/quat.hpp"

namespace maxcoord {

using Mat32 = Eigen::Matrix<double, 3, 2>;
using Mat36 = Eigen::Matrix<double, 3, 6>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using RowVec3 = Eigen::RowVector3d;
using RowVec4 = Eigen::RowVector4d;

/// Parent index of joints (and "other" index of contacts) attached to the
/// fixed global frame.
inline constexpr int kWorld = -1;

struct Body {
  int id = 0;
  std::string name;
  double mass = 1.0;
  Mat3 inertia = Mat3::Identity();  // body frame, about the center of mass
};

/// x, v global; omega in the body frame.
struct BodyState {
  Vec3 x = Vec3::Zero();
  UnitQuaternion q;
  Vec3 v = Vec3::Zero();
  Vec3 omega = Vec3::Zero();
};

inline const BodyState& world_state() {
  static const BodyState w{};
  return w;
}

inline const BodyState& state_of(const std::vector<BodyState>& states, int body) {
  return body == kWorld ? world_state() : states.at(body);
}

// ---------------------------------------------------------------------------
// Selection matrices

struct AxisBasis {
  Mat32 V12;
  Vec3 V3;
};

/// Orthonormal [V1 V2 V3] from the SVD of axis^x, with V3 along +axis.
inline AxisBasis selection_from_axis(const Vec3& axis) {
  const double n = axis.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw DegenerateAxis("axis must be a nonzero finite vector");
  const Vec3 a = axis / n;
  Eigen::JacobiSVD<Mat3> svd(skew(a), Eigen::ComputeFullV);
  Mat3 V = svd.matrixV();
  // The null direction of a^x is the last right singular vector.
  if (V.col(2).dot(a) < 0.0) V.col(2) = -V.col(2);
  V.col(2) = a;
  // Re-orthonormalize the tangents against the exact axis.
  Vec3 v1 = V.col(0) - V.col(0).dot(a) * a;
  v1.normalize();
  Vec3 v2 = a.cross(v1);
  AxisBasis b;
  b.V12.col(0) = v1;
  b.V12.col(1) = v2;
  b.V3 = a;
  return b;
}

// ---------------------------------------------------------------------------
// Joints

enum class JointType {
  Fixed,
  Prismatic,
  PlanarFixedOrientation,
  FixedOrientation,
  Revolute,
  Cylindrical,
  PlanarRotationAlongAxis,
  RotationAlongAxisFreeMovement,
  Spherical,
  CylindricalFreeOrientation,
  PlanarFreeOrientation,
  Floating,
};

/// Restriction of one constraint part: none, to a plane, to an axis, full.
enum class Restriction { None, Plane, Axis, Full };

struct JointSpec {
  JointType type;
  std::string_view name;
  Restriction translational;
  Restriction rotational;
};

inline constexpr std::array<JointSpec, 12> kJointTable{{
    {JointType::Fixed, "fixed", Restriction::Full, Restriction::Full},
    {JointType::Prismatic, "prismatic", Restriction::Axis, Restriction::Full},
    {JointType::PlanarFixedOrientation, "planar-fixed-orientation", Restriction::Plane, Restriction::Full},
    {JointType::FixedOrientation, "fixed-orientation", Restriction::None, Restriction::Full},
    {JointType::Revolute, "revolute", Restriction::Full, Restriction::Axis},
    {JointType::Cylindrical, "cylindrical", Restriction::Axis, Restriction::Axis},
    {JointType::PlanarRotationAlongAxis, "planar-rotation-along-axis", Restriction::Plane, Restriction::Axis},
    {JointType::RotationAlongAxisFreeMovement, "rotation-along-axis-free-movement", Restriction::None,
     Restriction::Axis},
    {JointType::Spherical, "spherical", Restriction::Full, Restriction::None},
    {JointType::CylindricalFreeOrientation, "cylindrical-free-orientation", Restriction::Axis, Restriction::None},
    {JointType::PlanarFreeOrientation, "planar-free-orientation", Restriction::Plane, Restriction::None},
    {JointType::Floating, "floating", Restriction::None, Restriction::None},
}};

inline const JointSpec& joint_spec(JointType t) {
  for (const auto& s : kJointTable)
    if (s.type == t) return s;
  throw ModelError("unknown joint type");
}

inline std::string joint_type_name(JointType t) { return std::string(joint_spec(t).name); }

inline JointType joint_type_from_name(std::string_view name) {
  for (const auto& s : kJointTable)
    if (s.name == name) return s.type;
  throw ModelError("unknown joint type '" + std::string(name) + "'");
}

/// D (constrained directions) and C (free directions) for one restriction.
inline std::pair<MatX, MatX> selection_pair(Restriction r, const AxisBasis& b) {
  switch (r) {
    case Restriction::None:
      return {MatX(3, 0), MatX(Mat3::Identity())};
    case Restriction::Plane:
      return {MatX(b.V3), MatX(b.V12)};
    case Restriction::Axis:
      return {MatX(b.V12), MatX(b.V3)};
    case Restriction::Full:
      return {MatX(Mat3::Identity()), MatX(3, 0)};
  }
  throw ModelError("bad restriction");
}

struct Joint {
  std::string name;
  JointType type = JointType::Fixed;
  int parent = kWorld;
  int child = 0;
  Vec3 p_a = Vec3::Zero();  // anchor in the parent frame
  Vec3 p_b = Vec3::Zero();  // anchor in the child frame
  Vec3 axis = Vec3::UnitZ();  // parent frame
  UnitQuaternion q_off;
  MatX D_T, D_R, C_T, C_R;

  [[nodiscard]] int rows() const { return static_cast<int>(D_T.cols() + D_R.cols()); }
};

inline Joint make_joint(JointType type, int parent, int child, const Vec3& p_a, const Vec3& p_b,
                        const Vec3& axis = Vec3::UnitZ(), const UnitQuaternion& q_off = {},
                        std::string name = {}) {
  Joint j;
  j.name = std::move(name);
  j.type = type;
  j.parent = parent;
  j.child = child;
  j.p_a = p_a;
  j.p_b = p_b;
  j.axis = axis;
  j.q_off = q_off;
  const auto basis = selection_from_axis(axis);
  const auto& spec = joint_spec(type);
  std::tie(j.D_T, j.C_T) = selection_pair(spec.translational, basis);
  std::tie(j.D_R, j.C_R) = selection_pair(spec.rotational, basis);
  return j;
}

/// Anchor offset expressed in the parent frame.
inline Vec3 g_translational(const BodyState& a, const BodyState& b, const Joint& j) {
  const Vec3 pb = b.x + rotate(b.q, j.p_b);
  return rotate_inverse(a.q, pb - a.x) - j.p_a;
}

inline Vec3 g_rotational(const UnitQuaternion& qa, const UnitQuaternion& qb, const UnitQuaternion& qoff) {
  return Vmat() * qprod(qprod(qa.inverse().coeffs(), qb.coeffs()), qoff.inverse().coeffs());
}

inline VecX joint_residual(const Joint& j, const BodyState& a, const BodyState& b) {
  VecX r(j.rows());
  r << j.D_T.transpose() * g_translational(a, b, j), j.D_R.transpose() * g_rotational(a.q, b.q, j.q_off);
  return r;
}

inline VecX joint_minimal_coords(const Joint& j, const BodyState& a, const BodyState& b) {
  VecX r(j.C_T.cols() + j.C_R.cols());
  r << j.C_T.transpose() * g_translational(a, b, j), j.C_R.transpose() * g_rotational(a.q, b.q, j.q_off);
  return r;
}

/// Derivatives of [g_T; g_R] with respect to x and the raw 4-vector q of
/// both bodies (parent entries are meaningless for WORLD parents).
struct ConstraintDerivative {
  Eigen::Matrix<double, 6, 3> dxa, dxb;
  Eigen::Matrix<double, 6, 4> dqa, dqb;
};

inline ConstraintDerivative constraint_derivative(const Joint& j, const BodyState& a, const BodyState& b) {
  ConstraintDerivative d;
  const Mat3 Ra = rotation_matrix(a.q);
  const Vec3 rel = b.x + rotate(b.q, j.p_b) - a.x;
  d.dxa.setZero();
  d.dxb.setZero();
  d.dqa.setZero();
  d.dqb.setZero();
  d.dxa.topRows<3>() = -Ra.transpose();
  d.dxb.topRows<3>() = Ra.transpose();
  d.dqa.topRows<3>() = drotate_inverse_dq(a.q, rel);
  d.dqb.topRows<3>() = Ra.transpose() * drotate_dq(b.q, j.p_b);
  const Vec4 qa_inv = a.q.inverse().coeffs();
  const Vec4 qoff_inv = j.q_off.inverse().coeffs();
  d.dqb.bottomRows<3>() = Vmat() * Lmat(qa_inv) * Rmat(qoff_inv);
  d.dqa.bottomRows<3>() = Vmat() * Rmat(qprod(b.q.coeffs(), qoff_inv)) * Tmat();
  return d;
}

/// Stacked selection blockdiag(D_T, D_R)^T.
inline MatX joint_selection(const Joint& j) {
  MatX s = MatX::Zero(j.rows(), 6);
  s.topLeftCorner(j.D_T.cols(), 3) = j.D_T.transpose();
  s.bottomRightCorner(j.D_R.cols(), 3) = j.D_R.transpose();
  return s;
}

/// G blocks [dg/dx, dg/d^r q] (rows x 6) for parent and child.
struct JointJacobian {
  MatX parent;
  MatX child;
};

inline JointJacobian joint_jacobian(const Joint& j, const BodyState& a, const BodyState& b) {
  const auto d = constraint_derivative(j, a, b);
  const MatX sel = joint_selection(j);
  JointJacobian out;
  out.parent.resize(j.rows(), 6);
  out.child.resize(j.rows(), 6);
  out.parent << sel * d.dxa, sel * rotational_jacobian(d.dqa, a.q);
  out.child << sel * d.dxb, sel * rotational_jacobian(d.dqb, b.q);
  return out;
}

// ---------------------------------------------------------------------------
// Contacts

/// Point contact.  `body` carries point p; `other` is WORLD (a plane through
/// p_other with the given normal) or a second body carrying point p_other.
/// The gap is normal^T (point_body - point_other) - radius; a positive
/// radius turns p into the center of a sphere touching along -normal.
struct Contact {
  std::string name;
  int body = 0;
  Vec3 p = Vec3::Zero();
  double cf = 0.0;
  int nf = 2;
  Vec3 normal = Vec3::UnitZ();
  int other = kWorld;
  Vec3 p_other = Vec3::Zero();
  double radius = 0.0;

  [[nodiscard]] int rows() const { return cf > 0.0 ? 4 + 4 * nf : 2; }
  [[nodiscard]] bool frictional() const { return cf > 0.0; }
};

inline Vec3 contact_point(const BodyState& s, const Vec3& p) { return s.x + rotate(s.q, p); }

inline double contact_gap(const Contact& c, const BodyState& body, const BodyState& other) {
  return c.normal.dot(contact_point(body, c.p) - contact_point(other, c.p_other)) - c.radius;
}

/// Body-frame point where friction acts: p, or the lowest sphere point.
inline Vec3 surface_point(const Contact& c, const UnitQuaternion& q) {
  return c.p - c.radius * rotate_inverse(q, c.normal);
}

/// Gradient of the gap w.r.t. x and raw q of both participants.
struct GapDerivative {
  RowVec3 dx_body, dx_other;
  RowVec4 dq_body, dq_other;
};

inline GapDerivative gap_derivative(const Contact& c, const BodyState& body, const BodyState& other) {
  GapDerivative d;
  d.dx_body = c.normal.transpose();
  d.dx_other = -c.normal.transpose();
  d.dq_body = c.normal.transpose() * drotate_dq(body.q, c.p);
  d.dq_other = -c.normal.transpose() * drotate_dq(other.q, c.p_other);
  return d;
}

struct FrictionBasis {
  MatX Bx;  // 2nf x 3, rows +-b_i
  MatX Bq;  // 2nf x 3, rows (p x R^T b_i)^T
  VecX E;   // ones(2nf)
};

/// Tangent directions b_i, i = 0..nf-1, spread over half a turn.
inline std::vector<Vec3> friction_directions(const Vec3& normal, int nf) {
  if (nf < 1) throw ModelError("friction needs at least one direction pair");
  const auto basis = selection_from_axis(normal);
  std::vector<Vec3> b;
  for (int i = 0; i < nf; ++i) {
    const double t = M_PI * i / nf;
    b.push_back(std::cos(t) * basis.V12.col(0) + std::sin(t) * basis.V12.col(1));
  }
  return b;
}

inline FrictionBasis friction_basis(const Contact& c, const UnitQuaternion& q, const Vec3& p) {
  const auto dirs = friction_directions(c.normal, c.nf);
  FrictionBasis fb;
  fb.Bx.resize(2 * c.nf, 3);
  fb.Bq.resize(2 * c.nf, 3);
  const Mat3 Rt = rotation_matrix(q).transpose();
  for (int i = 0; i < c.nf; ++i) {
    fb.Bx.row(2 * i) = dirs[i].transpose();
    fb.Bx.row(2 * i + 1) = -dirs[i].transpose();
  }
  fb.Bq = (skew(p) * Rt * fb.Bx.transpose()).transpose();
  fb.E = VecX::Ones(2 * c.nf);
  return fb;
}

inline FrictionBasis friction_basis(const Contact& c, const UnitQuaternion& q) {
  return friction_basis(c, q, c.p);
}

// ---------------------------------------------------------------------------
// Force elements

enum class ForceKind { Spring, Damper, Actuator, External };

inline std::string force_kind_name(ForceKind k) {
  switch (k) {
    case ForceKind::Spring: return "spring";
    case ForceKind::Damper: return "damper";
    case ForceKind::Actuator: return "actuator";
    case ForceKind::External: return "external";
  }
  return "?";
}

inline ForceKind force_kind_from_name(std::string_view s) {
  if (s == "spring") return ForceKind::Spring;
  if (s == "damper") return ForceKind::Damper;
  if (s == "actuator") return ForceKind::Actuator;
  if (s == "external") return ForceKind::External;
  throw ModelError("unknown force element kind '" + std::string(s) + "'");
}

/// Springs and dampers connect anchor p_a on body_a (or WORLD) to anchor
/// p_b on body_b.  Actuators drive `joint` with force (global) and torque
/// (parent frame).  External wrenches act on body_b: force global, torque
/// in the body frame.
struct ForceElement {
  ForceKind kind = ForceKind::External;
  std::string name;
  int body_a = kWorld;
  int body_b = 0;
  Vec3 p_a = Vec3::Zero();
  Vec3 p_b = Vec3::Zero();
  double stiffness = 0.0;
  double damping = 0.0;          // translational, N s/m
  double angular_damping = 0.0;  // N m s/rad
  int joint = -1;
  Vec3 force = Vec3::Zero();
  Vec3 torque = Vec3::Zero();
};

struct Wrench {
  Vec3 force = Vec3::Zero();   // global
  Vec3 torque = Vec3::Zero();  // body frame
};

/// Wrench pair of a joint actuator (parent, child).
inline std::pair<Wrench, Wrench> joint_actuator_wrench(const Joint& j, const BodyState& a, const BodyState& b,
                                                       const Vec3& force, const Vec3& torque_parent) {
  const Mat3 Ra = rotation_matrix(a.q);
  const Mat3 Rb = rotation_matrix(b.q);
  Wrench wa, wb;
  wa.force = -force;
  wa.torque = -(torque_parent + j.p_a.cross(Ra.transpose() * force));
  wb.force = force;
  wb.torque = Rb.transpose() * Ra * torque_parent + j.p_b.cross(Rb.transpose() * force);
  return {wa, wb};
}

inline Vec3 gravity_gradient(const Body& body, const Vec3& gravity) { return -body.mass * gravity; }

/// Anchor displacement (global) between the two ends of a spring or damper.
inline Vec3 anchor_displacement(const ForceElement& e, const BodyState& a, const BodyState& b) {
  return contact_point(b, e.p_b) - contact_point(a, e.p_a);
}

inline double spring_potential(const ForceElement& e, const BodyState& a, const BodyState& b) {
  return 0.5 * e.stiffness * anchor_displacement(e, a, b).squaredNorm();
}

/// Gradients of the spring potential: [grad_x; grad^r_q] for each end.
inline std::pair<Vec6, Vec6> spring_gradient(const ForceElement& e, const BodyState& a, const BodyState& b) {
  const Vec3 f = e.stiffness * anchor_displacement(e, a, b);
  Vec6 ga, gb;
  ga << -f, rotational_gradient(-drotate_dq(a.q, e.p_a).transpose() * f, a.q);
  gb << f, rotational_gradient(drotate_dq(b.q, e.p_b).transpose() * f, b.q);
  return {ga, gb};
}

/// Anchor velocity map [I, -R p^x] (3x6) so that v_anchor = A zdot.
inline Mat36 anchor_velocity_map(const UnitQuaternion& q, const Vec3& p) {
  Mat36 A;
  A << Mat3::Identity(), -rotation_matrix(q) * skew(p);
  return A;
}

/// Damper matrix K over [zdot_a; zdot_b] such that the wrench pair is K zdot
/// (torques in body frames).
inline Eigen::Matrix<double, 12, 12> damper_matrix(const ForceElement& e, const BodyState& a,
                                                   const BodyState& b) {
  Eigen::Matrix<double, 3, 12> A, W;
  A << -anchor_velocity_map(a.q, e.p_a), anchor_velocity_map(b.q, e.p_b);
  W << Mat3::Zero(), -rotation_matrix(a.q), Mat3::Zero(), rotation_matrix(b.q);
  return -e.damping * A.transpose() * A - e.angular_damping * W.transpose() * W;
}

// ---------------------------------------------------------------------------
// Mechanism

struct Mechanism {
  std::string name;
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);
  std::vector<Body> bodies;
  std::vector<Joint> joints;
  std::vector<Contact> contacts;
  std::vector<ForceElement> forces;

  [[nodiscard]] int num_bodies() const { return static_cast<int>(bodies.size()); }

  /// Throws ModelError naming the first inconsistent component.
  void validate() const {
    auto body_ok = [&](int b, bool world_ok) {
      return (world_ok && b == kWorld) || (b >= 0 && b < num_bodies());
    };
    for (std::size_t i = 0; i < bodies.size(); ++i) {
      const auto& b = bodies[i];
      const std::string who = "body " + std::to_string(b.id);
      if (!(b.mass > 0.0) || !std::isfinite(b.mass)) throw ModelError(who + ": mass must be positive");
      if (!b.inertia.isApprox(b.inertia.transpose(), 1e-12))
        throw ModelError(who + ": inertia must be symmetric");
      Eigen::SelfAdjointEigenSolver<Mat3> es(b.inertia);
      if (!(es.eigenvalues().minCoeff() > 0.0)) throw ModelError(who + ": inertia must be positive definite");
    }
    for (std::size_t i = 0; i < joints.size(); ++i) {
      const auto& j = joints[i];
      const std::string who = "joint " + std::to_string(i) + (j.name.empty() ? "" : " '" + j.name + "'");
      if (!body_ok(j.parent, true)) throw ModelError(who + ": parent does not exist");
      if (!body_ok(j.child, false)) throw ModelError(who + ": child does not exist");
      if (j.parent == j.child) throw ModelError(who + ": parent and child coincide");
    }
    for (std::size_t i = 0; i < contacts.size(); ++i) {
      const auto& c = contacts[i];
      const std::string who = "contact " + std::to_string(i) + (c.name.empty() ? "" : " '" + c.name + "'");
      if (!body_ok(c.body, false)) throw ModelError(who + ": body does not exist");
      if (!body_ok(c.other, true) || c.other == c.body) throw ModelError(who + ": bad second body");
      if (!(c.cf >= 0.0)) throw ModelError(who + ": friction coefficient must be nonnegative");
      if (c.nf < 1) throw ModelError(who + ": nf must be at least 1");
      if (std::abs(c.normal.norm() - 1.0) > 1e-9) throw ModelError(who + ": normal must be unit length");
      if (!(c.radius >= 0.0)) throw ModelError(who + ": radius must be nonnegative");
    }
    for (std::size_t i = 0; i < forces.size(); ++i) {
      const auto& f = forces[i];
      const std::string who = "force " + std::to_string(i) + (f.name.empty() ? "" : " '" + f.name + "'");
      if (f.stiffness < 0.0 || f.damping < 0.0 || f.angular_damping < 0.0)
        throw ModelError(who + ": stiffness and damping must be nonnegative");
      switch (f.kind) {
        case ForceKind::Spring:
        case ForceKind::Damper:
          if (!body_ok(f.body_a, true) || !body_ok(f.body_b, false) || f.body_a == f.body_b)
            throw ModelError(who + ": bad attachment");
          break;
        case ForceKind::Actuator:
          if (f.joint < 0 || f.joint >= static_cast<int>(joints.size()))
            throw ModelError(who + ": joint does not exist");
          break;
        case ForceKind::External:
          if (!body_ok(f.body_b, false)) throw ModelError(who + ": body does not exist");
          break;
      }
    }
  }
};

/// Constraint graph: WORLD (only if some joint uses it), bodies, joints,
/// contacts, in that id order.  Joint nodes are mergeable.
struct MechanismGraph {
  Graph graph;
  int world_node = -1;
  std::vector<int> body_node;
  std::vector<int> joint_node;
  std::vector<int> contact_node;
};

inline MechanismGraph build_graph(const Mechanism& m) {
  m.validate();
  MechanismGraph g;
  const bool uses_world = std::any_of(m.joints.begin(), m.joints.end(),
                                      [](const Joint& j) { return j.parent == kWorld; });
  if (uses_world) g.world_node = g.graph.add_node(0);
  for (int b = 0; b < m.num_bodies(); ++b) g.body_node.push_back(g.graph.add_node(6));
  auto node_of_body = [&](int b) { return b == kWorld ? g.world_node : g.body_node[b]; };
  for (const auto& j : m.joints) {
    const int n = g.graph.add_node(j.rows(), true);
    g.joint_node.push_back(n);
    g.graph.add_edge(n, node_of_body(j.parent));
    g.graph.add_edge(n, node_of_body(j.child));
  }
  for (const auto& c : m.contacts) {
    const int n = g.graph.add_node(c.rows());
    g.contact_node.push_back(n);
    g.graph.add_edge(n, g.body_node[c.body]);
    if (c.other != kWorld) g.graph.add_edge(n, g.body_node[c.other]);
  }
  for (const auto& f : m.forces)
    if (f.kind == ForceKind::Damper && f.body_a != kWorld) g.graph.add_edge(g.body_node[f.body_a], g.body_node[f.body_b]);
  return g;
}

}  // namespace maxcoord
