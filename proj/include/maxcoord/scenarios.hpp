// Generators for the bundled experiment scenarios.
//
// Names: nlink-pendulum(n,revolute|spherical), double-pendulum,
// damped-pendulum, three-link-loop, box-drop, sphere-chain(n),
// four-link-segment-chain(m).  Arguments may also be given as
// "sphere-chain:3" or "nlink-pendulum:5:spherical".
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "maxcoord/errors.hpp"
#include "maxcoord/mechanism.hpp"
#include "maxcoord/mechanism_io.hpp"
#include "maxcoord/simulate.hpp"

namespace maxcoord {

using Scenario = MechanismFile;

namespace scenario_detail {

inline constexpr double kLinkWidth = 0.1;

/// Slender box along the local z axis.
inline Mat3 link_inertia(double mass, double length) {
  const double w2 = kLinkWidth * kLinkWidth;
  return Vec3(mass * (length * length + w2) / 12.0, mass * (length * length + w2) / 12.0, mass * 2.0 * w2 / 12.0)
      .asDiagonal();
}

inline int add_body(Scenario& sc, const std::string& name, double mass, const Mat3& inertia, const BodyState& s) {
  Body b;
  b.id = sc.mechanism.num_bodies() + 1;
  b.name = name;
  b.mass = mass;
  b.inertia = inertia;
  sc.mechanism.bodies.push_back(b);
  sc.states.push_back(s);
  return sc.mechanism.num_bodies() - 1;
}

/// Link hanging from `pivot` at angle theta about x (0 = straight down).
inline BodyState hanging_link(const Vec3& pivot, double theta, double length) {
  BodyState s;
  s.q = UnitQuaternion::from_axis_angle(Vec3::UnitX(), theta);
  s.x = pivot + 0.5 * length * Vec3(0.0, std::sin(theta), -std::cos(theta));
  return s;
}

inline Vec3 link_end(const Vec3& pivot, double theta, double length) {
  return pivot + length * Vec3(0.0, std::sin(theta), -std::cos(theta));
}

inline Scenario pendulum_chain(const std::string& name, const std::vector<double>& angles, JointType type) {
  Scenario sc;
  sc.mechanism.name = name;
  const double l = 1.0, m = 1.0;
  const int n = static_cast<int>(angles.size());
  // Pivot height chosen so the hanging rest pose has zero potential.
  Vec3 pivot(0.0, 0.0, 0.5 * n * l);
  const Vec3 top(0.0, 0.0, 0.5 * l), bottom(0.0, 0.0, -0.5 * l);
  for (int i = 0; i < n; ++i) {
    const int b = add_body(sc, "link" + std::to_string(i + 1), m, link_inertia(m, l), hanging_link(pivot, angles[i], l));
    const int parent = i == 0 ? kWorld : b - 1;
    sc.mechanism.joints.push_back(make_joint(type, parent, b, i == 0 ? pivot : bottom, top, Vec3::UnitX(),
                                             UnitQuaternion{}, "joint" + std::to_string(i + 1)));
    pivot = link_end(pivot, angles[i], l);
  }
  return sc;
}

}  // namespace scenario_detail

inline Scenario nlink_pendulum(int n, JointType type = JointType::Revolute) {
  if (n < 1) throw ModelError("nlink-pendulum needs at least one link");
  if (type != JointType::Revolute && type != JointType::Spherical)
    throw ModelError("nlink-pendulum supports revolute or spherical joints");
  auto sc = scenario_detail::pendulum_chain(
      "nlink-pendulum(" + std::to_string(n) + "," + joint_type_name(type) + ")", std::vector<double>(n, M_PI / 4),
      type);
  if (type == JointType::Spherical) sc.states[0].omega = Vec3(0.0, 0.0, 1.0);
  return sc;
}

inline Scenario double_pendulum() {
  return scenario_detail::pendulum_chain("double-pendulum", {M_PI / 4, M_PI / 2}, JointType::Revolute);
}

inline Scenario damped_pendulum() {
  auto sc = scenario_detail::pendulum_chain("damped-pendulum", {M_PI / 4}, JointType::Revolute);
  ForceElement d;
  d.kind = ForceKind::Damper;
  d.name = "joint-damper";
  d.body_a = kWorld;
  d.body_b = 0;
  d.angular_damping = 0.5;
  sc.mechanism.forces.push_back(d);
  sc.defaults.dt = 0.1;
  sc.defaults.steps = 200;
  return sc;
}

/// Parallelogram loop closed through the ground.
inline Scenario three_link_loop() {
  using namespace scenario_detail;
  Scenario sc;
  sc.mechanism.name = "three-link-loop";
  const double l1 = 1.0, l2 = std::sqrt(2.0) / 2, l3 = 1.0;
  const double theta = M_PI / 4;
  const Vec3 p1(0.0, 0.0, 0.0), p3(0.0, l2, 0.0);
  const Vec3 e1 = link_end(p1, theta, l1);
  const int b1 = add_body(sc, "link1", 1.0, link_inertia(1.0, l1), hanging_link(p1, theta, l1));
  const int b2 = add_body(sc, "link2", l2, link_inertia(l2, l2), hanging_link(e1, M_PI / 2, l2));
  const int b3 = add_body(sc, "link3", 1.0, link_inertia(1.0, l3), hanging_link(p3, theta, l3));
  auto& J = sc.mechanism.joints;
  const Vec3 ex = Vec3::UnitX();
  J.push_back(make_joint(JointType::Revolute, kWorld, b1, p1, Vec3(0, 0, l1 / 2), ex, {}, "pivot1"));
  J.push_back(make_joint(JointType::Spherical, b1, b2, Vec3(0, 0, -l1 / 2), Vec3(0, 0, l2 / 2), ex, {}, "joint12"));
  J.push_back(make_joint(JointType::Spherical, b2, b3, Vec3(0, 0, -l2 / 2), Vec3(0, 0, -l3 / 2), ex, {}, "joint23"));
  J.push_back(make_joint(JointType::Revolute, kWorld, b3, p3, Vec3(0, 0, l3 / 2), ex, {}, "pivot3"));
  sc.defaults.steps = 1000;
  return sc;
}

inline Scenario box_drop() {
  Scenario sc;
  sc.mechanism.name = "box-drop";
  const double a = 0.5, m = 1.0, gap = 0.4;
  BodyState s;
  s.x = Vec3(0.0, 0.0, gap + a / 2);
  const int b = scenario_detail::add_body(sc, "box", m, (m * a * a / 6.0) * Mat3::Identity(), s);
  for (int i = 0; i < 8; ++i) {
    Contact c;
    c.name = "corner" + std::to_string(i + 1);
    c.body = b;
    c.p = 0.5 * a * Vec3(i & 1 ? 1 : -1, i & 2 ? 1 : -1, i & 4 ? 1 : -1);
    c.cf = 0.5;
    c.nf = 2;
    sc.mechanism.contacts.push_back(c);
  }
  sc.defaults.steps = 200;
  return sc;
}

/// Spheres side by side along x, linked by spherical joints at touching
/// points, each resting on the ground.
inline Scenario sphere_chain(int n) {
  if (n < 1) throw ModelError("sphere-chain needs at least one sphere");
  Scenario sc;
  sc.mechanism.name = "sphere-chain(" + std::to_string(n) + ")";
  const double r = 0.25, m = 1.0, drop = 0.01;
  for (int i = 0; i < n; ++i) {
    BodyState s;
    s.x = Vec3(2.0 * r * i, 0.0, r + drop);
    const int b = scenario_detail::add_body(sc, "sphere" + std::to_string(i + 1), m,
                                            (0.4 * m * r * r) * Mat3::Identity(), s);
    if (i > 0)
      sc.mechanism.joints.push_back(make_joint(JointType::Spherical, b - 1, b, Vec3(r, 0, 0), Vec3(-r, 0, 0),
                                               Vec3::UnitZ(), {}, "joint" + std::to_string(i)));
    Contact c;
    c.name = "ground" + std::to_string(i + 1);
    c.body = b;
    c.radius = r;
    c.cf = 0.5;
    sc.mechanism.contacts.push_back(c);
  }
  for (auto& st : sc.states) st.v = Vec3(0.0, 0.5, 0.0);
  return sc;
}

/// Chain of rigid diamonds.  Each segment has links TL, LB, BR, RT joined
/// fixed at T, revolute at L, spherical at B and R; segments hang from one
/// another by spherical joints, the first from the world.
inline Scenario four_link_segment_chain(int m) {
  using namespace scenario_detail;
  if (m < 1) throw ModelError("four-link-segment-chain needs at least one segment");
  Scenario sc;
  sc.mechanism.name = "four-link-segment-chain(" + std::to_string(m) + ")";
  const double l = 1.0, mass = 1.0, a = 1.0 / std::sqrt(2.0);
  const double tilt = 0.3;
  const auto Rt = UnitQuaternion::from_axis_angle(Vec3::UnitX(), tilt);
  const Vec3 top(0, 0, l / 2), bottom(0, 0, -l / 2), ex = Vec3::UnitX();

  // Link from point p to point e, expressed in the untilted frame.
  auto link = [&](const std::string& name, const Vec3& p, const Vec3& e) {
    const Vec3 d = (e - p).normalized();
    const double theta = std::atan2(d.y(), -d.z());
    BodyState s;
    s.x = rotate(Rt, 0.5 * (p + e));
    s.q = Rt * UnitQuaternion::from_axis_angle(ex, theta);
    return add_body(sc, name, mass, link_inertia(mass, l), s);
  };

  auto& J = sc.mechanism.joints;
  int prev_lb = kWorld;
  Vec3 T(0.0, 0.0, 0.0);
  for (int k = 0; k < m; ++k) {
    const std::string tag = std::to_string(k + 1);
    const Vec3 L = T + Vec3(0, -a, -a), B = T + Vec3(0, 0, -2 * a), R = T + Vec3(0, a, -a);
    const int tl = link("TL" + tag, T, L);
    const int lb = link("LB" + tag, L, B);
    const int br = link("BR" + tag, B, R);
    const int rt = link("RT" + tag, R, T);
    J.push_back(make_joint(JointType::Spherical, prev_lb, tl, prev_lb == kWorld ? Vec3(rotate(Rt, T)) : bottom, top,
                           ex, {}, "hang" + tag));
    // Fixed offset: relative orientation of RT with respect to TL at build time.
    const UnitQuaternion qoff = sc.states[tl].q.inverse() * sc.states[rt].q;
    J.push_back(make_joint(JointType::Fixed, tl, rt, top, bottom, ex, qoff, "T" + tag));
    J.push_back(make_joint(JointType::Revolute, tl, lb, bottom, top, ex, {}, "L" + tag));
    J.push_back(make_joint(JointType::Spherical, lb, br, bottom, top, ex, {}, "B" + tag));
    J.push_back(make_joint(JointType::Spherical, br, rt, bottom, top, ex, {}, "R" + tag));
    prev_lb = lb;
    T = B;
  }
  return sc;
}

namespace scenario_detail {

inline std::vector<std::string> split_name(const std::string& name) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : name) {
    if (c == '(' || c == ')' || c == ',' || c == ':') {
      if (!cur.empty()) parts.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  if (!cur.empty()) parts.push_back(cur);
  return parts;
}

inline int int_arg(const std::vector<std::string>& p, std::size_t i, int fallback) {
  if (p.size() <= i) return fallback;
  try {
    std::size_t used = 0;
    const int v = std::stoi(p[i], &used);
    if (used == p[i].size()) return v;
  } catch (const std::exception&) {
  }
  throw ModelError("bad scenario argument '" + p[i] + "'");
}

}  // namespace scenario_detail

inline const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"nlink-pendulum", "double-pendulum", "damped-pendulum",
                                              "three-link-loop", "box-drop", "sphere-chain",
                                              "four-link-segment-chain"};
  return names;
}

inline Scenario make_scenario(const std::string& name) {
  using namespace scenario_detail;
  const auto p = split_name(name);
  if (p.empty()) throw ModelError("empty scenario name");
  const std::string& base = p[0];
  auto expect_args = [&](std::size_t n) {
    if (p.size() > n + 1) throw ModelError("too many arguments for scenario '" + base + "'");
  };
  if (base == "nlink-pendulum") {
    expect_args(2);
    const JointType t = p.size() > 2 ? joint_type_from_name(p[2]) : JointType::Revolute;
    return nlink_pendulum(int_arg(p, 1, 5), t);
  }
  if (base == "double-pendulum") return expect_args(0), double_pendulum();
  if (base == "damped-pendulum") return expect_args(0), damped_pendulum();
  if (base == "three-link-loop") return expect_args(0), three_link_loop();
  if (base == "box-drop") return expect_args(0), box_drop();
  if (base == "sphere-chain") return expect_args(1), sphere_chain(int_arg(p, 1, 3));
  if (base == "four-link-segment-chain") return expect_args(1), four_link_segment_chain(int_arg(p, 1, 2));
  throw ModelError("unknown scenario '" + name + "'");
}

}  // namespace maxcoord
