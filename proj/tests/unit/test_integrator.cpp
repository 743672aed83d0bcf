#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "maxcoord/maxcoord.hpp"
#include "support/oracles.hpp"

using namespace maxcoord;

namespace {

void expect_near(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double tol) {
  ASSERT_EQ(a.rows(), b.rows());
  ASSERT_EQ(a.cols(), b.cols());
  if (a.size() == 0) return;
  EXPECT_LE((a - b).cwiseAbs().maxCoeff(), tol) << "a=\n" << a << "\nb=\n" << b;
}

Mechanism free_bodies(int n, const Vec3& gravity = Vec3::Zero()) {
  Mechanism m;
  m.gravity = gravity;
  for (int i = 0; i < n; ++i) {
    Body b;
    b.id = i + 1;
    m.bodies.push_back(b);
  }
  return m;
}

std::vector<std::filesystem::path> bundled_files() {
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(MAXCOORD_SOURCE_DIR "/scenarios"))
    if (e.path().extension() == ".json") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

/// Largest per-block relative error between the assembled Jacobian and
/// central differences of the residual.
double jacobian_error(const Mechanism& m, const SystemLayout& L, const StepContext& ctx, const VecX& s, double mu) {
  auto F = L.make_matrix();
  assemble_jacobian(m, L, ctx, s, mu, F);
  const MatX A = F.to_dense();
  const MatX D = oracle::fd_jacobian([&](const VecX& x) { return assemble_residual(m, L, ctx, x, mu); }, s);
  const auto& g = L.graph();
  double worst = 0;
  for (int i = 0; i < g.size(); ++i)
    for (int j = 0; j < g.size(); ++j) {
      const MatX a = A.block(F.offset(i), F.offset(j), g.dim(i), g.dim(j));
      const MatX d = D.block(F.offset(i), F.offset(j), g.dim(i), g.dim(j));
      if (a.size() == 0) continue;
      worst = std::max(worst, (a - d).norm() / std::max(1.0, d.norm()));
    }
  return worst;
}

/// Unknowns near the solution of the first step, cone coordinates in [0.2, 1.5].
VecX jittered_unknowns(const Simulator& sim, std::mt19937& rng) {
  std::uniform_real_distribution<double> cone(0.2, 1.5), jitter(-0.3, 0.3);
  VecX s = sim.unknowns();
  const auto& mask = sim.layout().cone_mask();
  for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = mask[i] ? cone(rng) : s[i] + jitter(rng);
  return s;
}

}  // namespace

TEST(AdvanceConfiguration, ZeroVelocityKeepsPose) {
  BodyState s;
  s.x = Vec3(1, 2, 3);
  s.q = UnitQuaternion::from_axis_angle(Vec3(1, 1, 0), 0.7);
  const auto z1 = advance_configuration(s, 0.01);
  EXPECT_EQ(z1.x, s.x);
  expect_near(z1.q.coeffs(), s.q.coeffs(), 1e-16);
}

TEST(AdvanceConfiguration, LinearVelocityShiftsPosition) {
  BodyState s;
  s.v = Vec3(1, 0, 0);
  expect_near(advance_configuration(s, 0.01).x, Vec3(0.01, 0, 0), 1e-17);
}

TEST(AdvanceConfiguration, AngularVelocityClosedForm) {
  std::mt19937 rng(1);
  BodyState s;
  s.q = UnitQuaternion::normalized(oracle::random_quat(rng));
  s.omega = Vec3(0, 0, 1);
  const Vec4 expected = oracle::hamilton(s.q.coeffs(), oracle::axis_angle_quat(Vec3::UnitZ(), 2 * std::asin(0.005)));
  expect_near(advance_configuration(s, 0.01).q.coeffs(), expected, 1e-15);
}

TEST(AdvanceConfiguration, OverflowRejected) {
  BodyState s;
  s.omega = Vec3(0, 0, 250);
  EXPECT_THROW(advance_configuration(s, 0.01), AngularVelocityOverflow);
}

TEST(D0Translational, FreeBodyAtConstantVelocity) {
  const Vec3 x0(0.1, 0.2, 0.3), v(1, -2, 0.5);
  const double dt = 0.01;
  expect_near(d0_translational(2.0, x0, x0 + dt * v, v, Vec3::Zero(), Vec3::Zero(), dt), Vec3::Zero(), 1e-12);
}

TEST(D0Translational, GravityRoot) {
  const double m = 2.0, dt = 0.01;
  const Vec3 g(0, 0, -9.81), x0(0, 0, 1), v0(0.3, 0, 0);
  const Vec3 grad = -m * g;
  const Vec3 x1 = x0 + dt * v0;
  expect_near(d0_translational(m, x0, x1, v0 + g * dt, grad, Vec3::Zero(), dt), Vec3::Zero(), 1e-12);
  EXPECT_GT(d0_translational(m, x0, x1, v0, grad, Vec3::Zero(), dt).norm(), 1.0);
}

TEST(D0Translational, ExternalForceShiftsRoot) {
  const double m = 3.0, dt = 0.02;
  const Vec3 f(1.5, -0.3, 2.0), x0(0, 0, 0), v0(0.1, 0.2, 0.3);
  const Vec3 x1 = x0 + dt * v0;
  expect_near(d0_translational(m, x0, x1, v0 + f * dt / m, Vec3::Zero(), f, dt), Vec3::Zero(), 1e-12);
}

TEST(D0Rotational, IsotropicTorqueFreeSteadyRotation) {
  std::mt19937 rng(2);
  const double dt = 0.01;
  const Mat3 J = 0.7 * Mat3::Identity();
  const auto q0 = UnitQuaternion::normalized(oracle::random_quat(rng));
  const Vec3 w = oracle::random_vec(rng, 3.0);
  const auto q1 = step_orientation(q0, w, dt);
  // Individual terms are of size |J| (2/dt) |w|, about 1e3.
  expect_near(d0_rotational(J, q0, q1, w, Vec3::Zero(), Vec3::Zero(), dt), Vec3::Zero(), 1e-11);
}

TEST(D0Rotational, AtRestResidualIsMinusTwiceTorque) {
  const Vec3 tau(0.3, -1.0, 2.0);
  const auto q = UnitQuaternion::from_axis_angle(Vec3(1, 2, 3), 0.4);
  const Mat3 J = Vec3(1, 2, 3).asDiagonal();
  expect_near(d0_rotational(J, q, q, Vec3::Zero(), Vec3::Zero(), tau, 0.01), -2 * tau, 1e-12);
}

TEST(D0Rotational, AnisotropicStepConservesKineticEnergy) {
  const double dt = 0.01;
  const Mat3 J = Vec3(1, 2, 3).asDiagonal();
  const Vec3 w0(0.3, 0.2, 0.1);
  const auto q0 = UnitQuaternion::identity();
  const auto q1 = step_orientation(q0, w0, dt);
  // Newton on the residual with a finite-difference Jacobian.
  auto r = [&](const VecX& w) -> VecX { return d0_rotational(J, q0, q1, w, Vec3::Zero(), Vec3::Zero(), dt); };
  VecX w = w0;
  for (int k = 0; k < 20 && r(w).norm() > 1e-14; ++k) w -= oracle::dense_solve(oracle::fd_jacobian(r, w), r(w));
  ASSERT_LE(r(w).norm(), 1e-12);
  const double t0 = 0.5 * w0.dot(J * w0), t1 = 0.5 * w.dot(J * w);
  EXPECT_NEAR(t1, t0, 1e-10 * t0);
}

TEST(D0Rotational, JacobianMatchesFiniteDifferences) {
  std::mt19937 rng(3);
  const double dt = 0.01;
  const Mat3 J = Vec3(1, 2, 3).asDiagonal();
  for (int t = 0; t < 20; ++t) {
    const auto q0 = UnitQuaternion::normalized(oracle::random_quat(rng));
    const auto q1 = step_orientation(q0, oracle::random_vec(rng, 5.0), dt);
    const Vec3 w1 = oracle::random_vec(rng, 5.0);
    auto r = [&](const VecX& w) -> VecX { return d0_rotational(J, q0, q1, w, Vec3::Zero(), Vec3::Zero(), dt); };
    expect_near(d0_rotational_jacobian(J, w1, dt), oracle::fd_jacobian(r, w1), 1e-6);
  }
}

TEST(EqualityJacobian, SphericalToWorldAtIdentity) {
  const auto j = make_joint(JointType::Spherical, kWorld, 0, Vec3::Zero(), Vec3::Zero());
  const auto G = joint_jacobian(j, world_state(), BodyState{});
  expect_near(G.child.leftCols(3), Mat3::Identity(), 0.0);
}

TEST(EqualityJacobian, RevoluteAnnihilatesCompatibleRotation) {
  std::mt19937 rng(4);
  const Vec3 axis = Vec3(0.2, -0.5, 1.0).normalized(), pa(0.1, 0.2, 0.3), pb(0, 0, 0.5);
  BodyState a;
  a.x = oracle::random_vec(rng);
  a.q = UnitQuaternion::normalized(oracle::random_quat(rng));
  const auto j = make_joint(JointType::Revolute, 0, 1, pa, pb, axis);
  BodyState b;
  b.q = qmul(a.q, UnitQuaternion::from_axis_angle(axis, 0.8));
  b.x = a.x + rotate(a.q, pa) - rotate(b.q, pb);
  ASSERT_LE(joint_residual(j, a, b).norm(), 1e-14);
  const auto G = joint_jacobian(j, a, b);
  Eigen::FullPivLU<MatX> lu(G.child);
  EXPECT_EQ(lu.rank(), 5);

  // Child rotated by eps about the joint axis through the anchor.
  const double eps = 1e-6;
  const Vec3 axis_w = oracle::quat_matrix(a.q.coeffs()) * axis;
  const Vec3 anchor = a.x + rotate(a.q, pa);
  const Mat3 Rw = oracle::axis_angle_matrix(axis_w, eps);
  const Vec4 q2 = oracle::hamilton(oracle::axis_angle_quat(axis_w, eps), b.q.coeffs());
  Eigen::Matrix<double, 6, 1> twist;
  twist.head<3>() = anchor + Rw * (b.x - anchor) - b.x;
  twist.tail<3>() = oracle::hamilton(oracle::conj(b.q.coeffs()), q2).tail<3>();
  EXPECT_LE((G.child * twist).norm(), 1e-10);  // O(eps^2)
  EXPECT_GT(twist.norm(), 0.1 * eps);
}

TEST(Residual, UnconstrainedReducesToStackedD0) {
  std::mt19937 rng(5);
  auto m = free_bodies(2, Vec3(0, 0, -9.81));
  m.bodies[1].mass = 2.5;
  m.bodies[1].inertia = Vec3(1, 2, 3).asDiagonal();
  std::vector<BodyState> st(2);
  for (auto& s : st) {
    s.x = oracle::random_vec(rng);
    s.q = UnitQuaternion::normalized(oracle::random_quat(rng));
    s.v = oracle::random_vec(rng);
    s.omega = oracle::random_vec(rng);
  }
  const SystemLayout L(m);
  const double dt = 0.01;
  const auto ctx = make_step_context(m, st, dt);
  const VecX s = VecX::Random(L.size());
  const VecX r = assemble_residual(m, L, ctx, s, 0.0);
  for (int b = 0; b < 2; ++b) {
    const int o = L.offset(L.body(b));
    const Vec3 x1 = st[b].x + dt * st[b].v;
    const auto q1 = step_orientation(st[b].q, st[b].omega, dt);
    const Vec3 grad = -m.bodies[b].mass * m.gravity;
    expect_near(r.segment<3>(o), d0_translational(m.bodies[b].mass, st[b].x, x1, s.segment<3>(o), grad, Vec3::Zero(), dt), 1e-10);
    expect_near(r.segment<3>(o + 3), d0_rotational(m.bodies[b].inertia, st[b].q, q1, s.segment<3>(o + 3), Vec3::Zero(), Vec3::Zero(), dt), 1e-10);
  }
}

TEST(Residual, RestingCubeForceBalance) {
  auto m = free_bodies(1, Vec3(0, 0, -9.81));
  m.bodies[0].inertia = (0.5 * 0.5 / 6) * Mat3::Identity();
  for (int i = 0; i < 4; ++i) {
    Contact c;
    c.body = 0;
    c.p = 0.25 * Vec3(i & 1 ? 1 : -1, i & 2 ? 1 : -1, -1);
    m.contacts.push_back(c);
  }
  std::vector<BodyState> st(1);
  st[0].x = Vec3(0, 0, 0.25);
  const SystemLayout L(m);
  const auto ctx = make_step_context(m, st, 0.01);
  VecX s = initial_unknowns(m, L, st);
  for (int c = 0; c < 4; ++c) s[L.offset(L.contact(c))] = 9.81 / 4;
  const VecX r = assemble_residual(m, L, ctx, s, 0.0);
  expect_near(r.segment<6>(L.offset(L.body(0))), VecX::Zero(6), 1e-12);
  for (int c = 0; c < 4; ++c) EXPECT_NEAR(r[L.offset(L.contact(c))], 1.0, 1e-12);  // s_phi - gap
}

TEST(Residual, InfeasiblePointRejected) {
  const auto sc = box_drop();
  const SystemLayout L(sc.mechanism);
  const auto ctx = make_step_context(sc.mechanism, sc.states, 0.01);
  VecX s = initial_unknowns(sc.mechanism, L, sc.states);
  s[L.offset(L.contact(0))] = 0.0;
  EXPECT_THROW(assemble_residual(sc.mechanism, L, ctx, s, 0.1), InfeasiblePoint);
}

TEST(Jacobian, UnconstrainedSingleBodyIsOneBlock) {
  const auto m = free_bodies(1);
  const SystemLayout L(m);
  EXPECT_EQ(L.graph().size(), 1);
  EXPECT_EQ(L.size(), 6);
  auto F = L.make_matrix();
  BodyState s0;
  s0.omega = Vec3(0.1, 0.2, 0.3);
  const auto ctx = make_step_context(m, {s0}, 0.01);
  assemble_jacobian(m, L, ctx, initial_unknowns(m, L, {s0}), 0.0, F);
  EXPECT_EQ(F.pattern().size(), 0u);
  EXPECT_EQ(F.diag(0).rows(), 6);
}

TEST(Jacobian, FiveLinkTreePatternMatchesGraph) {
  // Five links, joints 1-2, 2-3, 2-4, 1-5.
  auto m = free_bodies(5, Vec3(0, 0, -9.81));
  std::vector<BodyState> st(5);
  for (int i = 0; i < 5; ++i) st[i].x = Vec3(i, 0, 0);
  const std::vector<std::pair<int, int>> links{{0, 1}, {1, 2}, {1, 3}, {0, 4}};
  for (auto [a, b] : links)
    m.joints.push_back(make_joint(JointType::Spherical, a, b, 0.5 * (st[b].x - st[a].x), 0.5 * (st[a].x - st[b].x)));
  const SystemLayout L(m);
  ASSERT_EQ(L.graph().size(), 9);
  auto F = L.make_matrix();
  const auto ctx = make_step_context(m, st, 0.01);
  assemble_jacobian(m, L, ctx, initial_unknowns(m, L, st), 0.0, F);
  const MatX A = F.to_dense();
  std::set<std::pair<int, int>> nonzero, expected;
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j)
      if (i != j && A.block(F.offset(i), F.offset(j), F.dim(i), F.dim(j)).norm() > 0) nonzero.insert({i, j});
  for (std::size_t k = 0; k < links.size(); ++k) {
    const int jn = L.joint(static_cast<int>(k)).node;
    for (int b : {links[k].first, links[k].second}) {
      expected.insert({jn, L.body(b).node});
      expected.insert({L.body(b).node, jn});
    }
  }
  EXPECT_EQ(nonzero, expected);
  EXPECT_TRUE(L.ordering().fill.empty());
}

TEST(Jacobian, MatchesFiniteDifferencesOnBundledScenarios) {
  const auto files = bundled_files();
  ASSERT_GE(files.size(), 8u);
  std::mt19937 rng(6);
  for (const auto& path : files) {
    const auto f = load_mechanism(path.string());
    Simulator sim(f.mechanism, f.states, f.defaults.dt);
    for (int k = 0; k < 3; ++k) sim.step();
    const auto ctx = make_step_context(sim.mechanism(), sim.states(), sim.dt());
    for (double mu : {0.0, 0.01}) {
      const VecX s = jittered_unknowns(sim, rng);
      EXPECT_LE(jacobian_error(sim.mechanism(), sim.layout(), ctx, s, mu), 1e-5) << path.filename() << " mu " << mu;
    }
  }
}

TEST(Jacobian, MatchesFiniteDifferencesWithDampersSpringsAndPointPairs) {
  std::mt19937 rng(7);
  auto m = free_bodies(2, Vec3(0, 0, -9.81));
  m.bodies[1].inertia = Vec3(1, 2, 3).asDiagonal();
  std::vector<BodyState> st(2);
  st[0].x = Vec3(0, 0, 1);
  st[1].x = Vec3(0.6, 0.1, 1.2);
  st[1].q = UnitQuaternion::from_axis_angle(Vec3(1, 0, 1), 0.3);
  st[0].omega = Vec3(0.2, -0.1, 0.4);
  st[1].v = Vec3(0.1, 0, -0.2);
  ForceElement spring;
  spring.kind = ForceKind::Spring;
  spring.body_a = 0;
  spring.body_b = 1;
  spring.p_a = Vec3(0.1, 0, 0);
  spring.p_b = Vec3(-0.1, 0, 0);
  spring.stiffness = 20;
  ForceElement damper = spring;
  damper.kind = ForceKind::Damper;
  damper.damping = 0.7;
  damper.angular_damping = 0.3;
  m.forces = {spring, damper};
  Contact pair;
  pair.body = 1;
  pair.other = 0;
  pair.p = Vec3(-0.3, 0, 0);
  pair.p_other = Vec3(0.3, 0, 0);
  pair.normal = Vec3(1, 0, 0);
  pair.cf = 0.4;
  Contact ground;
  ground.body = 0;
  ground.p = Vec3(0, 0, -0.2);
  ground.cf = 0.8;
  ground.nf = 3;
  m.contacts = {pair, ground};
  m.validate();
  Simulator sim(m, st, 0.01);
  const auto ctx = make_step_context(m, st, 0.01);
  for (int t = 0; t < 3; ++t)
    EXPECT_LE(jacobian_error(m, sim.layout(), ctx, jittered_unknowns(sim, rng), 0.01), 1e-5);
}

TEST(TotalEnergy, RestAtZeroPotential) {
  const auto m = free_bodies(3);
  EXPECT_EQ(total_energy(m, std::vector<BodyState>(3)), 0.0);
}

TEST(TotalEnergy, UnitMassUnitSpeed) {
  const auto m = free_bodies(1);
  BodyState s;
  s.v = Vec3(1, 0, 0);
  EXPECT_DOUBLE_EQ(total_energy(m, {s}), 0.5);
}

TEST(TotalEnergy, RotatingRodMatchesPendulumFormula) {
  const double mass = 1.0, l = 1.0, g = 9.81;
  Mechanism m = free_bodies(1, Vec3(0, 0, -g));
  const double Icm = mass * l * l / 12;
  m.bodies[0].inertia = Vec3(Icm, Icm, 1e-3).asDiagonal();
  for (double theta : {0.0, 0.4, 1.2, 2.5}) {
    for (double w : {0.0, 1.3, -2.0}) {
      BodyState s;
      s.q = UnitQuaternion::from_axis_angle(Vec3::UnitY(), theta);
      s.x = (l / 2) * Vec3(std::sin(theta), 0, -std::cos(theta));
      s.omega = Vec3(0, w, 0);
      s.v = Vec3(0, w, 0).cross(s.x);
      const double ref = oracle::pendulum_energy(mass, l, Icm + mass * l * l / 4, g, theta, w) - mass * g * l / 2;
      EXPECT_NEAR(total_energy(m, {s}), ref, 1e-12);
    }
  }
}

TEST(Conservation, IsolatedBodyMomentum) {
  Mechanism m = free_bodies(1);
  m.bodies[0].mass = 2.0;
  m.bodies[0].inertia = Vec3(1, 2, 3).asDiagonal();
  BodyState s;
  s.v = Vec3(0.5, -0.2, 0.1);
  s.omega = Vec3(0.3, 0.2, 0.1);
  const double dt = 0.01;
  Simulator sim(m, {s}, dt);
  auto momentum = [&](const BodyState& z) {
    return discrete_angular_momentum(m.bodies[0].inertia, z.q, step_orientation(z.q, z.omega, dt), z.omega);
  };
  const Vec3 p0 = 2.0 * s.v, L0 = momentum(s);
  for (int k = 0; k < 300; ++k) {
    sim.step();
    const auto& z = sim.states()[0];
    ASSERT_LE((2.0 * z.v - p0).norm(), 1e-9);
    ASSERT_LE((momentum(z) - L0).norm(), 1e-9);
  }
}

TEST(Conservation, SolvedStepSatisfiesConstraints) {
  const auto sc = double_pendulum();
  Simulator sim(sc.mechanism, sc.states, 0.01);
  for (int k = 0; k < 20; ++k) {
    sim.step();
    for (const auto& j : sc.mechanism.joints)
      EXPECT_LE(joint_residual(j, state_of(sim.states(), j.parent), sim.states()[j.child]).lpNorm<Eigen::Infinity>(),
                1e-10);
  }
}

TEST(Conservation, SlidingBlockEnergyNonIncreasing) {
  auto m = free_bodies(1, Vec3(0, 0, -9.81));
  m.bodies[0].inertia = (0.5 * 0.5 / 6) * Mat3::Identity();
  for (int i = 0; i < 4; ++i) {
    Contact c;
    c.body = 0;
    c.p = 0.25 * Vec3(i & 1 ? 1 : -1, i & 2 ? 1 : -1, -1);
    c.cf = 0.3;
    m.contacts.push_back(c);
  }
  BodyState s;
  s.x = Vec3(0, 0, 0.25);
  s.v = Vec3(1.0, 0.3, 0);
  Simulator sim(m, {s}, 0.01);
  double prev = total_energy(m, {s});
  for (int k = 0; k < 60; ++k) {
    sim.step();
    const double e = total_energy(m, sim.states());
    EXPECT_LE(e, prev + 1e-8) << "step " << k;
    prev = e;
  }
  EXPECT_LE(sim.states()[0].v.norm(), 1e-6);
}
