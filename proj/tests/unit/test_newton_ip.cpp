#include <gtest/gtest.h>

#include <random>

#include "maxcoord/maxcoord.hpp"
#include "support/oracles.hpp"

using namespace maxcoord;

namespace {

/// StepProblem that records every point it is asked to evaluate.
struct WatchedProblem : StepProblem {
  using StepProblem::StepProblem;
  mutable std::vector<VecX> seen;
  [[nodiscard]] VecX residual(const VecX& s, double mu) const {
    seen.push_back(s);
    return StepProblem::residual(s, mu);
  }
};

Scenario resting_cube(double cf) {
  Scenario sc;
  Body b;
  b.inertia = (0.5 * 0.5 / 6) * Mat3::Identity();
  sc.mechanism.bodies.push_back(b);
  sc.mechanism.gravity = Vec3(0, 0, -9.81);
  for (int i = 0; i < 4; ++i) {
    Contact c;
    c.body = 0;
    c.p = 0.25 * Vec3(i & 1 ? 1 : -1, i & 2 ? 1 : -1, -1);
    c.cf = cf;
    sc.mechanism.contacts.push_back(c);
  }
  BodyState s;
  s.x = Vec3(0, 0, 0.25);
  sc.states = {s};
  return sc;
}

struct Fixture {
  Scenario sc;
  SystemLayout L;
  StepContext ctx;
  VecX s;
  explicit Fixture(Scenario in, double dt = 0.01)
      : sc(std::move(in)), L(sc.mechanism), ctx(make_step_context(sc.mechanism, sc.states, dt)),
        s(initial_unknowns(sc.mechanism, L, sc.states)) {}
  [[nodiscard]] VecX f(const VecX& x, double mu = 0.0) const { return assemble_residual(sc.mechanism, L, ctx, x, mu); }
  [[nodiscard]] BlockSparseMatrix F(const VecX& x, double mu = 0.0) const {
    auto M = L.make_matrix();
    assemble_jacobian(sc.mechanism, L, ctx, x, mu, M);
    return M;
  }
};

Scenario single_body(const Vec3& gravity) {
  Scenario sc;
  sc.mechanism.bodies.push_back(Body{});
  sc.mechanism.bodies[0].inertia = Vec3(1, 2, 3).asDiagonal();
  sc.mechanism.gravity = gravity;
  BodyState s;
  s.v = Vec3(0.4, -0.1, 2.0);
  s.omega = Vec3(0.3, 0.2, 0.1);
  sc.states = {s};
  return sc;
}

}  // namespace

TEST(NewtonDirection, ZeroResidualGivesZeroStep) {
  Fixture fx(double_pendulum());
  auto F = fx.F(fx.s);
  const VecX ds = newton_direction(F, VecX::Zero(fx.L.size()), fx.L.ordering());
  EXPECT_EQ(ds, VecX::Zero(fx.L.size()));
}

TEST(NewtonDirection, FreeFallLandsOnClosedFormInOneStep) {
  const Vec3 g(0, 0, -9.81);
  Fixture fx(single_body(g));
  fx.sc.mechanism.bodies[0].inertia = Mat3::Identity();
  auto F = fx.F(fx.s);
  const VecX s1 = fx.s + newton_direction(F, fx.f(fx.s), fx.L.ordering());
  const Vec3 expected = fx.sc.states[0].v + g * 0.01;
  EXPECT_LE((s1.head<3>() - expected).norm(), 1e-13);
}

TEST(NewtonDirection, PendulumMatchesDenseOracle) {
  std::mt19937 rng(1);
  for (const char* name : {"double-pendulum", "three-link-loop", "box-drop", "sphere-chain(3)"}) {
    Fixture fx(make_scenario(name));
    VecX s = fx.s;
    std::uniform_real_distribution<double> u(0.2, 1.5);
    for (Eigen::Index i = 0; i < s.size(); ++i)
      if (fx.L.cone_mask()[i]) s[i] = u(rng);
    auto F = fx.F(s, 0.1);
    const MatX A = F.to_dense();
    const VecX f = fx.f(s, 0.1);
    const VecX ds = newton_direction(F, f, fx.L.ordering());
    const VecX ref = oracle::dense_solve(A, -f);
    EXPECT_LE((ds - ref).norm() / ref.norm(), 1e-10) << name;
  }
}

TEST(FeasibleStep, KeepsPositiveStepUnchanged) {
  const VecX s = VecX::Constant(3, 1.0), ds = VecX::Constant(3, 0.5);
  const std::vector<char> mask{1, 1, 0};
  EXPECT_EQ(feasible_step(ds, s, mask), ds);
}

TEST(FeasibleStep, FractionToBoundaryExample) {
  const VecX s = VecX::Constant(1, 1.0), ds = VecX::Constant(1, -2.0);
  const VecX clipped = feasible_step(ds, s, {1});
  EXPECT_NEAR(s[0] + clipped[0], 0.005, 1e-15);
}

TEST(FeasibleStep, ZeroStep) {
  EXPECT_EQ(feasible_step(VecX::Zero(2), VecX::Ones(2), {1, 1}), VecX::Zero(2));
}

TEST(FeasibleStep, IgnoresNonConeCoordinates) {
  VecX s(2), ds(2);
  s << 1.0, 1.0;
  ds << -5.0, -0.5;
  const VecX c = feasible_step(ds, s, {0, 1});
  EXPECT_EQ(c, ds);
}

TEST(LineSearch, DescendingFullStepAccepted) {
  auto f = [](const VecX& x) -> VecX { return x; };
  const auto r = line_search(VecX::Constant(1, -0.5), VecX::Constant(1, 1.0), f);
  EXPECT_EQ(r.alpha, 1.0);
  EXPECT_EQ(r.halvings, 0);
}

TEST(LineSearch, OvershootOnQuadraticHalvesOnce) {
  // f(s) = s^2 at s = 1; the step to -1 does not decrease |f|, s = 0 does.
  auto f = [](const VecX& x) -> VecX { return x.cwiseProduct(x); };
  const auto r = line_search(VecX::Constant(1, -2.0), VecX::Constant(1, 1.0), f);
  EXPECT_EQ(r.alpha, 0.5);
  EXPECT_EQ(r.s[0], 0.0);
}

TEST(LineSearch, ZeroStepFails) {
  auto f = [](const VecX& x) -> VecX { return x + VecX::Ones(x.size()); };
  EXPECT_THROW(line_search(VecX::Zero(2), VecX::Zero(2), f), LineSearchFailure);
}

TEST(LineSearch, ThrowingTrialCountsAsFailure) {
  auto f = [](const VecX& x) -> VecX {
    if (x[0] < 0) throw InfeasiblePoint("negative");
    return x;
  };
  const auto r = line_search(VecX::Constant(1, -1.5), VecX::Constant(1, 1.0), f);
  EXPECT_EQ(r.alpha, 0.5);
}

TEST(UpdateBarrier, ShrinksAfterInnerConvergence) {
  EXPECT_DOUBLE_EQ(update_barrier(1.0, 1e-3, SolveOptions{}), 0.1);
}

TEST(UpdateBarrier, FloorIsFixedPoint) {
  const SolveOptions opt;
  EXPECT_EQ(update_barrier(opt.mu_floor(), 0.0, opt), opt.mu_floor());
  EXPECT_EQ(update_barrier(2 * opt.mu_floor(), 0.0, opt), opt.mu_floor());
}

TEST(UpdateBarrier, HoldsWhileResidualLarge) {
  EXPECT_EQ(update_barrier(0.5, 3.0, SolveOptions{}), 0.5);
}

TEST(SolveOptions, RejectsInvalidValues) {
  SolveOptions o;
  o.mu_shrink = 1.0;
  EXPECT_THROW(o.validate(), Error);
  o = {};
  o.fraction_to_boundary = 0.0;
  EXPECT_THROW(o.validate(), Error);
  o = {};
  o.tol = -1;
  EXPECT_THROW(o.validate(), Error);
  EXPECT_NO_THROW(SolveOptions{}.validate());
}

TEST(InteriorPoint, UnconstrainedBodyAtMostTwoIterations) {
  Fixture fx(single_body(Vec3(0, 0, -9.81)));
  const auto [s, rep] = interior_point(fx.sc.mechanism, fx.L, fx.ctx, fx.s);
  EXPECT_TRUE(rep.converged);
  EXPECT_LE(rep.iterations, 2);
  EXPECT_LE(rep.residual_inf, 1e-10);
}

TEST(InteriorPoint, DoublePendulumWarmStartWithinTwentyIterations) {
  const auto sc = double_pendulum();
  Simulator sim(sc.mechanism, sc.states, 0.01);
  for (int k = 0; k < 200; ++k) {
    sim.step();
    ASSERT_LE(sim.last_report().iterations, 20) << "step " << k;
    ASSERT_LE(sim.last_report().residual_inf, 1e-10);
  }
}

TEST(InteriorPoint, RestingCubeCarriesItsWeight) {
  const auto sc = resting_cube(0.5);
  Simulator sim(sc.mechanism, sc.states, 0.01);
  const SolveOptions opt;
  for (int k = 0; k < 20; ++k) sim.step();
  double total = 0;
  for (int c = 0; c < 4; ++c) {
    const double gamma = sim.unknowns()[sim.layout().offset(sim.layout().contact(c))];
    const double gap = contact_gap(sc.mechanism.contacts[c], advance_configuration(sim.states()[0], 0.01), world_state());
    EXPECT_GE(gap, 0.0);
    EXPECT_LE(gap * gamma, 10 * opt.mu_floor());
    total += gamma;
  }
  EXPECT_NEAR(total, 9.81, 0.01 * 9.81);
}

TEST(InteriorPoint, IteratesStayStrictlyInsideCone) {
  Fixture fx(box_drop());
  Simulator sim(fx.sc.mechanism, fx.sc.states, 0.01);
  for (int k = 0; k < 40; ++k) sim.step();  // box lands around step 28
  const auto ctx = make_step_context(sim.mechanism(), sim.states(), 0.01);
  const WatchedProblem p(sim.mechanism(), sim.layout(), ctx);
  const auto [s, rep] = interior_point(p, sim.unknowns());
  ASSERT_GT(p.seen.size(), 2u);
  const auto& mask = sim.layout().cone_mask();
  for (const auto& x : p.seen)
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (mask[i]) ASSERT_GT(x[i], 0.0);
  for (std::size_t k = 1; k < rep.residual_trace.size(); ++k)
    if (rep.mu_trace[k] == rep.mu_trace[k - 1]) EXPECT_LT(rep.residual_trace[k], rep.residual_trace[k - 1]);
}

TEST(InteriorPoint, BoxDropBarrierTraceMonotone) {
  const auto sc = box_drop();
  Simulator sim(sc.mechanism, sc.states, 0.01);
  for (int k = 0; k < sc.defaults.steps; ++k) {
    sim.step();
    const auto& mu = sim.last_report().mu_trace;
    for (std::size_t i = 1; i < mu.size(); ++i) ASSERT_LE(mu[i], mu[i - 1]) << "step " << k;
    ASSERT_LE(sim.last_report().mu, SolveOptions{}.mu_floor());
  }
}

TEST(InteriorPoint, ComplementarityAtConvergence) {
  const auto sc = box_drop();
  Simulator sim(sc.mechanism, sc.states, 0.01);
  for (int k = 0; k < 80; ++k) {
    sim.step();
    const auto& rep = sim.last_report();
    const VecX& s = sim.unknowns();
    for (auto [a, b] : sim.layout().complementarity_pairs()) ASSERT_LE(s[a] * s[b], 10 * rep.mu + 1e-10);
  }
}

TEST(InteriorPoint, EqualityOnlyMatchesPlainNewton) {
  for (const char* name : {"double-pendulum", "three-link-loop", "nlink-pendulum(5,spherical)"}) {
    Fixture fx(make_scenario(name));
    const auto [s, rep] = interior_point(fx.sc.mechanism, fx.L, fx.ctx, fx.s);
    // Undamped Newton with a dense solve and the same stopping rule.
    VecX x = fx.s;
    int iters = 0;
    for (; iters < 50 && fx.f(x).lpNorm<Eigen::Infinity>() > SolveOptions{}.tol; ++iters)
      x += oracle::dense_solve(fx.F(x).to_dense(), -fx.f(x));
    EXPECT_EQ(rep.iterations, iters) << name;
    EXPECT_LE((s - x).lpNorm<Eigen::Infinity>(), 1e-12) << name;
    for (double a : rep.step_trace) EXPECT_EQ(a, 1.0);
  }
}

TEST(InteriorPoint, DeterministicReports) {
  Fixture fx(box_drop());
  Simulator sim(fx.sc.mechanism, fx.sc.states, 0.01);
  for (int k = 0; k < 35; ++k) sim.step();
  const auto ctx = make_step_context(sim.mechanism(), sim.states(), 0.01);
  const auto a = interior_point(sim.mechanism(), sim.layout(), ctx, sim.unknowns());
  const auto b = interior_point(sim.mechanism(), sim.layout(), ctx, sim.unknowns());
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second.residual_trace, b.second.residual_trace);
  EXPECT_EQ(a.second.mu_trace, b.second.mu_trace);
  EXPECT_EQ(a.second.step_trace, b.second.step_trace);
  EXPECT_EQ(a.second.iterations, b.second.iterations);
}

TEST(InteriorPoint, IterationCapRaisesWithReport) {
  Fixture fx(resting_cube(0.5));
  SolveOptions opt;
  opt.max_newton_iters = 1;
  try {
    interior_point(fx.sc.mechanism, fx.L, fx.ctx, fx.s, opt);
    FAIL() << "expected NonConvergence";
  } catch (const NonConvergence& e) {
    EXPECT_FALSE(e.report().converged);
    EXPECT_EQ(e.report().iterations, 1);
  }
}

TEST(InteriorPoint, ClampsNonPositiveStartToFloor) {
  Fixture fx(resting_cube(0.5));
  VecX s = fx.s;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (fx.L.cone_mask()[i]) s[i] = 0.0;
  const auto [x, rep] = interior_point(fx.sc.mechanism, fx.L, fx.ctx, s);
  EXPECT_TRUE(rep.converged);
}
