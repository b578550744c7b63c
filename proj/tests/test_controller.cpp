#include "mpct/controller.hpp"

#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "mpct/error.hpp"

namespace mpct {
namespace {

using fixtures::di_setup;
using fixtures::vec2;

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no exception";
  return ErrorCode::SolverError;
}

std::vector<OffsetCostSpec> offsets() {
  return {OffsetCostSpec::quadratic(100.0 * MatrixXd::Identity(2, 2)), OffsetCostSpec::one_norm(10.0),
          OffsetCostSpec::inf_norm(10.0)};
}

// Direct evaluation of the tracking cost by forward simulation.
double simulate_and_sum(const CondensedQp& cq, const ControlResult& r, const VectorXd& x0,
                        const VectorXd& y_sp) {
  const MpctConfig& c = cq.config;
  VectorXd x = x0;
  double cost = 0.0;
  for (int j = 0; j < c.N; ++j) {
    const VectorXd u = r.u_seq.row(j).transpose();
    cost += (x - r.x_a).dot(c.Q * (x - r.x_a)) + (u - r.u_a).dot(c.R * (u - r.u_a));
    x = cq.model.A * x + cq.model.B * u;
  }
  if (c.terminal == TerminalKind::Inequality) cost += (x - r.x_a).dot(c.ingredients->P * (x - r.x_a));
  if (!cq.regulation) cost += c.offset.evaluate(r.y_a - y_sp);
  return cost;
}

VectorXd random_state(std::mt19937& rng, double bound = 5.0) {
  std::uniform_real_distribution<double> uni(-bound, bound);
  return vec2(uni(rng), uni(rng));
}

TEST(Prediction, ScalarOneStep) {
  const Prediction p = build_prediction(fixtures::scalar(0.7, 2.0), 1);
  EXPECT_EQ(p.A_bold, (MatrixXd(2, 1) << 1, 0.7).finished());
  EXPECT_EQ(p.B_bold, (MatrixXd(2, 1) << 0, 2.0).finished());
  EXPECT_EQ(p.B_N, MatrixXd::Constant(1, 1, 2.0));
}

TEST(Prediction, MatchesRecursiveSimulation) {
  const LtiModel m = fixtures::double_integrator();
  const int N = 5;
  const Prediction p = build_prediction(m, N);
  std::mt19937 rng(1);
  std::normal_distribution<double> nrm(0, 1);
  for (int t = 0; t < 100; ++t) {
    VectorXd x0(2), u(2 * N);
    for (int i = 0; i < 2; ++i) x0(i) = nrm(rng);
    for (int i = 0; i < 2 * N; ++i) u(i) = nrm(rng);
    const VectorXd stacked = p.A_bold * x0 + p.B_bold * u;
    VectorXd x = x0;
    for (int j = 0; j <= N; ++j) {
      EXPECT_LE((stacked.segment(2 * j, 2) - x).cwiseAbs().maxCoeff(), 1e-10);
      if (j < N) x = m.A * x + m.B * u.segment(2 * j, 2);
    }
    EXPECT_LE((p.A_bold.bottomRows(2) * x0 + p.B_N * u - x).cwiseAbs().maxCoeff(), 1e-10);
  }
  EXPECT_EQ(build_prediction(m, 3).B_bold.rows(), 8);
  EXPECT_EQ(build_prediction(m, 3).B_bold.cols(), 6);
}

TEST(Condense, DecisionLayout) {
  const auto& s = di_setup();
  const CondensedQp eq = condense(s.model, s.cons, s.config(TerminalKind::Equality, offsets()[0]));
  EXPECT_EQ(eq.layout.total, 10);
  const CondensedQp inf = condense(s.model, s.cons, s.config(TerminalKind::Equality, offsets()[2], true));
  EXPECT_EQ(inf.layout.total, 6 + 2 + 1);
  EXPECT_EQ(inf.rows_epigraph, 5);
  const CondensedQp one = condense(s.model, s.cons, s.config(TerminalKind::Inequality, offsets()[1]));
  EXPECT_EQ(one.layout.aux_size, 2);
  EXPECT_EQ(one.rows_epigraph, 4);
  // Parameters never change the constraint matrices.
  const QpProblem a = instantiate(one, vec2(1, 2), vec2(3, 4));
  const QpProblem b = instantiate(one, vec2(-1, 0), vec2(0, 0));
  EXPECT_EQ(a.G, b.G);
  EXPECT_EQ(a.F, b.F);
  EXPECT_EQ(a.H, b.H);
}

TEST(Condense, OriginIsZeroCost) {
  const auto& s = di_setup();
  for (auto term : {TerminalKind::Equality, TerminalKind::Inequality}) {
    for (const auto& off : offsets()) {
      const CondensedQp cq = condense(s.model, s.cons, s.config(term, off));
      const ControlResult r = solve_mpct(cq, VectorXd::Zero(2), VectorXd::Zero(2));
      ASSERT_TRUE(r.optimal());
      EXPECT_NEAR(r.value, 0.0, 1e-8);
      EXPECT_LE(r.u_seq.cwiseAbs().maxCoeff(), 1e-6);
    }
  }
}

TEST(Condense, ValueMatchesDirectCostEvaluation) {
  const auto& s = di_setup();
  std::mt19937 rng(31);
  for (auto term : {TerminalKind::Equality, TerminalKind::Inequality}) {
    for (const auto& off : offsets()) {
      for (bool theta : {false, true}) {
        const CondensedQp cq = condense(s.model, s.cons, s.config(term, off, theta));
        int checked = 0;
        for (int t = 0; t < 400 && checked < 100; ++t) {
          const VectorXd x = random_state(rng), y = random_state(rng, 6.0);
          const ControlResult r = solve_mpct(cq, x, y);
          if (!r.optimal()) continue;
          EXPECT_NEAR(r.value, simulate_and_sum(cq, r, x, y), 1e-7 * (1 + r.value));
          EXPECT_LE((s.model.A * r.x_a + s.model.B * r.u_a - r.x_a).cwiseAbs().maxCoeff(), 1e-7);
          VectorXd xu(4);
          xu << r.x_a, r.u_a;
          EXPECT_TRUE(contains(s.cons.shrunk(), xu, 1e-7));
          ++checked;
        }
        EXPECT_EQ(checked, 100) << to_string(term) << " theta " << theta;
      }
    }
  }
}

TEST(SolveMpct, FarSetpointStillFeasible) {
  const auto& s = di_setup();
  const CondensedQp cq = condense(s.model, s.cons, s.config(TerminalKind::Equality, OffsetCostSpec::inf_norm(10)));
  EXPECT_TRUE(solve_mpct(cq, vec2(0.6, 2.3), vec2(-4.9, 0.2)).optimal());
}

TEST(SolveMpct, EquilibriumIsFixedPoint) {
  const auto& s = di_setup();
  std::mt19937 rng(6);
  const auto thetas = sample_points(s.sets.theta_set, rng, 10);
  for (auto term : {TerminalKind::Equality, TerminalKind::Inequality}) {
    for (const auto& off : offsets()) {
      const CondensedQp cq = condense(s.model, s.cons, s.config(term, off));
      for (const auto& th : thetas) {
        const VectorXd xu = s.map.M_theta * th;
        const VectorXd xs = xu.head(2), us = xu.tail(2);
        const ControlResult r = solve_mpct(cq, xs, s.map.N_theta * th);
        ASSERT_TRUE(r.optimal());
        EXPECT_NEAR(r.value, 0.0, 1e-6);
        EXPECT_LE((r.u0 - us).cwiseAbs().maxCoeff(), 1e-6);
        EXPECT_LE((r.x_a - xs).cwiseAbs().maxCoeff(), 1e-6);
      }
    }
  }
}

TEST(SolveMpct, OutsideStateBoxInfeasible) {
  const auto& s = di_setup();
  for (auto term : {TerminalKind::Equality, TerminalKind::Inequality}) {
    const CondensedQp cq = condense(s.model, s.cons, s.config(term, offsets()[0]));
    EXPECT_EQ(solve_mpct(cq, vec2(6, 0), vec2(0, 0)).status, QpStatus::Infeasible);
    EXPECT_FALSE(feasible(cq, vec2(6, 0)));
  }
}

TEST(Regulation, FeasibilityContrast) {
  const auto& s = di_setup();
  for (auto term : {TerminalKind::Equality, TerminalKind::Inequality}) {
    const MpctConfig c = s.config(term, offsets()[0]);
    const CondensedQp far = build_regulation(s.model, s.cons, c, vec2(-4.9, 0.2));
    const CondensedQp near = build_regulation(s.model, s.cons, c, vec2(4.9, 0.245));
    EXPECT_EQ(solve_mpct(far, vec2(0.6, 2.3), vec2(-4.9, 0.2)).status, QpStatus::Infeasible);
    EXPECT_FALSE(feasible(far, vec2(0.6, 2.3)));
    EXPECT_TRUE(solve_mpct(near, vec2(0.6, 2.3), vec2(4.9, 0.245)).optimal());
    EXPECT_TRUE(feasible(condense(s.model, s.cons, c), vec2(0.6, 2.3)));
  }
}

TEST(Regulation, AtSetpointZeroCost) {
  const auto& s = di_setup();
  const VectorXd xsp = vec2(4.9, 0.245);
  const VectorXd usp = vec2(0.245, -0.49);
  for (auto term : {TerminalKind::Equality, TerminalKind::Inequality}) {
    const CondensedQp cq = build_regulation(s.model, s.cons, s.config(term, offsets()[0]), xsp);
    const ControlResult r = solve_mpct(cq, xsp, xsp);
    ASSERT_TRUE(r.optimal());
    EXPECT_NEAR(r.value, 0.0, 1e-8);
    EXPECT_LE((r.u0 - usp).cwiseAbs().maxCoeff(), 1e-7);
    EXPECT_EQ(r.nu_regulation.size(), 2);
  }
}

TEST(Regulation, NoEquilibriumForUnreachableOutputDirection) {
  LtiModel m = fixtures::double_integrator();
  m.C = (MatrixXd(2, 2) << 1, 0, 1, 0).finished();
  const ConstraintSet cons = fixtures::double_integrator_constraints();
  MpctConfig c = di_setup().config(TerminalKind::Equality, offsets()[0]);
  EXPECT_EQ(code_of([&] { build_regulation(m, cons, c, vec2(1, 2)); }), ErrorCode::NoEquilibrium);
  EXPECT_NO_THROW(build_regulation(m, cons, c, vec2(1, 1)));
}

TEST(Regulation, MultiplierMatchesFiniteDifference) {
  const auto& s = di_setup();
  const MpctConfig c = s.config(TerminalKind::Inequality, offsets()[0]);
  const VectorXd x = vec2(0.65, -2.55), y = vec2(-4.9, 0.2);
  const CondensedQp cq = build_regulation(s.model, s.cons, c, y);
  const ControlResult r = solve_mpct(cq, x, y);
  ASSERT_TRUE(r.optimal());
  for (int i = 0; i < 2; ++i) {
    const double h = 1e-6;
    VectorXd yp = y, ym = y;
    yp(i) += h;
    ym(i) -= h;
    const double fd = (solve_mpct(cq, x, yp).value - solve_mpct(cq, x, ym).value) / (2 * h);
    EXPECT_NEAR(fd, -r.nu_regulation(i), 1e-2 * std::abs(r.nu_regulation(i)));
  }
}

TEST(Config, EqualityTerminalNeedsControllabilityHorizon) {
  LtiModel m = fixtures::double_integrator();
  m.B = (MatrixXd(2, 1) << 0, 1).finished();
  m.D = MatrixXd::Zero(2, 1);
  m.C = MatrixXd::Identity(1, 2);
  m.D = MatrixXd::Zero(1, 1);
  const ConstraintSet cons = ConstraintSet::box(VectorXd::Constant(2, 5.0), VectorXd::Constant(1, 0.5));
  MpctConfig c;
  c.N = 1;
  c.Q = MatrixXd::Identity(2, 2);
  c.R = MatrixXd::Identity(1, 1);
  c.offset = OffsetCostSpec::quadratic(MatrixXd::Identity(1, 1));
  EXPECT_EQ(code_of([&] { condense(m, cons, c); }), ErrorCode::ConfigError);
  c.N = 2;
  EXPECT_NO_THROW(condense(m, cons, c));
  c.terminal = TerminalKind::Inequality;
  EXPECT_EQ(code_of([&] { condense(m, cons, c); }), ErrorCode::ConfigError);
}

TEST(Feasibility, IndependentOfSetpoint) {
  const auto& s = di_setup();
  std::mt19937 rng(44);
  for (auto term : {TerminalKind::Equality, TerminalKind::Inequality}) {
    const CondensedQp cq = condense(s.model, s.cons, s.config(term, offsets()[2]));
    for (int t = 0; t < 50; ++t) {
      const VectorXd x = random_state(rng, 5.5);
      const bool verdict = feasible(cq, x);
      for (int j = 0; j < 10; ++j) {
        const ControlResult r = solve_mpct(cq, x, random_state(rng, 8.0));
        EXPECT_EQ(r.optimal(), verdict);
      }
    }
  }
}

TEST(Feasibility, SteadyStatesAreFeasible) {
  const auto& s = di_setup();
  std::mt19937 rng(45);
  const auto pts = sample_points(*s.sets.X_sp, rng, 50);
  for (auto term : {TerminalKind::Equality, TerminalKind::Inequality}) {
    for (int N = 1; N <= 3; ++N) {
      const CondensedQp cq = condense(s.model, s.cons, s.config(term, offsets()[0], false, N));
      for (const auto& x : pts) EXPECT_TRUE(feasible(cq, x));
    }
  }
}

TEST(Properties, EpigraphIsExact) {
  const auto& s = di_setup();
  std::mt19937 rng(46);
  for (int idx : {1, 2}) {
    const CondensedQp cq = condense(s.model, s.cons, s.config(TerminalKind::Inequality, offsets()[idx]));
    for (int t = 0; t < 50; ++t) {
      const VectorXd x = random_state(rng, 3.0), y = random_state(rng, 8.0);
      const ControlResult r = solve_mpct(cq, x, y);
      if (!r.optimal()) continue;
      const VectorXd d = r.y_a - y;
      const double target = idx == 1 ? d.lpNorm<1>() : d.lpNorm<Eigen::Infinity>();
      EXPECT_NEAR(r.aux.sum(), target, 1e-7);
    }
  }
}

TEST(Properties, ThetaLayoutIsEquivalent) {
  const auto& s = di_setup();
  std::mt19937 rng(47);
  for (auto term : {TerminalKind::Equality, TerminalKind::Inequality}) {
    const MpctConfig c = s.config(term, OffsetCostSpec::quadratic(100.0 * MatrixXd::Identity(2, 2)));
    MpctConfig ct = c;
    ct.use_theta = true;
    const CondensedQp a = condense(s.model, s.cons, c), b = condense(s.model, s.cons, ct);
    int checked = 0;
    for (int t = 0; t < 300 && checked < 50; ++t) {
      const VectorXd x = random_state(rng), y = random_state(rng, 6.0);
      const ControlResult ra = solve_mpct(a, x, y), rb = solve_mpct(b, x, y);
      ASSERT_EQ(ra.status, rb.status);
      if (!ra.optimal()) continue;
      EXPECT_NEAR(ra.value, rb.value, 1e-7 * (1 + ra.value));
      EXPECT_LE((ra.x_a - rb.x_a).cwiseAbs().maxCoeff(), 1e-6);
      EXPECT_LE((ra.u_a - rb.u_a).cwiseAbs().maxCoeff(), 1e-6);
      ++checked;
    }
    EXPECT_EQ(checked, 50);
  }
}

TEST(Properties, ExactPenaltyAboveMultiplierNorm) {
  const auto& s = di_setup();
  const VectorXd x = vec2(0.65, -2.55), y = vec2(-4.9, 0.2);
  const ControlResult reg =
      solve_mpct(build_regulation(s.model, s.cons, s.config(TerminalKind::Inequality, offsets()[0]), y), x, y);
  ASSERT_TRUE(reg.optimal());
  const auto solve_at = [&](double gamma) {
    return solve_mpct(condense(s.model, s.cons, s.config(TerminalKind::Inequality, OffsetCostSpec::one_norm(gamma))), x, y);
  };
  const ControlResult hi = solve_at(70.0);
  ASSERT_TRUE(hi.optimal());
  EXPECT_LE(std::abs(hi.value - reg.value), 1e-5);
  EXPECT_LE((hi.x_a - y).norm(), 1e-5);
  const ControlResult lo = solve_at(10.0);
  EXPECT_GT(reg.value - lo.value, 1e-3);
}

TEST(ParameterTransform, ReproducesDecision) {
  const auto& s = di_setup();
  std::mt19937 rng(48);
  for (auto term : {TerminalKind::Equality, TerminalKind::Inequality}) {
    for (const auto& off : offsets()) {
      const CondensedQp cq = condense(s.model, s.cons, s.config(term, off));
      const ParameterTransform t = parameter_transform(cq);
      EXPECT_EQ(t.W_x.rows(), cq.base.G.rows());
      EXPECT_EQ(t.W_sp.rows(), cq.base.G.rows());
      int checked = 0;
      for (int k = 0; k < 100 && checked < 20; ++k) {
        const VectorXd x = k == 0 ? VectorXd::Zero(2) : random_state(rng, 3.0);
        const VectorXd y = k == 0 ? VectorXd::Zero(2) : random_state(rng, 6.0);
        const ControlResult r = solve_mpct(cq, x, y);
        if (!r.optimal()) continue;
        const QpSolution zs = solve(transformed_problem(t, cq, x, y));
        ASSERT_TRUE(zs.optimal()) << to_string(term) << " kind " << static_cast<int>(off.kind) << " k " << k << " " << to_string(zs.status);
        const VectorXd ue = zs.z - t.L_x * x - t.L_sp * y;
        if (off.kind == OffsetCostSpec::Kind::Quadratic) {
          EXPECT_LE((ue - r.z).cwiseAbs().maxCoeff(), 1e-7);
        } else {
          // Epigraph variables can be non-unique; compare the control-relevant block.
          EXPECT_LE((ue.head(cq.layout.aux_offset) - r.z.head(cq.layout.aux_offset)).cwiseAbs().maxCoeff(), 1e-6);
        }
        EXPECT_NEAR(zs.value, r.value, 1e-7 * (1 + std::abs(r.value)));
        ++checked;
      }
    }
  }
}

TEST(ParameterTransform, SingularH) {
  const auto& s = di_setup();
  CondensedQp cq = condense(s.model, s.cons, s.config(TerminalKind::Equality, offsets()[0]));
  cq.base.H.setZero();
  EXPECT_EQ(code_of([&] { parameter_transform(cq); }), ErrorCode::SingularH);
}

}  // namespace
}  // namespace mpct
