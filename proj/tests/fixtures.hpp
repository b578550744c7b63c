#pragma once

#include "mpct/model.hpp"

namespace mpct::fixtures {

/// Double integrator with two inputs used throughout the examples.
inline LtiModel double_integrator() {
  LtiModel m;
  m.A = (MatrixXd(2, 2) << 1, 1, 0, 1).finished();
  m.B = (MatrixXd(2, 2) << 0, 0.5, 1, 0.5).finished();
  m.C = MatrixXd::Identity(2, 2);
  m.D = MatrixXd::Zero(2, 2);
  return m;
}

/// |x|_inf <= 5, |u|_inf <= 0.5.
inline ConstraintSet double_integrator_constraints(double lambda = 0.9999) {
  return ConstraintSet::box(VectorXd::Constant(2, 5.0), VectorXd::Constant(2, 0.5), lambda);
}

inline LtiModel scalar(double a, double b, double c = 1.0, double d = 0.0) {
  LtiModel m;
  m.A = MatrixXd::Constant(1, 1, a);
  m.B = MatrixXd::Constant(1, 1, b);
  m.C = MatrixXd::Constant(1, 1, c);
  m.D = MatrixXd::Constant(1, 1, d);
  return m;
}

}  // namespace mpct::fixtures

#include "mpct/controller.hpp"
#include "mpct/synthesis.hpp"

namespace mpct::fixtures {

/// Double-integrator tracking setup shared by the controller and simulation tests.
struct DiSetup {
  LtiModel model = double_integrator();
  ConstraintSet cons = double_integrator_constraints();
  SteadyStateMap map;
  ReachableSets sets;
  TerminalIngredients ingredients;

  DiSetup() {
    map = steady_state_basis(model);
    sets = reachable_steady_sets(model, cons, map);
    ingredients = compute_terminal_ingredients(model, cons, map, MatrixXd::Identity(2, 2),
                                               MatrixXd::Identity(2, 2));
  }

  MpctConfig config(TerminalKind terminal, const OffsetCostSpec& offset, bool use_theta = false,
                    int N = 3) const {
    MpctConfig c;
    c.N = N;
    c.Q = MatrixXd::Identity(2, 2);
    c.R = MatrixXd::Identity(2, 2);
    c.terminal = terminal;
    c.offset = offset;
    c.use_theta = use_theta;
    if (terminal == TerminalKind::Inequality) c.ingredients = ingredients;
    return c;
  }
};

inline const DiSetup& di_setup() {
  static const DiSetup setup;
  return setup;
}

inline VectorXd vec2(double a, double b) { return (VectorXd(2) << a, b).finished(); }

}  // namespace mpct::fixtures
