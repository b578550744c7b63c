#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mpct/controller.hpp"
#include "mpct/sim.hpp"

namespace mpct {

/// Tolerances that a config or --tol-override may set.
struct Tolerances {
  MonitorTolerances monitor;
  QpSettings qp;
  int mais_max_iter = 200;

  /// Sets one field by name; throws ConfigError for an unknown key or a bad value.
  void set(const std::string& key, const std::string& value);
  static std::vector<std::string> keys();
};

struct SweepSpec {
  VectorXd x0, y_sp;
  std::vector<double> gammas;
};

struct CompareEntry {
  std::string name;
  bool regulation = false;
  TerminalKind terminal = TerminalKind::Equality;
  std::optional<int> N;
  VectorXd y_sp;  // regulation target
};

struct CompareSpec {
  std::vector<CompareEntry> entries;
  VectorXd lo, hi;
  int per_axis = 21;
  int samples = 0;  // random points instead of a grid when positive
};

struct RunConfig {
  LtiModel model;
  ConstraintSet cons;
  MpctConfig controller;
  std::optional<Scenario> scenario;
  std::optional<SweepSpec> sweep;
  std::optional<CompareSpec> compare;
  Tolerances tol;
  unsigned seed = 1;
};

/// Parses and validates a config document. Malformed JSON reports line and column;
/// schema errors name the offending key. Throws ConfigError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Serialization shared by the config and report writers.
std::string ingredients_to_json(const TerminalIngredients& ti);
TerminalIngredients ingredients_from_json(const std::string& text);

}  // namespace mpct
