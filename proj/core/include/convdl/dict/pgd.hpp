#pragma once

#include "convdl/dict/stats.hpp"

namespace convdl::dict {

struct LineSearchConfig {
  double initial_step = 0;      // 0 -> 1 / power-iteration estimate
  double shrink = 0.5;          // in (0, 1)
  double sufficient_decrease = 1e-4;
  int max_backtracks = 30;

  void validate() const {
    if (shrink <= 0 || shrink >= 1)
      throw ConfigError("line search shrink must be in (0,1)");
    if (sufficient_decrease <= 0 || sufficient_decrease >= 1)
      throw ConfigError("sufficient decrease constant must be in (0,1)");
  }
};

struct PgdOptions {
  LineSearchConfig line_search;
  int max_iterations = 200;
  double rel_tolerance = 1e-8;  // stop when the relative decrease drops below
};

struct PgdStep {
  int iteration = 0;
  double step = 0;
  double objective = 0;
  int backtracks = 0;
};

struct PgdResult {
  Dictionary d;
  std::vector<PgdStep> steps;
  double initial_objective = 0;
  double final_objective = 0;
  bool stalled = false;  // the very first step exhausted its backtracks
};

// Projected gradient descent on the dictionary objective with Armijo
// backtracking, entirely on the sufficient statistics (cost independent of
// the signal size).
PgdResult pgd_update(const Dictionary& d, const SufficientStats& stats,
                     const PgdOptions& opts = {});

}  // namespace convdl::dict
