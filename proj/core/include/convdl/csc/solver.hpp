#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "convdl/csc/kernel.hpp"
#include "convdl/csc/partition.hpp"

namespace convdl::csc {

enum class Strategy { kGreedy, kRandomized, kLocallyGreedy };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

struct SolveOptions {
  Strategy strategy = Strategy::kLocallyGreedy;
  // Stopping tolerance on |dz|; 0 selects the default rule
  // 1e-2 * lambda / max_k ||D_k||^2.
  double eps = 0.0;
  index_t max_iter = 50'000'000;
  std::uint64_t seed = 0;      // randomized strategy only
  index_t log_every = 0;       // applied updates between checkpoints; 0 = ends only
  ConvOptions conv;
};

double default_eps(double lambda, const XCorrTable& xc);

struct LogRecord {
  index_t iter = 0;
  double t_sec = 0;
  double max_dz = 0;
  double objective = 0;
};

struct ConvergenceLog {
  std::vector<LogRecord> records;
  bool converged = false;
  index_t iterations = 0;      // applied coordinate moves
  index_t sweeps = 0;          // full passes over the cells
  int frozen_atoms = 0;        // atoms with vanishing norm, never updated
  double final_objective = 0;

  std::string to_jsonl() const;  // one {"iter","t_sec","max_dz","objective"} per line
};

struct SolveResult {
  ActivationMap z;
  ConvergenceLog log;
};

// Single-process coordinate descent for the sparse coding problem at fixed
// dictionary. The returned code satisfies
//   max_{k,w} |Z_k[w] - ST(beta_k[w], lambda) / ||atom k at w||^2| < eps
// whenever `log.converged` is set.
SolveResult solve(const Signal& x, const Dictionary& dict, double lambda,
                  const SolveOptions& opts = {});

// Largest remaining |dz| over the whole state (the optimality residual).
double optimality_residual(const CscState& s, const CoordKernel& kernel);

}  // namespace convdl::csc
