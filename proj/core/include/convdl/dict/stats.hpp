#pragma once

#include <vector>

#include "convdl/grid/worker_grid.hpp"
#include "convdl/tensor_ops.hpp"

namespace convdl::dict {

// Sufficient statistics of the dictionary objective at fixed code:
//   phi  — lag-domain Gram of the code, phi_{k,k'}[tau] = sum_w Z_k[w] Z_k'[tau+w]
//   rim  — code entries whose atom placement clips at the upper domain edge
// phi alone is exact on an unbounded lattice; the rim carries the correction
// for the finite zero-padded domain so gradients and objectives from the
// statistics match the direct computation to rounding error.
struct GramPhi {
  int atoms = 1;
  Domain lags;  // sizes 2 L_i - 1, lag tau indexed as tau_i + L_i - 1
  std::vector<double> values;  // atoms x atoms x |lags|

  GramPhi() = default;
  GramPhi(int k, const Domain& theta);

  double& at(int a, int b, const Pos& shifted) {
    return values[(static_cast<std::size_t>(a) * atoms + b) * lags.size() +
                  lags.index(shifted)];
  }
  double at(int a, int b, const Pos& shifted) const {
    return values[(static_cast<std::size_t>(a) * atoms + b) * lags.size() +
                  lags.index(shifted)];
  }
};

// psi_{k,p}[tau] = sum_w Z_k[w] X_p[w + tau], tau on the atom support.
struct CrossPsi {
  int atoms = 1;
  int channels = 1;
  Domain support;
  std::vector<double> values;  // atoms x |support| x channels (atom layout)

  CrossPsi() = default;
  CrossPsi(int k, int p, const Domain& theta);

  double& at(int k, const Pos& tau, int p) {
    return values[(static_cast<std::size_t>(k) * support.size() +
                   support.index(tau)) * channels + p];
  }
  double at(int k, const Pos& tau, int p) const {
    return values[(static_cast<std::size_t>(k) * support.size() +
                   support.index(tau)) * channels + p];
  }
};

struct RimEntry {
  int atom = 0;
  Pos pos{};
  double value = 0;
};

struct SufficientStats {
  GramPhi phi;
  CrossPsi psi;
  std::vector<RimEntry> rim;  // sorted by (atom, row-major position)
  double x_sqnorm = 0;
  Domain omega;
};

// Map-reduce of the statistics over the worker grid: each worker accumulates
// its sub-domain's contributions, partials are reduced in fixed worker order
// (bit-stable), and the scalar ||X||^2 rides along. With one worker this is
// exactly the single-process computation.
SufficientStats compute_stats(const ActivationMap& z, const Signal& x,
                              const grid::WorkerGrid& grid);

// Gradient of the data-fit term with respect to the dictionary, restricted to
// the atom support; descent steps reduce the objective.
Dictionary gradient_from_stats(const Dictionary& d, const SufficientStats& stats);

// 1/2 ||X - Z*D||^2 evaluated from the statistics only.
double objective_from_stats(const Dictionary& d, const SufficientStats& stats);

// Per-atom projection onto the unit l2 ball; idempotent.
void project_unit_ball(Dictionary& d);

// Largest eigenvalue estimate of the Gram operator D -> phi * D by power
// iteration (deterministic start), used to size gradient steps.
double gram_operator_norm(const GramPhi& phi, int channels, const Domain& theta,
                          int iterations = 20);

}  // namespace convdl::dict
