#pragma once

#include "convdl/csc/state.hpp"

namespace convdl::csc {

// One candidate coordinate move: atom, position, and the additive update
// toward the closed-form 1-D optimum.
struct CandidateUpdate {
  int atom = -1;
  Pos pos{};
  double old_value = 0.0;
  double new_value = 0.0;
  double dz = 0.0;  // new_value - old_value
  bool frozen = false;

  double abs_dz() const { return dz < 0 ? -dz : dz; }
};

// The coordinate move engine: closed-form updates, greedy selection inside a
// region, the incremental beta maintenance after a move, and the closed-form
// cost change. Pure with respect to everything but the state it is given.
class CoordKernel {
 public:
  CoordKernel(const XCorrTable& xc, double lambda)
      : xc_(&xc), lambda_(lambda) {}

  double lambda() const { return lambda_; }
  const XCorrTable& xcorr() const { return *xc_; }

  // Closed-form optimal move for one coordinate. Coordinates whose effective
  // atom norm vanishes (degenerate atom, or a fully clipped placement) are
  // frozen: the move is forced to zero.
  CandidateUpdate eval(const CscState& s, int k, const Pos& pos) const {
    const double c = xc_->effective_sqnorm(k, pos);
    CandidateUpdate u;
    u.atom = k;
    u.pos = pos;
    u.old_value = s.z_at(k, pos);
    if (c <= kDegenerateNorm) {
      u.new_value = u.old_value;
      u.frozen = true;
      return u;
    }
    u.new_value = soft_threshold(s.beta_at(k, pos), lambda_) / c;
    u.dz = u.new_value - u.old_value;
    return u;
  }

  // argmax |dz| over [0, K) x region; ties broken toward the smallest atom
  // index, then the first position in row-major order.
  CandidateUpdate best_in(const CscState& s, const Box& region) const;

  // Apply the move: write Z, update beta inside the update neighborhood
  // (own coordinate excluded), all clipped to the state's slab.
  void apply(CscState& s, const CandidateUpdate& u) const;

  // Same beta propagation for a move that happened elsewhere (the receiving
  // side of an update message); does not touch Z.
  void propagate_beta(CscState& s, int atom, const Pos& pos, double dz) const;

  // Closed-form change of the objective if `u` were applied to `s`
  // (positive means the cost decreases).
  double cost_delta(const CscState& s, const CandidateUpdate& u) const;

  // The update neighborhood V(pos) = prod_i [pos_i - L_i + 1, pos_i + L_i).
  Box neighborhood(const Pos& pos) const {
    const Domain& theta = xc_->dictionary().support;
    Box b;
    b.d = xc_->omega().d;
    for (int i = 0; i < b.d; ++i) {
      b.lo[i] = pos[i] - theta.sizes[i] + 1;
      b.hi[i] = pos[i] + theta.sizes[i];
    }
    return b;
  }

  static constexpr double kDegenerateNorm = 1e-30;

 private:
  const XCorrTable* xc_;
  double lambda_;
};

}  // namespace convdl::csc
