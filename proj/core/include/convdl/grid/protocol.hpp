#pragma once

#include <optional>
#include <span>

#include "convdl/csc/xcorr.hpp"
#include "convdl/grid/worker_grid.hpp"

namespace convdl::grid {

// Border sets of one sub-domain S_w = prod [l_i, u_i):
//   inner border  B_L: within L_i of some face of S_w (inside S_w),
//   emission zone B_2L: within 2 L_i of some face (inside S_w),
//   extension     E_L: the ring of width L_i around S_w, clipped to the
//                      domain (owned by neighbors, mirrored by this worker).
class BorderGeometry {
 public:
  BorderGeometry() = default;
  BorderGeometry(const Box& subdomain, const Domain& theta, const Domain& omega);

  const Box& subdomain() const { return sub_; }
  // The worker's slab: S_w plus the mirrored ring, as one box.
  const Box& slab() const { return slab_; }

  bool in_subdomain(const Pos& p) const { return sub_.contains(p); }
  bool in_border_L(const Pos& p) const {
    return sub_.contains(p) && !inner_L_.contains(p);
  }
  bool in_border_2L(const Pos& p) const {
    return sub_.contains(p) && !inner_2L_.contains(p);
  }
  bool in_extension(const Pos& p) const {
    return slab_.contains(p) && !sub_.contains(p);
  }
  bool in_slab(const Pos& p) const { return slab_.contains(p); }

  std::string to_json() const;

 private:
  Box sub_;
  Box inner_L_;   // S_w shrunk by L on every face (may be empty)
  Box inner_2L_;  // S_w shrunk by 2L on every face (may be empty)
  Box slab_;      // S_w expanded by L, clipped to the domain
};

// Workers other than the owner whose sub-domain or extension ring overlaps
// the update neighborhood V(pos); exactly the recipients of the update
// triplet. Always a subset of the owner's grid neighbors.
std::vector<int> notify_set(const Pos& pos, const WorkerGrid& grid);

// One competing optimal move mirrored from the extension ring.
struct Competitor {
  double magnitude = 0;
  int owner = -1;
};

// The decentralized border arbitration: accept the candidate magnitude
// against the mirrored moves in V(pos) /\ E_L(S_w). Strictly larger wins;
// on exact equality the smaller worker index wins.
bool soft_lock_accepts(double candidate_magnitude, int self,
                       std::span<const Competitor> competitors);

// Cross-term by which simultaneous updates deviate from the sum of their
// individual cost reductions; the total cost change is
//   sum_w delta_E_w  -  interference_delta(...).
struct SimultaneousUpdate {
  int atom = 0;
  Pos pos{};
  double dz = 0;
};
double interference_delta(std::span<const SimultaneousUpdate> updates,
                          csc::XCorrTable& xcorr);

// Closed-form lower bound on the probability that a uniformly placed border
// candidate is accepted: prod_i (1 - W_i L_i / T_i), clamped to [0, 1].
// Returns the bound plus a flag telling whether clamping occurred.
struct AcceptanceBound {
  double value = 1.0;
  bool clamped = false;
};
AcceptanceBound acceptance_bound(const WorkerGrid& grid);

}  // namespace convdl::grid
