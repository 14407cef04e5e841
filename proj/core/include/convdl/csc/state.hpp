#pragma once

#include <vector>

#include "convdl/csc/xcorr.hpp"
#include "convdl/tensor_ops.hpp"

namespace convdl::csc {

// Coordinate-descent state over a rectangular slab of the signal domain.
// A sequential solve owns the whole domain; a distributed worker owns its
// sub-domain plus the mirrored extension ring. Both Z and the auxiliary
// correlation field beta are stored atom-major over the slab, addressed by
// global positions.
struct CscState {
  Box slab;          // global coordinates covered
  Domain local;      // slab sizes, for row-major indexing
  int atoms = 1;
  std::vector<double> z;
  std::vector<double> beta;

  CscState() = default;
  CscState(const Box& b, int k);

  index_t local_index(const Pos& p) const {
    Pos q{};
    for (int i = 0; i < local.d; ++i) q[i] = p[i] - slab.lo[i];
    return local.index(q);
  }
  double z_at(int k, const Pos& p) const {
    return z[static_cast<std::size_t>(k) * local.size() + local_index(p)];
  }
  double& z_at(int k, const Pos& p) {
    return z[static_cast<std::size_t>(k) * local.size() + local_index(p)];
  }
  double beta_at(int k, const Pos& p) const {
    return beta[static_cast<std::size_t>(k) * local.size() + local_index(p)];
  }
  double& beta_at(int k, const Pos& p) {
    return beta[static_cast<std::size_t>(k) * local.size() + local_index(p)];
  }
};

// Z = 0, beta = correlate(X, D) over the full domain.
CscState init_state(const Signal& x, const Dictionary& dict,
                    const ConvOptions& conv = {});

// Warm start: beta for an arbitrary existing code,
//   beta_k[w] = correlate(X - Z*D, D)_k[w] + Z_k[w] * ||atom k at w||^2.
CscState init_state_warm(const Signal& x, const Dictionary& dict,
                         const ActivationMap& z0, const XCorrTable& xc,
                         const ConvOptions& conv = {});

// Copy the owned region of a state into an activation map (used to assemble
// worker slabs; positions outside `owned` are ignored).
void export_region(const CscState& s, const Box& owned, ActivationMap& out);

// Restrict a full-domain state to a slab box (worker initialization).
CscState slice_state(const CscState& full, const Box& slab);

}  // namespace convdl::csc
