#include "convdl/csc/state.hpp"

#include <algorithm>

#include "convdl/csc/kernel.hpp"
#include "convdl/csc/partition.hpp"

namespace convdl::csc {

CscState::CscState(const Box& b, int k) : slab(b), atoms(k) {
  Pos sizes{};
  for (int i = 0; i < b.d; ++i) sizes[i] = b.hi[i] - b.lo[i];
  local = Domain(b.d, sizes);
  const std::size_t n = static_cast<std::size_t>(local.size()) * k;
  z.assign(n, 0.0);
  beta.assign(n, 0.0);
}

CscState init_state(const Signal& x, const Dictionary& dict,
                    const ConvOptions& conv) {
  CscState s(x.domain.box(), dict.atoms);
  ActivationMap b0 = correlate(x, dict, conv);
  s.beta = std::move(b0.values);  // both atom-major over the domain
  return s;
}

CscState init_state_warm(const Signal& x, const Dictionary& dict,
                         const ActivationMap& z0, const XCorrTable& xc,
                         const ConvOptions& conv) {
  if (z0.domain != x.domain || z0.atoms != dict.atoms)
    throw ShapeError("warm start: activation shape mismatch");
  CscState s(x.domain.box(), dict.atoms);
  const Signal rec = convolve(z0, dict, conv);
  Signal residual = x;
  for (std::size_t i = 0; i < residual.values.size(); ++i)
    residual.values[i] -= rec.values[i];
  ActivationMap b0 = correlate(residual, dict, conv);
  s.beta = std::move(b0.values);
  s.z = z0.values;
  // add back each coordinate's own contribution
  z0.for_each_nonzero([&](int k, const Pos& w, double v) {
    s.beta_at(k, w) += v * xc.effective_sqnorm(k, w);
  });
  return s;
}

void export_region(const CscState& s, const Box& owned, ActivationMap& out) {
  const index_t n = s.local.size();
  Box local_box = owned;
  for (int i = 0; i < owned.d; ++i) {
    local_box.lo[i] -= s.slab.lo[i];
    local_box.hi[i] -= s.slab.lo[i];
  }
  for (int k = 0; k < s.atoms; ++k) {
    const double* src = s.z.data() + static_cast<std::size_t>(k) * n;
    double* dst = out.plane(k);
    for_each_run(s.local, local_box, [&](index_t idx, index_t len, const Pos& p) {
      Pos g = p;
      for (int i = 0; i < owned.d; ++i) g[i] += s.slab.lo[i];
      std::copy(src + idx, src + idx + len, dst + out.domain.index(g));
    });
  }
}

CscState slice_state(const CscState& full, const Box& slab) {
  CscState s(slab, full.atoms);
  const index_t n_full = full.local.size();
  const index_t n = s.local.size();
  Box in_full = slab;
  for (int i = 0; i < slab.d; ++i) {
    in_full.lo[i] -= full.slab.lo[i];
    in_full.hi[i] -= full.slab.lo[i];
  }
  for (int k = 0; k < full.atoms; ++k) {
    const double* zsrc = full.z.data() + static_cast<std::size_t>(k) * n_full;
    const double* bsrc = full.beta.data() + static_cast<std::size_t>(k) * n_full;
    double* zdst = s.z.data() + static_cast<std::size_t>(k) * n;
    double* bdst = s.beta.data() + static_cast<std::size_t>(k) * n;
    for_each_run(full.local, in_full, [&](index_t idx, index_t len, const Pos& p) {
      Pos q{};
      for (int i = 0; i < slab.d; ++i)
        q[i] = p[i] + full.slab.lo[i] - slab.lo[i];
      const index_t dst_idx = s.local.index(q);
      std::copy(zsrc + idx, zsrc + idx + len, zdst + dst_idx);
      std::copy(bsrc + idx, bsrc + idx + len, bdst + dst_idx);
    });
  }
  return s;
}

// --- CoordKernel -------------------------------------------------------------

CandidateUpdate CoordKernel::best_in(const CscState& s, const Box& region) const {
  if (region.empty()) throw ShapeError("best_candidate: empty region");
  const index_t n = s.local.size();
  Box local_box = region;
  for (int i = 0; i < region.d; ++i) {
    local_box.lo[i] -= s.slab.lo[i];
    local_box.hi[i] -= s.slab.lo[i];
  }
  // every placement in the region unclipped -> per-atom norms are constants
  Pos last = region.hi;
  for (int i = 0; i < region.d; ++i) --last[i];
  const bool all_interior = xc_->placement_interior(last);

  CandidateUpdate best = eval(s, 0, region.lo);
  double best_mag = best.abs_dz();
  for (int k = 0; k < s.atoms; ++k) {
    const double* bplane = s.beta.data() + static_cast<std::size_t>(k) * n;
    const double* zplane = s.z.data() + static_cast<std::size_t>(k) * n;
    const double c_k = xc_->full_sqnorm(k);
    if (all_interior && c_k <= kDegenerateNorm) continue;  // frozen atom
    const double inv_c = all_interior ? 1.0 / c_k : 0.0;
    for_each_run(s.local, local_box, [&](index_t idx, index_t len, const Pos& p) {
      Pos g = p;
      for (int i = 0; i < region.d; ++i) g[i] += s.slab.lo[i];
      for (index_t j = 0; j < len; ++j) {
        double dz, nv;
        if (all_interior) {
          nv = soft_threshold(bplane[idx + j], lambda_) * inv_c;
          dz = nv - zplane[idx + j];
        } else {
          const double c = xc_->effective_sqnorm(k, g);
          if (c > kDegenerateNorm) {
            nv = soft_threshold(bplane[idx + j], lambda_) / c;
            dz = nv - zplane[idx + j];
          } else {
            nv = zplane[idx + j];
            dz = 0;
          }
        }
        const double mag = dz < 0 ? -dz : dz;
        if (mag > best_mag) {
          best_mag = mag;
          best.atom = k;
          best.pos = g;
          best.old_value = zplane[idx + j];
          best.new_value = nv;
          best.dz = dz;
          best.frozen = false;
        }
        ++g[region.d - 1];
      }
    });
  }
  return best;
}

void CoordKernel::propagate_beta(CscState& s, int atom, const Pos& pos,
                                 double dz) const {
  if (dz == 0.0) return;
  const Box v = neighborhood(pos).intersect(s.slab);
  if (v.empty()) return;
  const Domain& theta = xc_->dictionary().support;
  const Domain& lag_dom = xc_->lag_domain();
  const index_t n = s.local.size();
  Box vloc = v;
  for (int i = 0; i < v.d; ++i) {
    vloc.lo[i] -= s.slab.lo[i];
    vloc.hi[i] -= s.slab.lo[i];
  }
  const bool interior = xc_->placement_interior(pos);
  for (int k = 0; k < s.atoms; ++k) {
    double* bplane = s.beta.data() + static_cast<std::size_t>(k) * n;
    if (interior) {
      const double* table = xc_->lag_table(atom, k);
      for_each_run(s.local, vloc, [&](index_t idx, index_t len, const Pos& p) {
        Pos shift{};
        for (int i = 0; i < v.d; ++i)
          shift[i] = p[i] + s.slab.lo[i] - pos[i] + theta.sizes[i] - 1;
        const double* trow = table + lag_dom.index(shift);
        for (index_t j = 0; j < len; ++j) bplane[idx + j] -= trow[j] * dz;
      });
    } else {
      for_each_run(s.local, vloc, [&](index_t idx, index_t len, const Pos& p) {
        Pos g = p;
        for (int i = 0; i < v.d; ++i) g[i] += s.slab.lo[i];
        for (index_t j = 0; j < len; ++j) {
          bplane[idx + j] -= xc_->pair_corr(atom, k, pos, g) * dz;
          ++g[v.d - 1];
        }
      });
    }
  }
}

void CoordKernel::apply(CscState& s, const CandidateUpdate& u) const {
  const double own = s.beta_at(u.atom, u.pos);
  s.z_at(u.atom, u.pos) = u.new_value;
  propagate_beta(s, u.atom, u.pos, u.dz);
  s.beta_at(u.atom, u.pos) = own;  // the definition excludes the own coordinate
}

double CoordKernel::cost_delta(const CscState& s, const CandidateUpdate& u) const {
  const double c = xc_->effective_sqnorm(u.atom, u.pos);
  const double b = s.beta_at(u.atom, u.pos);
  const double z0 = u.old_value, z1 = u.new_value;
  const double a0 = z0 < 0 ? -z0 : z0, a1 = z1 < 0 ? -z1 : z1;
  return 0.5 * c * (z0 * z0 - z1 * z1) - b * (z0 - z1) + lambda_ * (a0 - a1);
}

// --- SubPartition ------------------------------------------------------------

SubPartition SubPartition::regular(const Box& region, const Domain& theta) {
  SubPartition part;
  part.region = region;
  const int d = region.d;
  Pos counts{1, 1, 1};
  Pos edge{};
  for (int i = 0; i < d; ++i) {
    const index_t extent = region.hi[i] - region.lo[i];
    edge[i] = 2 * theta.sizes[i];
    counts[i] = std::max<index_t>(1, extent / edge[i]);
  }
  Box grid;
  grid.d = d;
  grid.hi = counts;
  for_each_pos(grid, [&](const Pos& c) {
    Box cell;
    cell.d = d;
    for (int i = 0; i < d; ++i) {
      cell.lo[i] = region.lo[i] + c[i] * edge[i];
      cell.hi[i] = (c[i] + 1 == counts[i]) ? region.hi[i]
                                           : region.lo[i] + (c[i] + 1) * edge[i];
    }
    part.cells.push_back(cell);
  });
  return part;
}

}  // namespace convdl::csc
