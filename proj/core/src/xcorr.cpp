#include "convdl/csc/xcorr.hpp"

#include <algorithm>

namespace convdl::csc {

XCorrTable::XCorrTable(const Dictionary& dict, const Domain& omega)
    : dict_(&dict), omega_(omega), theta_(dict.support) {
  dict.check_fits(omega);
  Pos sizes{};
  for (int i = 0; i < omega.d; ++i) sizes[i] = 2 * theta_.sizes[i] - 1;
  lag_ = Domain(omega.d, sizes);
  full_sqnorm_.resize(dict.atoms);
  for (int k = 0; k < dict.atoms; ++k) full_sqnorm_[k] = dict.atom_sqnorm(k);
  // squared norms of upper-clipped placements, one entry per clip vector
  clipped_self_.assign(static_cast<std::size_t>(dict.atoms) * theta_.size(), 0.0);
  for (int k = 0; k < dict.atoms; ++k) {
    for_each_pos(theta_.box(), [&](const Pos& clip) {
      Box kept = theta_.box();
      for (int i = 0; i < theta_.d; ++i) kept.hi[i] -= clip[i];
      double sum = 0;
      for_each_pos(kept, [&](const Pos& tau) {
        for (int p = 0; p < dict.channels; ++p) {
          const double v = dict.at(k, tau, p);
          sum += v * v;
        }
      });
      clipped_self_[static_cast<std::size_t>(k) * theta_.size() +
                    theta_.index(clip)] = sum;
    });
  }
  tables_.resize(static_cast<std::size_t>(dict.atoms) * dict.atoms);
  built_.assign(tables_.size(), 0);
}

double XCorrTable::max_full_sqnorm() const {
  return *std::max_element(full_sqnorm_.begin(), full_sqnorm_.end());
}

void XCorrTable::build_pair(int a, int b) {
  std::vector<double> table(static_cast<std::size_t>(lag_.size()), 0.0);
  const int p_count = dict_->channels;
  for_each_pos(lag_.box(), [&](const Pos& s) {
    Pos delta{};
    for (int i = 0; i < omega_.d; ++i) delta[i] = s[i] - (theta_.sizes[i] - 1);
    // overlap of supports: tau in Theta with tau + delta in Theta
    Box tbox = theta_.box();
    for (int i = 0; i < omega_.d; ++i) {
      tbox.lo[i] = std::max<index_t>(0, -delta[i]);
      tbox.hi[i] = std::min(theta_.sizes[i], theta_.sizes[i] - delta[i]);
    }
    double sum = 0;
    for_each_pos(tbox, [&](const Pos& tau) {
      Pos td = tau;
      for (int i = 0; i < omega_.d; ++i) td[i] += delta[i];
      for (int p = 0; p < p_count; ++p)
        sum += dict_->at(a, td, p) * dict_->at(b, tau, p);
    });
    table[lag_.index(s)] = sum;
  });
  tables_[pair_index(a, b)] = std::move(table);
}

void XCorrTable::ensure_pair(int a, int b) {
  const index_t idx = pair_index(a, b);
  if (built_[idx]) return;
  std::lock_guard<std::mutex> lock(build_mu_);
  if (built_[idx]) return;
  build_pair(a, b);
  built_[idx] = 1;
}

void XCorrTable::prepare_all() {
  for (int a = 0; a < dict_->atoms; ++a)
    for (int b = 0; b < dict_->atoms; ++b) ensure_pair(a, b);
}

double XCorrTable::pair_corr(int a, int b, const Pos& pa, const Pos& pb) const {
  // Overlap of the two placements, clipped to the domain. The lower edge can
  // never clip (placements start inside the domain and extend upward).
  bool clipped = false;
  Box overlap;
  overlap.d = omega_.d;
  for (int i = 0; i < omega_.d; ++i) {
    overlap.lo[i] = std::max(pa[i], pb[i]);
    const index_t unclipped = std::min(pa[i], pb[i]) + theta_.sizes[i];
    overlap.hi[i] = std::min(unclipped, omega_.sizes[i]);
    if (overlap.hi[i] < overlap.lo[i]) overlap.hi[i] = overlap.lo[i];
    clipped |= unclipped > omega_.sizes[i];
  }
  if (!clipped) {
    // sum_s D_a[s - pa] D_b[s - pb] = sum_t D_a[t + (pb - pa)] D_b[t]
    Pos delta{};
    for (int i = 0; i < omega_.d; ++i) delta[i] = pb[i] - pa[i];
    for (int i = 0; i < omega_.d; ++i)
      if (delta[i] <= -theta_.sizes[i] || delta[i] >= theta_.sizes[i]) return 0.0;
    return lag(a, b, delta);
  }
  if (overlap.empty()) return 0.0;
  const int p_count = dict_->channels;
  double sum = 0;
  for_each_pos(overlap, [&](const Pos& w) {
    Pos ta = w, tb = w;
    for (int i = 0; i < omega_.d; ++i) {
      ta[i] -= pa[i];
      tb[i] -= pb[i];
    }
    for (int p = 0; p < p_count; ++p)
      sum += dict_->at(a, ta, p) * dict_->at(b, tb, p);
  });
  return sum;
}

}  // namespace convdl::csc
