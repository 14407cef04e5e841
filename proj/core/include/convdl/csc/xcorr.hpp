#pragma once

#include <memory>
#include <mutex>
#include <vector>

#include "convdl/tensors.hpp"

namespace convdl::csc {

// Pairwise atom cross-correlations on the lag domain
// Phi = prod_i [-L_i + 1, L_i), plus the boundary-aware variants needed when
// an atom placement clips at the upper edge of the signal domain.
//
// The lag tables are memoized per (a, b) pair. Call prepare_all() before
// sharing an instance across workers; after that, reads are lock-free.
class XCorrTable {
 public:
  XCorrTable(const Dictionary& dict, const Domain& omega);

  const Domain& omega() const { return omega_; }
  const Domain& lag_domain() const { return lag_; }
  const Dictionary& dictionary() const { return *dict_; }

  // Full-support squared norms ||D_k||_2^2.
  double full_sqnorm(int k) const { return full_sqnorm_[k]; }
  double max_full_sqnorm() const;

  // True iff the atom placed at `pos` lies entirely inside the domain, so the
  // pure lag tables apply to every pair involving that placement.
  bool placement_interior(const Pos& pos) const {
    for (int i = 0; i < omega_.d; ++i)
      if (pos[i] + theta_.sizes[i] > omega_.sizes[i]) return false;
    return true;
  }

  // sum_tau <D_a[tau + delta], D_b[tau]> over the unclipped overlap.
  double lag(int a, int b, const Pos& delta) const {
    return tables_[pair_index(a, b)][lag_.index(shift(delta))];
  }

  // Raw lag table for pair (a, b), row-major over the lag domain with index
  // delta_i + L_i - 1. Valid once the pair has been built.
  const double* lag_table(int a, int b) const {
    return tables_[pair_index(a, b)].data();
  }
  index_t lag_index(const Pos& delta) const { return lag_.index(shift(delta)); }

  // <atom a placed at pa, atom b placed at pb> restricted to the domain.
  // Falls back to the lag table whenever no clipping can occur.
  double pair_corr(int a, int b, const Pos& pa, const Pos& pb) const;

  // ||atom k placed at pos||^2 restricted to the domain ("effective" norm);
  // equals the full norm for interior placements. Clipped placements hit a
  // precomputed per-clip-amount table.
  double effective_sqnorm(int k, const Pos& pos) const {
    Pos clip{};
    bool interior = true;
    for (int i = 0; i < omega_.d; ++i) {
      const index_t c = pos[i] + theta_.sizes[i] - omega_.sizes[i];
      if (c > 0) {
        clip[i] = c;
        interior = false;
      }
    }
    if (interior) return full_sqnorm_[k];
    return clipped_self_[static_cast<std::size_t>(k) * theta_.size() +
                         theta_.index(clip)];
  }

  // Build the lag tables for every pair (solvers call this once up front).
  void prepare_all();
  // Build one pair lazily; thread-safe, used by light-weight callers.
  void ensure_pair(int a, int b);

 private:
  index_t pair_index(int a, int b) const {
    return static_cast<index_t>(a) * dict_->atoms + b;
  }
  Pos shift(const Pos& delta) const {
    Pos s{};
    for (int i = 0; i < omega_.d; ++i) s[i] = delta[i] + theta_.sizes[i] - 1;
    return s;
  }
  void build_pair(int a, int b);

  const Dictionary* dict_;
  Domain omega_;
  Domain theta_;
  Domain lag_;  // sizes 2 L_i - 1, index shifted by L_i - 1
  std::vector<double> full_sqnorm_;
  std::vector<double> clipped_self_;  // K x Theta, indexed by clip amounts
  std::vector<std::vector<double>> tables_;
  std::vector<char> built_;
  std::mutex build_mu_;
};

}  // namespace convdl::csc
