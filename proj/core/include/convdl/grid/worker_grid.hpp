#pragma once

#include <string>
#include <vector>

#include "convdl/domain.hpp"

namespace convdl::grid {

enum class Split { kGrid, kLine };

// Partition of the signal domain into W contiguous rectangular sub-domains,
// one per worker, arranged on a d-dimensional grid of per-axis counts W_i.
// Worker ids are row-major over the grid coordinates.
class WorkerGrid {
 public:
  WorkerGrid() = default;
  WorkerGrid(const Domain& omega, const Domain& theta, const Pos& axis_counts);

  const Domain& omega() const { return omega_; }
  const Domain& theta() const { return theta_; }
  int worker_count() const { return count_; }
  index_t axis_count(int axis) const { return counts_[axis]; }
  const Pos& axis_counts() const { return counts_; }

  Pos coords(int w) const;
  int index(const Pos& coords) const;
  Box subdomain(int w) const;
  int owner(const Pos& position) const;

  // Grid-adjacent workers (Chebyshev distance 1 in grid coordinates).
  std::vector<int> neighbors(int w) const;
  bool adjacent(int a, int b) const;

  // Boustrophedon ordering of all workers; consecutive entries are
  // grid-adjacent, which keeps ring traffic on neighbor channels.
  const std::vector<int>& snake_order() const { return snake_; }

  std::string to_json() const;

 private:
  Domain omega_;
  Domain theta_;
  Pos counts_{1, 1, 1};
  int count_ = 1;
  // Per axis: cut points (W_i + 1 entries). The first (T_i mod W_i)
  // sub-domains get one extra row.
  std::vector<std::vector<index_t>> cuts_;
  std::vector<int> snake_;
};

// Largest worker count such that every sub-domain edge is at least 2 L_i.
index_t max_feasible_workers(const Domain& omega, const Domain& theta,
                             Split split = Split::kGrid);

// Choose per-axis worker counts with product `workers`, maximizing the
// squareness of the sub-domains subject to every edge >= 2 L_i. The line
// split forces all workers along axis 0. Throws GridError (naming the
// maximum feasible count) when no factorization qualifies.
WorkerGrid make_grid(const Domain& omega, int workers, const Domain& theta,
                     Split split = Split::kGrid);

}  // namespace convdl::grid
