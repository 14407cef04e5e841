#pragma once

#include <vector>

#include "convdl/domain.hpp"

namespace convdl::csc {

// Disjoint cells covering a region, visited cyclically by the locally greedy
// strategy. Cells are axis-aligned boxes with edge 2 L_i (so each holds
// 2^d |Theta| coordinates per atom); the last cell per axis absorbs the
// remainder. Regions smaller than one cell along an axis get a single cell.
struct SubPartition {
  Box region;
  std::vector<Box> cells;

  static SubPartition regular(const Box& region, const Domain& theta);
};

}  // namespace convdl::csc
