#include "convdl/grid/protocol.hpp"

#include <cmath>

#include <json.hpp>

namespace convdl::grid {

namespace {

Box shrunk(const Box& b, const Domain& theta, index_t factor) {
  Box r = b;
  for (int i = 0; i < b.d; ++i) {
    r.lo[i] += factor * theta.sizes[i];
    r.hi[i] -= factor * theta.sizes[i];
    if (r.hi[i] < r.lo[i]) r.hi[i] = r.lo[i];
  }
  return r;
}

}  // namespace

BorderGeometry::BorderGeometry(const Box& subdomain, const Domain& theta,
                               const Domain& omega)
    : sub_(subdomain),
      inner_L_(shrunk(subdomain, theta, 1)),
      inner_2L_(shrunk(subdomain, theta, 2)) {
  Pos margin{};
  for (int i = 0; i < subdomain.d; ++i) margin[i] = theta.sizes[i];
  slab_ = subdomain.expanded(margin).intersect(omega.box());
}

std::string BorderGeometry::to_json() const {
  auto box_json = [](const Box& b) {
    nlohmann::json j;
    j["lo"] = std::vector<index_t>(b.lo.begin(), b.lo.begin() + b.d);
    j["hi"] = std::vector<index_t>(b.hi.begin(), b.hi.begin() + b.d);
    return j;
  };
  nlohmann::json j;
  j["subdomain"] = box_json(sub_);
  j["interior_L"] = box_json(inner_L_);
  j["interior_2L"] = box_json(inner_2L_);
  j["slab"] = box_json(slab_);
  return j.dump();
}

std::vector<int> notify_set(const Pos& pos, const WorkerGrid& grid) {
  if (!grid.omega().contains(pos))
    throw ShapeError("notify_set: position outside the domain");
  const Domain& theta = grid.theta();
  Box v;
  v.d = grid.omega().d;
  for (int i = 0; i < v.d; ++i) {
    v.lo[i] = pos[i] - theta.sizes[i] + 1;
    v.hi[i] = pos[i] + theta.sizes[i];
  }
  const int self = grid.owner(pos);
  Pos margin{};
  for (int i = 0; i < v.d; ++i) margin[i] = theta.sizes[i];
  std::vector<int> out;
  for (int other : grid.neighbors(self)) {
    const Box reach =
        grid.subdomain(other).expanded(margin).intersect(grid.omega().box());
    if (v.intersects(reach)) out.push_back(other);
  }
  return out;
}

bool soft_lock_accepts(double candidate_magnitude, int self,
                       std::span<const Competitor> competitors) {
  for (const Competitor& c : competitors) {
    if (c.magnitude > candidate_magnitude) return false;
    if (c.magnitude == candidate_magnitude && c.owner < self) return false;
  }
  return true;
}

double interference_delta(std::span<const SimultaneousUpdate> updates,
                          csc::XCorrTable& xcorr) {
  // Each unordered pair contributes once: the cross-correlation is symmetric
  // under swapping the placements, and summing ordered pairs would double the
  // cross-term relative to the exact objective difference.
  double sum = 0;
  for (std::size_t a = 0; a < updates.size(); ++a)
    for (std::size_t b = a + 1; b < updates.size(); ++b) {
      xcorr.ensure_pair(updates[a].atom, updates[b].atom);
      sum += xcorr.pair_corr(updates[a].atom, updates[b].atom, updates[a].pos,
                             updates[b].pos) *
             updates[a].dz * updates[b].dz;
    }
  return sum;
}

AcceptanceBound acceptance_bound(const WorkerGrid& grid) {
  AcceptanceBound out;
  const Domain& omega = grid.omega();
  const Domain& theta = grid.theta();
  for (int i = 0; i < omega.d; ++i) {
    const double frac = static_cast<double>(grid.axis_count(i) * theta.sizes[i]) /
                        static_cast<double>(omega.sizes[i]);
    if (frac >= 1.0) out.clamped = true;
    out.value *= std::max(0.0, 1.0 - frac);
  }
  return out;
}

}  // namespace convdl::grid
