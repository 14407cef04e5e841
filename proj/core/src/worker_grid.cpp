#include "convdl/grid/worker_grid.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace convdl::grid {

WorkerGrid::WorkerGrid(const Domain& omega, const Domain& theta,
                       const Pos& axis_counts)
    : omega_(omega), theta_(theta), counts_(axis_counts) {
  theta.check_fits_within(omega);
  count_ = 1;
  cuts_.resize(omega.d);
  for (int i = 0; i < omega.d; ++i) {
    const index_t w = counts_[i];
    if (w < 1 || w > omega.sizes[i])
      throw GridError("invalid worker count along axis " + std::to_string(i), 0);
    count_ *= static_cast<int>(w);
    const index_t base = omega.sizes[i] / w;
    const index_t extra = omega.sizes[i] % w;
    cuts_[i].resize(w + 1);
    cuts_[i][0] = 0;
    for (index_t j = 0; j < w; ++j)
      cuts_[i][j + 1] = cuts_[i][j] + base + (j < extra ? 1 : 0);
  }
  for (int i = omega.d; i < kMaxDim; ++i) counts_[i] = 1;

  // snake order: row-major with the fastest axis alternating direction
  snake_.resize(count_);
  Box gridbox;
  gridbox.d = omega.d;
  for (int i = 0; i < omega.d; ++i) gridbox.hi[i] = counts_[i];
  int pos = 0;
  Pos c{};
  for (;;) {
    snake_[pos++] = index(c);
    int axis = omega.d - 1;
    // walk the last axis back and forth based on the parity of the prefix
    for (;;) {
      index_t parity = 0;
      for (int i = 0; i < axis; ++i) parity += c[i];
      const bool forward = (parity % 2) == 0;
      if (forward ? (c[axis] + 1 < counts_[axis]) : (c[axis] > 0)) {
        c[axis] += forward ? 1 : -1;
        break;
      }
      if (--axis < 0) break;
    }
    if (axis < 0) break;
  }
}

Pos WorkerGrid::coords(int w) const {
  Pos c{};
  for (int i = omega_.d - 1; i >= 0; --i) {
    c[i] = w % counts_[i];
    w /= static_cast<int>(counts_[i]);
  }
  return c;
}

int WorkerGrid::index(const Pos& coords) const {
  index_t idx = coords[0];
  for (int i = 1; i < omega_.d; ++i) idx = idx * counts_[i] + coords[i];
  return static_cast<int>(idx);
}

Box WorkerGrid::subdomain(int w) const {
  const Pos c = coords(w);
  Box b;
  b.d = omega_.d;
  for (int i = 0; i < omega_.d; ++i) {
    b.lo[i] = cuts_[i][c[i]];
    b.hi[i] = cuts_[i][c[i] + 1];
  }
  return b;
}

int WorkerGrid::owner(const Pos& p) const {
  Pos c{};
  for (int i = 0; i < omega_.d; ++i) {
    const auto& cut = cuts_[i];
    const auto it = std::upper_bound(cut.begin(), cut.end(), p[i]);
    c[i] = static_cast<index_t>(it - cut.begin()) - 1;
    if (c[i] < 0 || c[i] >= counts_[i])
      throw ShapeError("owner: position outside the domain");
  }
  return index(c);
}

std::vector<int> WorkerGrid::neighbors(int w) const {
  const Pos c = coords(w);
  std::vector<int> out;
  Box around;
  around.d = omega_.d;
  for (int i = 0; i < omega_.d; ++i) {
    around.lo[i] = std::max<index_t>(0, c[i] - 1);
    around.hi[i] = std::min(counts_[i], c[i] + 2);
  }
  for_each_pos(around, [&](const Pos& q) {
    const int other = index(q);
    if (other != w) out.push_back(other);
  });
  return out;
}

bool WorkerGrid::adjacent(int a, int b) const {
  if (a == b) return false;
  const Pos ca = coords(a), cb = coords(b);
  for (int i = 0; i < omega_.d; ++i)
    if (std::llabs(ca[i] - cb[i]) > 1) return false;
  return true;
}

std::string WorkerGrid::to_json() const {
  nlohmann::json j;
  j["axes"] = std::vector<index_t>(counts_.begin(), counts_.begin() + omega_.d);
  j["workers"] = nlohmann::json::array();
  for (int w = 0; w < count_; ++w) {
    const Box b = subdomain(w);
    nlohmann::json jw;
    jw["id"] = w;
    jw["lo"] = std::vector<index_t>(b.lo.begin(), b.lo.begin() + omega_.d);
    jw["hi"] = std::vector<index_t>(b.hi.begin(), b.hi.begin() + omega_.d);
    j["workers"].push_back(jw);
  }
  return j.dump();
}

index_t max_feasible_workers(const Domain& omega, const Domain& theta,
                             Split split) {
  if (split == Split::kLine) return omega.sizes[0] / (2 * theta.sizes[0]);
  index_t w = 1;
  for (int i = 0; i < omega.d; ++i) w *= omega.sizes[i] / (2 * theta.sizes[i]);
  return w;
}

namespace {

void factorizations(int d, index_t remaining, Pos current, int axis,
                    std::vector<Pos>& out) {
  if (axis == d - 1) {
    current[axis] = remaining;
    out.push_back(current);
    return;
  }
  for (index_t f = 1; f <= remaining; ++f) {
    if (remaining % f) continue;
    current[axis] = f;
    factorizations(d, remaining / f, current, axis + 1, out);
  }
}

}  // namespace

WorkerGrid make_grid(const Domain& omega, int workers, const Domain& theta,
                     Split split) {
  if (workers < 1) throw GridError("worker count must be >= 1", 0);
  theta.check_fits_within(omega);

  auto feasible = [&](const Pos& counts) {
    for (int i = 0; i < omega.d; ++i) {
      if (counts[i] < 1) return false;
      // smallest sub-domain edge along the axis
      if (omega.sizes[i] / counts[i] < 2 * theta.sizes[i]) return false;
    }
    return true;
  };

  if (split == Split::kLine) {
    Pos counts{1, 1, 1};
    counts[0] = workers;
    if (!feasible(counts))
      throw GridError(
          "line split with " + std::to_string(workers) +
              " workers violates the minimum sub-domain edge 2L; max feasible is " +
              std::to_string(max_feasible_workers(omega, theta, Split::kLine)),
          max_feasible_workers(omega, theta, Split::kLine));
    return WorkerGrid(omega, theta, counts);
  }

  std::vector<Pos> options;
  factorizations(omega.d, workers, Pos{1, 1, 1}, 0, options);
  std::optional<Pos> best;
  double best_aspect = 0;
  for (const Pos& counts : options) {
    if (!feasible(counts)) continue;
    double lo = 1e300, hi = 0;
    for (int i = 0; i < omega.d; ++i) {
      const double edge = static_cast<double>(omega.sizes[i]) / counts[i];
      lo = std::min(lo, edge);
      hi = std::max(hi, edge);
    }
    const double aspect = hi / lo;
    if (!best || aspect < best_aspect - 1e-12 ||
        (aspect < best_aspect + 1e-12 &&
         std::lexicographical_compare(counts.begin(), counts.end(),
                                      best->begin(), best->end()))) {
      best = counts;
      best_aspect = aspect;
    }
  }
  if (!best)
    throw GridError(
        "no grid of " + std::to_string(workers) +
            " workers satisfies the minimum sub-domain edge 2L; max feasible is " +
            std::to_string(max_feasible_workers(omega, theta)),
        max_feasible_workers(omega, theta));
  return WorkerGrid(omega, theta, *best);
}

}  // namespace convdl::grid
