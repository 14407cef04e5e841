#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "convdl/errors.hpp"

namespace convdl {

inline constexpr int kMaxDim = 3;

using index_t = std::int64_t;

// A position in up to kMaxDim dimensions. Coordinates beyond the active
// dimension count are kept at zero so positions compare and hash cheaply.
using Pos = std::array<index_t, kMaxDim>;

inline Pos make_pos(index_t x) { return Pos{x, 0, 0}; }
inline Pos make_pos(index_t x, index_t y) { return Pos{x, y, 0}; }
inline Pos make_pos(index_t x, index_t y, index_t z) { return Pos{x, y, z}; }

// Half-open axis-aligned integer box [lo, hi). The sub-domains, cells,
// borders and update neighborhoods are all boxes or unions of boxes.
struct Box {
  int d = 1;
  Pos lo{};
  Pos hi{};

  index_t volume() const {
    index_t v = 1;
    for (int i = 0; i < d; ++i) {
      if (hi[i] <= lo[i]) return 0;
      v *= hi[i] - lo[i];
    }
    return v;
  }

  bool empty() const { return volume() == 0; }

  bool contains(const Pos& p) const {
    for (int i = 0; i < d; ++i)
      if (p[i] < lo[i] || p[i] >= hi[i]) return false;
    return true;
  }

  Box intersect(const Box& o) const {
    Box r;
    r.d = d;
    for (int i = 0; i < d; ++i) {
      r.lo[i] = lo[i] > o.lo[i] ? lo[i] : o.lo[i];
      r.hi[i] = hi[i] < o.hi[i] ? hi[i] : o.hi[i];
      if (r.hi[i] < r.lo[i]) r.hi[i] = r.lo[i];
    }
    return r;
  }

  bool intersects(const Box& o) const { return !intersect(o).empty(); }

  // Grow by `margin` on both sides of every axis.
  Box expanded(const Pos& margin) const {
    Box r = *this;
    for (int i = 0; i < d; ++i) {
      r.lo[i] -= margin[i];
      r.hi[i] += margin[i];
    }
    return r;
  }

  std::string to_string() const;
};

// A d-dimensional index domain [0, T_1) x ... x [0, T_d).
struct Domain {
  int d = 1;
  Pos sizes{1, 0, 0};

  Domain() = default;
  Domain(int dim, const Pos& t) : d(dim), sizes(t) { validate(); }
  static Domain d1(index_t t) { return Domain(1, make_pos(t)); }
  static Domain d2(index_t t1, index_t t2) { return Domain(2, make_pos(t1, t2)); }
  static Domain d3(index_t t1, index_t t2, index_t t3) {
    return Domain(3, make_pos(t1, t2, t3));
  }

  void validate() const {
    if (d < 1 || d > kMaxDim)
      throw ShapeError("domain dimension must be in [1, " +
                       std::to_string(kMaxDim) + "], got " + std::to_string(d));
    for (int i = 0; i < d; ++i)
      if (sizes[i] <= 0)
        throw ShapeError("domain sizes must be positive");
    for (int i = d; i < kMaxDim; ++i)
      if (sizes[i] != 0)
        throw ShapeError("domain sizes beyond dimension d must be zero");
  }

  index_t size() const {
    index_t n = 1;
    for (int i = 0; i < d; ++i) n *= sizes[i];
    return n;
  }

  bool contains(const Pos& p) const {
    for (int i = 0; i < d; ++i)
      if (p[i] < 0 || p[i] >= sizes[i]) return false;
    return true;
  }

  Box box() const {
    Box b;
    b.d = d;
    for (int i = 0; i < d; ++i) b.hi[i] = sizes[i];
    return b;
  }

  // Row-major linear index; the last axis is fastest.
  index_t index(const Pos& p) const {
    index_t idx = p[0];
    for (int i = 1; i < d; ++i) idx = idx * sizes[i] + p[i];
    return idx;
  }

  Pos at(index_t idx) const {
    Pos p{};
    for (int i = d - 1; i >= 0; --i) {
      p[i] = idx % sizes[i];
      idx /= sizes[i];
    }
    return p;
  }

  // e.g. an atom support inside a signal domain
  void check_fits_within(const Domain& outer) const {
    if (d != outer.d)
      throw ShapeError("dimension mismatch: " + std::to_string(d) + " vs " +
                       std::to_string(outer.d));
    for (int i = 0; i < d; ++i)
      if (sizes[i] > outer.sizes[i])
        throw ShapeError("support exceeds domain along axis " + std::to_string(i));
  }

  bool operator==(const Domain& o) const {
    if (d != o.d) return false;
    for (int i = 0; i < d; ++i)
      if (sizes[i] != o.sizes[i]) return false;
    return true;
  }
  bool operator!=(const Domain& o) const { return !(*this == o); }

  std::string to_string() const;
};

// Visit every position of a box in row-major order.
template <typename F>
void for_each_pos(const Box& b, F&& f) {
  if (b.empty()) return;
  Pos p = b.lo;
  for (;;) {
    f(p);
    int i = b.d - 1;
    while (i >= 0) {
      if (++p[i] < b.hi[i]) break;
      p[i] = b.lo[i];
      --i;
    }
    if (i < 0) return;
  }
}

// Visit a box as contiguous row-major runs of the enclosing domain:
// f(first_linear_index, run_length, first_pos) once per run. This is the
// fast path for every inner loop that touches a rectangular window.
template <typename F>
void for_each_run(const Domain& dom, const Box& b, F&& f) {
  if (b.empty()) return;
  const int d = dom.d;
  const index_t len = b.hi[d - 1] - b.lo[d - 1];
  Pos p = b.lo;
  for (;;) {
    f(dom.index(p), len, p);
    int i = d - 2;
    while (i >= 0) {
      if (++p[i] < b.hi[i]) break;
      p[i] = b.lo[i];
      --i;
    }
    if (i < 0) return;
  }
}

}  // namespace convdl
