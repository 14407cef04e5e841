#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "convdl/domain.hpp"
#include "convdl/errors.hpp"

namespace convdl {

// Multichannel observation over a domain. Values are dense, row-major over
// positions with channels innermost. Reads outside the domain are zero by
// convention; writers never touch out-of-domain positions.
struct Signal {
  Domain domain;
  int channels = 1;
  std::vector<double> values;

  Signal() = default;
  Signal(const Domain& dom, int p)
      : domain(dom), channels(p),
        values(static_cast<std::size_t>(dom.size()) * p, 0.0) {
    if (p < 1) throw ShapeError("signal needs at least one channel");
  }

  double& at(const Pos& pos, int p) {
    return values[static_cast<std::size_t>(domain.index(pos)) * channels + p];
  }
  double at(const Pos& pos, int p) const {
    return values[static_cast<std::size_t>(domain.index(pos)) * channels + p];
  }
  // Zero-padded read.
  double padded(const Pos& pos, int p) const {
    return domain.contains(pos) ? at(pos, p) : 0.0;
  }

  bool all_finite() const {
    for (double v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

// K activation planes over a domain, stored atom-major: plane k is a dense
// row-major array over the domain. (Serialization to the .sig container uses
// the channels-innermost layout instead; see sig_io.)
struct ActivationMap {
  Domain domain;
  int atoms = 1;
  std::vector<double> values;

  ActivationMap() = default;
  ActivationMap(const Domain& dom, int k)
      : domain(dom), atoms(k),
        values(static_cast<std::size_t>(dom.size()) * k, 0.0) {
    if (k < 1) throw ShapeError("activation map needs at least one atom");
  }

  double& at(int k, const Pos& pos) {
    return values[static_cast<std::size_t>(k) * domain.size() + domain.index(pos)];
  }
  double at(int k, const Pos& pos) const {
    return values[static_cast<std::size_t>(k) * domain.size() + domain.index(pos)];
  }
  double padded(int k, const Pos& pos) const {
    return domain.contains(pos) ? at(k, pos) : 0.0;
  }

  const double* plane(int k) const {
    return values.data() + static_cast<std::size_t>(k) * domain.size();
  }
  double* plane(int k) {
    return values.data() + static_cast<std::size_t>(k) * domain.size();
  }

  index_t nonzero_count() const {
    index_t n = 0;
    for (double v : values) n += (v != 0.0);
    return n;
  }

  // Sparse post-processing hook: f(k, pos, value) for every nonzero entry.
  template <typename F>
  void for_each_nonzero(F&& f) const {
    const index_t n = domain.size();
    for (int k = 0; k < atoms; ++k) {
      const double* z = plane(k);
      for (index_t i = 0; i < n; ++i)
        if (z[i] != 0.0) f(k, domain.at(i), z[i]);
    }
  }

  double l1_norm() const {
    double s = 0;
    for (double v : values) s += std::abs(v);
    return s;
  }
  double max_abs() const {
    double m = 0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
  }
};

// The auxiliary correlation field maintained by coordinate descent has the
// same shape as the activation map it tracks.
using AuxBeta = ActivationMap;

// K atoms of P channels on a small support. Layout is atom-major, then
// row-major over the support with channels innermost, which matches the .sig
// container with K as the leading axis.
struct Dictionary {
  int atoms = 1;
  int channels = 1;
  Domain support;
  std::vector<double> values;

  Dictionary() = default;
  Dictionary(int k, int p, const Domain& theta)
      : atoms(k), channels(p), support(theta),
        values(static_cast<std::size_t>(k) * theta.size() * p, 0.0) {
    if (k < 1 || p < 1) throw ShapeError("dictionary needs atoms >= 1, channels >= 1");
  }

  double& at(int k, const Pos& pos, int p) {
    return values[(static_cast<std::size_t>(k) * support.size() + support.index(pos)) * channels + p];
  }
  double at(int k, const Pos& pos, int p) const {
    return values[(static_cast<std::size_t>(k) * support.size() + support.index(pos)) * channels + p];
  }

  const double* atom(int k) const {
    return values.data() + static_cast<std::size_t>(k) * support.size() * channels;
  }
  double* atom(int k) {
    return values.data() + static_cast<std::size_t>(k) * support.size() * channels;
  }

  double atom_sqnorm(int k) const {
    const double* a = atom(k);
    const index_t n = support.size() * channels;
    double s = 0;
    for (index_t i = 0; i < n; ++i) s += a[i] * a[i];
    return s;
  }

  double atom_max_abs(int k) const {
    const double* a = atom(k);
    const index_t n = support.size() * channels;
    double m = 0;
    for (index_t i = 0; i < n; ++i) m = std::max(m, std::abs(a[i]));
    return m;
  }

  // The support must fit inside the signal domain componentwise.
  void check_fits(const Domain& omega) const {
    if (support.d != omega.d)
      throw ShapeError("dictionary support dimension " + std::to_string(support.d) +
                       " != domain dimension " + std::to_string(omega.d));
    for (int i = 0; i < omega.d; ++i)
      if (support.sizes[i] > omega.sizes[i])
        throw ShapeError("atom support exceeds domain along axis " + std::to_string(i));
  }
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double sq_l2(const std::vector<double>& a) { return dot(a, a); }

}  // namespace convdl
