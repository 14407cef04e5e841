#include "convdl/dict/stats.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "fft_engine.hpp"

namespace convdl::dict {

GramPhi::GramPhi(int k, const Domain& theta) : atoms(k) {
  Pos sizes{};
  for (int i = 0; i < theta.d; ++i) sizes[i] = 2 * theta.sizes[i] - 1;
  lags = Domain(theta.d, sizes);
  values.assign(static_cast<std::size_t>(k) * k * lags.size(), 0.0);
}

CrossPsi::CrossPsi(int k, int p, const Domain& theta)
    : atoms(k), channels(p), support(theta) {
  values.assign(static_cast<std::size_t>(k) * theta.size() * p, 0.0);
}

namespace {

bool clips_at_edge(const Pos& u, const Domain& theta, const Domain& omega) {
  for (int i = 0; i < omega.d; ++i)
    if (u[i] + theta.sizes[i] > omega.sizes[i]) return true;
  return false;
}

struct Partial {
  GramPhi phi;
  CrossPsi psi;
  std::vector<RimEntry> rim;
  double x_sqnorm = 0;
};

Partial worker_partial(const ActivationMap& z, const Signal& x,
                       const Domain& theta, const Box& sub) {
  const Domain& omega = z.domain;
  Partial out{GramPhi(z.atoms, theta), CrossPsi(z.atoms, x.channels, theta), {}, 0};

  Box lag_box;
  lag_box.d = omega.d;
  for (int i = 0; i < omega.d; ++i) {
    lag_box.lo[i] = -(theta.sizes[i] - 1);
    lag_box.hi[i] = theta.sizes[i];
  }

  for (int k = 0; k < z.atoms; ++k) {
    const double* plane = z.plane(k);
    for_each_run(omega, sub, [&](index_t idx, index_t len, const Pos& p0) {
      Pos u = p0;
      for (index_t j = 0; j < len; ++j, ++u[omega.d - 1]) {
        const double val = plane[idx + j];
        if (val == 0.0) continue;
        // gram contributions at every lag, reading the halo as needed
        for (int k2 = 0; k2 < z.atoms; ++k2) {
          for_each_pos(lag_box, [&](const Pos& tau) {
            Pos g = u;
            for (int i = 0; i < omega.d; ++i) g[i] += tau[i];
            const double other = z.padded(k2, g);
            if (other == 0.0) return;
            Pos s = tau;
            for (int i = 0; i < omega.d; ++i) s[i] += theta.sizes[i] - 1;
            out.phi.at(k, k2, s) += val * other;
          });
        }
        // cross term with the signal
        for_each_pos(theta.box(), [&](const Pos& tau) {
          Pos g = u;
          for (int i = 0; i < omega.d; ++i) g[i] += tau[i];
          if (!omega.contains(g)) return;
          for (int p = 0; p < x.channels; ++p)
            out.psi.at(k, tau, p) += val * x.at(g, p);
        });
        if (clips_at_edge(u, theta, omega)) out.rim.push_back({k, u, val});
      }
    });
  }

  for_each_run(omega, sub, [&](index_t idx, index_t len, const Pos&) {
    const double* row = x.values.data() + idx * x.channels;
    for (index_t j = 0; j < len * x.channels; ++j) out.x_sqnorm += row[j] * row[j];
  });
  return out;
}

}  // namespace

SufficientStats compute_stats(const ActivationMap& z, const Signal& x,
                              const grid::WorkerGrid& grid) {
  if (z.domain != x.domain)
    throw ShapeError("compute_stats: code and signal domains differ");
  const Domain& theta = grid.theta();

  SufficientStats stats;
  stats.omega = z.domain;
  stats.phi = GramPhi(z.atoms, theta);
  stats.psi = CrossPsi(z.atoms, x.channels, theta);

  // map per worker, reduce in fixed worker order
  for (int w = 0; w < grid.worker_count(); ++w) {
    Partial part = worker_partial(z, x, theta, grid.subdomain(w));
    for (std::size_t i = 0; i < stats.phi.values.size(); ++i)
      stats.phi.values[i] += part.phi.values[i];
    for (std::size_t i = 0; i < stats.psi.values.size(); ++i)
      stats.psi.values[i] += part.psi.values[i];
    stats.rim.insert(stats.rim.end(), part.rim.begin(), part.rim.end());
    stats.x_sqnorm += part.x_sqnorm;
  }
  std::sort(stats.rim.begin(), stats.rim.end(), [&](const RimEntry& a, const RimEntry& b) {
    if (a.atom != b.atom) return a.atom < b.atom;
    return stats.omega.index(a.pos) < stats.omega.index(b.pos);
  });
  return stats;
}

namespace {

// (phi * D)_k[tau]_p = sum_{k'} sum_{tau'} phi_{k,k'}[tau - tau'] D_{k'}[tau']_p
Dictionary gram_times(const GramPhi& phi, const Dictionary& d) {
  Dictionary out(d.atoms, d.channels, d.support);
  const Domain& theta = d.support;
  const Domain& lags = phi.lags;
  const index_t support_size = theta.size();

  if (support_size <= 256) {  // direct lag-domain contraction
    for (int k = 0; k < d.atoms; ++k)
      for (int k2 = 0; k2 < d.atoms; ++k2) {
        const double* table =
            phi.values.data() +
            (static_cast<std::size_t>(k) * d.atoms + k2) * lags.size();
        for_each_pos(theta.box(), [&](const Pos& tau) {
          for_each_pos(theta.box(), [&](const Pos& tau2) {
            Pos s = tau;
            for (int i = 0; i < theta.d; ++i)
              s[i] += theta.sizes[i] - 1 - tau2[i];
            const double w = table[lags.index(s)];
            if (w == 0.0) return;
            for (int p = 0; p < d.channels; ++p)
              out.at(k, tau, p) += w * d.at(k2, tau2, p);
          });
        });
      }
    return out;
  }

  // FFT path for large supports: pad to (2L-1) + L - 1 per axis
  Pos m{};
  for (int i = 0; i < theta.d; ++i) m[i] = 3 * theta.sizes[i] - 2;
  const Domain pad(theta.d, m);
  auto& plans = detail::FftPlans::instance();
  const auto& e = plans.get(pad.d, pad.sizes);

  detail::RealBuf real(e.real_n);
  std::vector<std::unique_ptr<detail::CplxBuf>> atom_hat;
  std::vector<double> chan(std::max(lags.size(), support_size));
  for (int k2 = 0; k2 < d.atoms; ++k2)
    for (int p = 0; p < d.channels; ++p) {
      for (index_t t = 0; t < support_size; ++t)
        chan[t] = d.atom(k2)[t * d.channels + p];
      real.zero();
      for_each_run(theta, theta.box(), [&](index_t idx, index_t len, const Pos& q) {
        std::memcpy(real.p + pad.index(q), chan.data() + idx, sizeof(double) * len);
      });
      atom_hat.emplace_back(std::make_unique<detail::CplxBuf>(e.cplx_n));
      plans.forward(e, real.p, atom_hat.back()->p);
    }

  detail::CplxBuf phi_hat(e.cplx_n), acc(e.cplx_n);
  for (int k = 0; k < d.atoms; ++k) {
    std::vector<std::unique_ptr<detail::CplxBuf>> accs;
    for (int p = 0; p < d.channels; ++p) {
      accs.emplace_back(std::make_unique<detail::CplxBuf>(e.cplx_n));
      accs.back()->zero();
    }
    for (int k2 = 0; k2 < d.atoms; ++k2) {
      const double* table =
          phi.values.data() +
          (static_cast<std::size_t>(k) * d.atoms + k2) * lags.size();
      real.zero();
      for_each_run(lags, lags.box(), [&](index_t idx, index_t len, const Pos& q) {
        std::memcpy(real.p + pad.index(q), table + idx, sizeof(double) * len);
      });
      plans.forward(e, real.p, phi_hat.p);
      for (int p = 0; p < d.channels; ++p)
        detail::cplx_mul_acc(accs[p]->p, phi_hat.p,
                             atom_hat[static_cast<std::size_t>(k2) * d.channels + p]->p,
                             e.cplx_n);
    }
    for (int p = 0; p < d.channels; ++p) {
      plans.backward(e, accs[p]->p, real.p);
      for_each_pos(theta.box(), [&](const Pos& tau) {
        Pos q = tau;
        for (int i = 0; i < theta.d; ++i) q[i] += theta.sizes[i] - 1;
        out.at(k, tau, p) = real.p[pad.index(q)] / e.real_n;
      });
    }
  }
  return out;
}

// Reconstruction on the overhang band (outside the domain) from the rim code.
struct Overhang {
  Domain extended;
  int channels = 1;
  std::vector<double> values;

  double at(const Pos& v, int p) const {
    return values[static_cast<std::size_t>(extended.index(v)) * channels + p];
  }
};

Overhang overhang_reconstruction(const Dictionary& d, const SufficientStats& stats) {
  Pos m{};
  for (int i = 0; i < stats.omega.d; ++i)
    m[i] = stats.omega.sizes[i] + d.support.sizes[i] - 1;
  Overhang o{Domain(stats.omega.d, m), d.channels, {}};
  o.values.assign(static_cast<std::size_t>(o.extended.size()) * d.channels, 0.0);
  for (const RimEntry& r : stats.rim) {
    for_each_pos(d.support.box(), [&](const Pos& tau) {
      Pos v = r.pos;
      for (int i = 0; i < stats.omega.d; ++i) v[i] += tau[i];
      if (stats.omega.contains(v)) return;  // band only
      for (int p = 0; p < d.channels; ++p)
        o.values[static_cast<std::size_t>(o.extended.index(v)) * d.channels + p] +=
            r.value * d.at(r.atom, tau, p);
    });
  }
  return o;
}

}  // namespace

Dictionary gradient_from_stats(const Dictionary& d, const SufficientStats& stats) {
  if (d.atoms != stats.phi.atoms)
    throw ShapeError("gradient_from_stats: atom count mismatch");
  Dictionary grad = gram_times(stats.phi, d);
  for (std::size_t i = 0; i < grad.values.size(); ++i)
    grad.values[i] -= stats.psi.values[i];

  if (!stats.rim.empty()) {
    const Overhang o = overhang_reconstruction(d, stats);
    for (const RimEntry& r : stats.rim) {
      for_each_pos(d.support.box(), [&](const Pos& tau) {
        Pos v = r.pos;
        for (int i = 0; i < stats.omega.d; ++i) v[i] += tau[i];
        if (stats.omega.contains(v)) return;
        for (int p = 0; p < d.channels; ++p)
          grad.at(r.atom, tau, p) -= r.value * o.at(v, p);
      });
    }
  }
  return grad;
}

double objective_from_stats(const Dictionary& d, const SufficientStats& stats) {
  const Dictionary gd = gram_times(stats.phi, d);
  const double quad = dot(gd.values, d.values);
  const double cross = dot(stats.psi.values, d.values);
  double band = 0;
  if (!stats.rim.empty()) {
    const Overhang o = overhang_reconstruction(d, stats);
    band = sq_l2(o.values);
  }
  return 0.5 * (stats.x_sqnorm - 2 * cross + quad - band);
}

void project_unit_ball(Dictionary& d) {
  for (int k = 0; k < d.atoms; ++k) {
    const double norm = std::sqrt(d.atom_sqnorm(k));
    if (norm > 1.0) {
      double* a = d.atom(k);
      const index_t n = d.support.size() * d.channels;
      for (index_t i = 0; i < n; ++i) a[i] /= norm;
    }
  }
}

double gram_operator_norm(const GramPhi& phi, int channels, const Domain& theta,
                          int iterations) {
  Dictionary v(phi.atoms, channels, theta);
  std::fill(v.values.begin(), v.values.end(), 1.0);
  double lam = 0;
  for (int it = 0; it < iterations; ++it) {
    const double nrm = std::sqrt(sq_l2(v.values));
    if (nrm < 1e-300) return 0.0;
    for (double& x : v.values) x /= nrm;
    v = gram_times(phi, v);
    lam = std::sqrt(sq_l2(v.values));
  }
  return lam;
}

}  // namespace convdl::dict
