#include "convdl/tensor_ops.hpp"

#include <cstring>
#include <memory>
#include <sstream>

#include "fft_engine.hpp"

namespace convdl {

std::string Box::to_string() const {
  std::ostringstream os;
  for (int i = 0; i < d; ++i)
    os << (i ? " x " : "") << "[" << lo[i] << "," << hi[i] << ")";
  return os.str();
}

std::string Domain::to_string() const {
  std::ostringstream os;
  for (int i = 0; i < d; ++i) os << (i ? "x" : "") << sizes[i];
  return os.str();
}

namespace {

void check_convolve_shapes(const ActivationMap& z, const Dictionary& dict) {
  if (z.atoms != dict.atoms)
    throw ShapeError("convolve: activation atoms " + std::to_string(z.atoms) +
                     " != dictionary atoms " + std::to_string(dict.atoms));
  dict.check_fits(z.domain);
}

void check_correlate_shapes(const Signal& x, const Dictionary& dict) {
  if (x.channels != dict.channels)
    throw ShapeError("correlate: signal channels " + std::to_string(x.channels) +
                     " != dictionary channels " + std::to_string(dict.channels));
  dict.check_fits(x.domain);
}

// Padded grid for linear convolution: M_i = T_i + L_i - 1.
Pos padded_sizes(const Domain& omega, const Domain& theta) {
  Pos m{};
  for (int i = 0; i < omega.d; ++i) m[i] = omega.sizes[i] + theta.sizes[i] - 1;
  return m;
}

// Copy a row-major array over `src` into the top-left corner of the padded
// grid (or back, with `gather`).
void scatter_padded(const Domain& src, const double* in, const Domain& pad,
                    double* out) {
  for_each_run(src, src.box(), [&](index_t idx, index_t len, const Pos& p) {
    std::memcpy(out + pad.index(p), in + idx, sizeof(double) * len);
  });
}

void gather_padded(const Domain& dst, double* out, const Domain& pad,
                   const double* in, double scale) {
  for_each_run(dst, dst.box(), [&](index_t idx, index_t len, const Pos& p) {
    const double* row = in + pad.index(p);
    for (index_t j = 0; j < len; ++j) out[idx + j] += scale * row[j];
  });
}

Signal convolve_direct(const ActivationMap& z, const Dictionary& dict) {
  Signal out(z.domain, dict.channels);
  const Domain& omega = z.domain;
  const Domain& theta = dict.support;
  const int p_count = dict.channels;
  z.for_each_nonzero([&](int k, const Pos& u, double val) {
    Box write = omega.box().intersect(Box{omega.d, u, {u[0] + theta.sizes[0],
                                                       u[1] + theta.sizes[1],
                                                       u[2] + theta.sizes[2]}});
    const double* a = dict.atom(k);
    for_each_run(omega, write, [&](index_t idx, index_t len, const Pos& w) {
      Pos tau = w;
      for (int i = 0; i < omega.d; ++i) tau[i] -= u[i];
      const double* arow = a + theta.index(tau) * p_count;
      double* orow = out.values.data() + idx * p_count;
      for (index_t j = 0; j < len * p_count; ++j) orow[j] += val * arow[j];
    });
  });
  return out;
}

Signal convolve_fft(const ActivationMap& z, const Dictionary& dict) {
  const Domain& omega = z.domain;
  const Domain& theta = dict.support;
  const int p_count = dict.channels;
  const Domain pad(omega.d, padded_sizes(omega, theta));
  auto& plans = detail::FftPlans::instance();
  const auto& e = plans.get(pad.d, pad.sizes);

  detail::RealBuf real(e.real_n);
  detail::CplxBuf z_hat(e.cplx_n), atom_hat(e.cplx_n);
  std::vector<std::unique_ptr<detail::CplxBuf>> acc;
  for (int p = 0; p < p_count; ++p) {
    acc.emplace_back(std::make_unique<detail::CplxBuf>(e.cplx_n));
    acc.back()->zero();
  }

  std::vector<double> chan(theta.size());
  for (int k = 0; k < z.atoms; ++k) {
    real.zero();
    scatter_padded(omega, z.plane(k), pad, real.p);
    plans.forward(e, real.p, z_hat.p);
    for (int p = 0; p < p_count; ++p) {
      for (index_t t = 0; t < theta.size(); ++t)
        chan[t] = dict.atom(k)[t * p_count + p];
      real.zero();
      scatter_padded(theta, chan.data(), pad, real.p);
      plans.forward(e, real.p, atom_hat.p);
      detail::cplx_mul_acc(acc[p]->p, z_hat.p, atom_hat.p, e.cplx_n);
    }
  }

  Signal out(omega, p_count);
  std::vector<double> plane(omega.size());
  for (int p = 0; p < p_count; ++p) {
    plans.backward(e, acc[p]->p, real.p);
    std::fill(plane.begin(), plane.end(), 0.0);
    gather_padded(omega, plane.data(), pad, real.p, 1.0 / e.real_n);
    for (index_t i = 0; i < omega.size(); ++i)
      out.values[i * p_count + p] = plane[i];
  }
  return out;
}

ActivationMap correlate_direct(const Signal& x, const Dictionary& dict) {
  const Domain& omega = x.domain;
  const Domain& theta = dict.support;
  const int p_count = x.channels;
  ActivationMap out(omega, dict.atoms);
  for (int k = 0; k < dict.atoms; ++k) {
    double* plane = out.plane(k);
    const double* a = dict.atom(k);
    for_each_pos(theta.box(), [&](const Pos& tau) {
      // out_k[w] += <X[w + tau], D_k[tau]> over w with w + tau inside.
      Box valid = omega.box();
      for (int i = 0; i < omega.d; ++i) valid.hi[i] -= tau[i];
      const double* aval = a + theta.index(tau) * p_count;
      const index_t shift = omega.index(tau);
      for_each_run(omega, valid, [&](index_t idx, index_t len, const Pos&) {
        const double* xrow = x.values.data() + (idx + shift) * p_count;
        for (index_t j = 0; j < len; ++j) {
          double s = 0;
          for (int p = 0; p < p_count; ++p) s += xrow[j * p_count + p] * aval[p];
          plane[idx + j] += s;
        }
      });
    });
  }
  return out;
}

ActivationMap correlate_fft(const Signal& x, const Dictionary& dict) {
  const Domain& omega = x.domain;
  const Domain& theta = dict.support;
  const int p_count = x.channels;
  const Domain pad(omega.d, padded_sizes(omega, theta));
  auto& plans = detail::FftPlans::instance();
  const auto& e = plans.get(pad.d, pad.sizes);

  detail::RealBuf real(e.real_n);
  detail::CplxBuf atom_hat(e.cplx_n), acc(e.cplx_n);
  std::vector<std::unique_ptr<detail::CplxBuf>> x_hat;
  std::vector<double> chan(std::max(omega.size(), theta.size()));
  for (int p = 0; p < p_count; ++p) {
    x_hat.emplace_back(std::make_unique<detail::CplxBuf>(e.cplx_n));
    for (index_t i = 0; i < omega.size(); ++i) chan[i] = x.values[i * p_count + p];
    real.zero();
    scatter_padded(omega, chan.data(), pad, real.p);
    plans.forward(e, real.p, x_hat.back()->p);
  }

  ActivationMap out(omega, dict.atoms);
  for (int k = 0; k < dict.atoms; ++k) {
    acc.zero();
    for (int p = 0; p < p_count; ++p) {
      for (index_t t = 0; t < theta.size(); ++t)
        chan[t] = dict.atom(k)[t * p_count + p];
      real.zero();
      scatter_padded(theta, chan.data(), pad, real.p);
      plans.forward(e, real.p, atom_hat.p);
      // Correlation: lag w picks X[w + tau], i.e. multiply by conj(atom).
      detail::cplx_mul_conj_acc(acc.p, x_hat[p]->p, atom_hat.p, e.cplx_n);
    }
    plans.backward(e, acc.p, real.p);
    std::vector<double> plane(omega.size(), 0.0);
    gather_padded(omega, plane.data(), pad, real.p, 1.0 / e.real_n);
    std::memcpy(out.plane(k), plane.data(), sizeof(double) * omega.size());
  }
  return out;
}

}  // namespace

Signal convolve(const ActivationMap& z, const Dictionary& dict,
                const ConvOptions& opts) {
  check_convolve_shapes(z, dict);
  if (opts.use_fft(dict.support.size())) return convolve_fft(z, dict);
  return convolve_direct(z, dict);
}

ActivationMap correlate(const Signal& x, const Dictionary& dict,
                        const ConvOptions& opts) {
  check_correlate_shapes(x, dict);
  if (opts.use_fft(dict.support.size())) return correlate_fft(x, dict);
  return correlate_direct(x, dict);
}

double lambda_max(const Signal& x, const Dictionary& dict, const ConvOptions& opts) {
  return correlate(x, dict, opts).max_abs();
}

double objective(const Signal& x, const ActivationMap& z, const Dictionary& dict,
                 double lambda, const ConvOptions& opts) {
  if (x.domain != z.domain)
    throw ShapeError("objective: signal and activation domains differ");
  const Signal rec = convolve(z, dict, opts);
  if (x.channels != rec.channels)
    throw ShapeError("objective: channel mismatch");
  return 0.5 * residual_sq_l2(x, rec) + lambda * z.l1_norm();
}

}  // namespace convdl
