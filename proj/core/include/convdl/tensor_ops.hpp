#pragma once

#include <algorithm>
#include <cmath>

#include "convdl/tensors.hpp"

namespace convdl {

// ST(u, t) = sign(u) * max(|u| - t, 0)
inline double soft_threshold(double u, double thresh) {
  if (u > thresh) return u - thresh;
  if (u < -thresh) return u + thresh;
  return 0.0;
}

struct ConvOptions {
  enum class Path { kAuto, kDirect, kFft };
  Path path = Path::kAuto;
  // kAuto switches to the FFT engine once the atom support exceeds this size.
  index_t fft_threshold = 256;

  bool use_fft(index_t support_size) const {
    switch (path) {
      case Path::kDirect: return false;
      case Path::kFft: return true;
      default: return support_size > fft_threshold;
    }
  }
};

// Zero-padded convolution, same-size output on the activation domain:
//   out[w] = sum_k sum_{t in Theta} Z_k[w - t] * D_k[t]
Signal convolve(const ActivationMap& z, const Dictionary& dict,
                const ConvOptions& opts = {});

// Cross-correlation of a signal with every atom (the adjoint of convolve):
//   out_k[w] = sum_{t in Theta} <X[w + t], D_k[t]>
// so that <convolve(Z, D), X> == <Z, correlate(X, D)>.
ActivationMap correlate(const Signal& x, const Dictionary& dict,
                        const ConvOptions& opts = {});

// Largest regularization with a nonzero solution: max_{k,w} |correlate(X, D)|.
double lambda_max(const Signal& x, const Dictionary& dict,
                  const ConvOptions& opts = {});

// 1/2 ||X - Z*D||_2^2 + lambda ||Z||_1
double objective(const Signal& x, const ActivationMap& z, const Dictionary& dict,
                 double lambda, const ConvOptions& opts = {});

inline double residual_sq_l2(const Signal& x, const Signal& reconstruction) {
  if (x.domain != reconstruction.domain || x.channels != reconstruction.channels)
    throw ShapeError("residual: mismatched signal shapes");
  double s = 0;
  for (std::size_t i = 0; i < x.values.size(); ++i) {
    const double r = x.values[i] - reconstruction.values[i];
    s += r * r;
  }
  return s;
}

}  // namespace convdl
