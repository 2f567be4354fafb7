#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "wetseg/common.hpp"

namespace wetseg::nn {

/// Dense NCHW tensor backing all network activations and gradients.
template <typename T>
struct Tensor4 {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> v;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_, T fill = T{})
      : n(n_), c(c_), h(h_), w(w_),
        v(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

  std::size_t size() const { return v.size(); }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::size_t sample_stride() const { return static_cast<std::size_t>(c) * h * w; }

  T& at(int in, int ic, int iy, int ix) {
    return v[((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix];
  }
  const T& at(int in, int ic, int iy, int ix) const {
    return v[((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix];
  }

  T* sample(int in) { return v.data() + in * sample_stride(); }
  const T* sample(int in) const { return v.data() + in * sample_stride(); }

  bool same_shape(const Tensor4& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  void zero() { std::fill(v.begin(), v.end(), T{}); }

  bool all_finite() const {
    for (T x : v)
      if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
  }
};

/// Per-pixel softmax over the channel dimension.
template <typename T>
Tensor4<T> softmax_channels(const Tensor4<T>& z) {
  Tensor4<T> p(z.n, z.c, z.h, z.w);
  const std::size_t hw = z.plane();
  for (int in = 0; in < z.n; ++in) {
    const T* zs = z.sample(in);
    T* ps = p.sample(in);
    for (std::size_t i = 0; i < hw; ++i) {
      T m = zs[i];
      for (int ic = 1; ic < z.c; ++ic) m = std::max(m, zs[ic * hw + i]);
      double denom = 0;
      for (int ic = 0; ic < z.c; ++ic) {
        const double e = std::exp(static_cast<double>(zs[ic * hw + i] - m));
        ps[ic * hw + i] = static_cast<T>(e);
        denom += e;
      }
      for (int ic = 0; ic < z.c; ++ic)
        ps[ic * hw + i] = static_cast<T>(ps[ic * hw + i] / denom);
    }
  }
  return p;
}

}  // namespace wetseg::nn
