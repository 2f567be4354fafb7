#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "wetseg/nn/tensor.hpp"

namespace wetseg::nn {

template <typename T>
struct ParamView {
  T* value;
  T* grad;
  std::size_t size;
};

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatRM<T>>;
template <typename T>
using CMapRM = Eigen::Map<const MatRM<T>>;

/// Box-Muller normal draws; keeps weight initialization independent of the
/// standard library's distribution implementation.
template <typename T>
class NormalSampler {
 public:
  explicit NormalSampler(std::mt19937_64& rng) : rng_(rng) {}

  T operator()(double stddev) {
    if (has_spare_) {
      has_spare_ = false;
      return static_cast<T>(spare_ * stddev);
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    has_spare_ = true;
    return static_cast<T>(r * std::cos(2.0 * M_PI * u2) * stddev);
  }

 private:
  double uniform01() {
    return (rng_() >> 11) * (1.0 / 9007199254740992.0);  // 53-bit mantissa
  }
  std::mt19937_64& rng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Conv2d: stride-1 square kernel with same-size zero padding (k==1 -> none).
// ---------------------------------------------------------------------------

template <typename T>
struct Conv2d {
  int in_c = 0, out_c = 0, k = 1, pad = 0;
  std::vector<T> w;   // [out_c][in_c*k*k]
  std::vector<T> b;   // [out_c]
  std::vector<T> gw;  // grad accumulators, same shapes
  std::vector<T> gb;

  struct Cache {
    Tensor4<T> input;
  };

  Conv2d() = default;
  Conv2d(int in_channels, int out_channels, int kernel)
      : in_c(in_channels), out_c(out_channels), k(kernel), pad(kernel / 2) {
    require(kernel == 1 || kernel == 3, "Conv2d: only 1x1 and 3x3 kernels are used here");
    w.assign(static_cast<std::size_t>(out_c) * in_c * k * k, T{});
    b.assign(out_c, T{});
    gw.assign(w.size(), T{});
    gb.assign(b.size(), T{});
  }

  void init_he(NormalSampler<T>& normal) {
    const double stddev = std::sqrt(2.0 / (static_cast<double>(in_c) * k * k));
    for (auto& x : w) x = normal(stddev);
    for (auto& x : b) x = T{};
  }

  std::size_t num_params() const { return w.size() + b.size(); }

  void collect_params(std::vector<ParamView<T>>& out) {
    out.push_back({w.data(), gw.data(), w.size()});
    out.push_back({b.data(), gb.data(), b.size()});
  }

  void zero_grad() {
    std::fill(gw.begin(), gw.end(), T{});
    std::fill(gb.begin(), gb.end(), T{});
  }

  // cols: [in_c*k*k, H*W] row-major
  void im2col(const T* x, int h, int wd, std::vector<T>& cols) const {
    const std::size_t hw = static_cast<std::size_t>(h) * wd;
    cols.assign(static_cast<std::size_t>(in_c) * k * k * hw, T{});
    for (int ic = 0; ic < in_c; ++ic) {
      const T* plane = x + static_cast<std::size_t>(ic) * hw;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          T* row = cols.data() + ((static_cast<std::size_t>(ic) * k + ky) * k + kx) * hw;
          const int dy = ky - pad, dx = kx - pad;
          for (int y = 0; y < h; ++y) {
            const int sy = y + dy;
            if (sy < 0 || sy >= h) continue;
            const int x0 = std::max(0, -dx), x1 = std::min(wd, wd - dx);
            if (x0 >= x1) continue;
            std::copy_n(plane + static_cast<std::size_t>(sy) * wd + x0 + dx, x1 - x0,
                        row + static_cast<std::size_t>(y) * wd + x0);
          }
        }
      }
    }
  }

  void col2im_add(const std::vector<T>& cols, int h, int wd, T* dx) const {
    const std::size_t hw = static_cast<std::size_t>(h) * wd;
    for (int ic = 0; ic < in_c; ++ic) {
      T* plane = dx + static_cast<std::size_t>(ic) * hw;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const T* row = cols.data() + ((static_cast<std::size_t>(ic) * k + ky) * k + kx) * hw;
          const int dy = ky - pad, dx_ = kx - pad;
          for (int y = 0; y < h; ++y) {
            const int sy = y + dy;
            if (sy < 0 || sy >= h) continue;
            const int x0 = std::max(0, -dx_), x1 = std::min(wd, wd - dx_);
            T* dst = plane + static_cast<std::size_t>(sy) * wd + dx_;
            const T* src = row + static_cast<std::size_t>(y) * wd;
            for (int x = x0; x < x1; ++x) dst[x] += src[x];
          }
        }
      }
    }
  }

  Tensor4<T> forward(const Tensor4<T>& x, Cache& cache) const {
    require(x.c == in_c, "Conv2d: channel mismatch");
    Tensor4<T> y(x.n, out_c, x.h, x.w);
    const std::size_t hw = x.plane();
    const int rows = in_c * k * k;
    CMapRM<T> wm(w.data(), out_c, rows);
    std::vector<T> cols;
    for (int in = 0; in < x.n; ++in) {
      MapRM<T> ym(y.sample(in), out_c, static_cast<Eigen::Index>(hw));
      if (k == 1) {
        CMapRM<T> xm(x.sample(in), in_c, static_cast<Eigen::Index>(hw));
        ym.noalias() = wm * xm;
      } else {
        im2col(x.sample(in), x.h, x.w, cols);
        CMapRM<T> cm(cols.data(), rows, static_cast<Eigen::Index>(hw));
        ym.noalias() = wm * cm;
      }
      for (int oc = 0; oc < out_c; ++oc)
        ym.row(oc).array() += b[oc];
    }
    cache.input = x;
    return y;
  }

  Tensor4<T> backward(const Tensor4<T>& dy, const Cache& cache) {
    const Tensor4<T>& x = cache.input;
    Tensor4<T> dx(x.n, in_c, x.h, x.w);
    const std::size_t hw = x.plane();
    const int rows = in_c * k * k;
    CMapRM<T> wm(w.data(), out_c, rows);
    MapRM<T> gwm(gw.data(), out_c, rows);
    std::vector<T> cols, dcols(static_cast<std::size_t>(rows) * hw);
    for (int in = 0; in < x.n; ++in) {
      CMapRM<T> dym(dy.sample(in), out_c, static_cast<Eigen::Index>(hw));
      // scalar accumulation: vectorized reductions round differently
      // depending on buffer alignment, which would break bit reproducibility
      for (int oc = 0; oc < out_c; ++oc) {
        const T* row = dy.sample(in) + static_cast<std::size_t>(oc) * hw;
        double acc = 0;
        for (std::size_t i = 0; i < hw; ++i) acc += row[i];
        gb[oc] += static_cast<T>(acc);
      }
      if (k == 1) {
        CMapRM<T> xm(x.sample(in), in_c, static_cast<Eigen::Index>(hw));
        gwm.noalias() += dym * xm.transpose();
        MapRM<T> dxm(dx.sample(in), in_c, static_cast<Eigen::Index>(hw));
        dxm.noalias() = wm.transpose() * dym;
      } else {
        im2col(x.sample(in), x.h, x.w, cols);
        CMapRM<T> cm(cols.data(), rows, static_cast<Eigen::Index>(hw));
        gwm.noalias() += dym * cm.transpose();
        MapRM<T> dcm(dcols.data(), rows, static_cast<Eigen::Index>(hw));
        dcm.noalias() = wm.transpose() * dym;
        col2im_add(dcols, x.h, x.w, dx.sample(in));
      }
    }
    return dx;
  }
};

// ---------------------------------------------------------------------------
// BatchNorm2d: per-channel normalization over (N, H, W).
// ---------------------------------------------------------------------------

template <typename T>
struct BatchNorm2d {
  int channels = 0;
  double eps = 1e-5;
  double momentum = 0.1;
  std::vector<T> gamma, beta, ggamma, gbeta;
  std::vector<double> running_mean, running_var;

  struct Cache {
    Tensor4<T> xhat;
    std::vector<double> inv_std;
  };

  BatchNorm2d() = default;
  explicit BatchNorm2d(int c) : channels(c) {
    gamma.assign(c, T{1});
    beta.assign(c, T{});
    ggamma.assign(c, T{});
    gbeta.assign(c, T{});
    running_mean.assign(c, 0.0);
    running_var.assign(c, 1.0);
  }

  std::size_t num_params() const { return gamma.size() + beta.size(); }

  void collect_params(std::vector<ParamView<T>>& out) {
    out.push_back({gamma.data(), ggamma.data(), gamma.size()});
    out.push_back({beta.data(), gbeta.data(), beta.size()});
  }

  void zero_grad() {
    std::fill(ggamma.begin(), ggamma.end(), T{});
    std::fill(gbeta.begin(), gbeta.end(), T{});
  }

  Tensor4<T> forward(const Tensor4<T>& x, Cache& cache, bool training) {
    require(x.c == channels, "BatchNorm2d: channel mismatch");
    Tensor4<T> y(x.n, x.c, x.h, x.w);
    const std::size_t hw = x.plane();
    const double m = static_cast<double>(x.n) * hw;
    if (training) {
      cache.xhat = Tensor4<T>(x.n, x.c, x.h, x.w);
      cache.inv_std.assign(channels, 0.0);
      for (int ic = 0; ic < channels; ++ic) {
        double sum = 0.0, sq = 0.0;
        for (int in = 0; in < x.n; ++in) {
          const T* p = x.sample(in) + ic * hw;
          for (std::size_t i = 0; i < hw; ++i) {
            sum += p[i];
            sq += static_cast<double>(p[i]) * p[i];
          }
        }
        const double mean = sum / m;
        const double var = std::max(0.0, sq / m - mean * mean);
        const double inv = 1.0 / std::sqrt(var + eps);
        cache.inv_std[ic] = inv;
        running_mean[ic] = (1.0 - momentum) * running_mean[ic] + momentum * mean;
        running_var[ic] = (1.0 - momentum) * running_var[ic] + momentum * var;
        const double g = gamma[ic], bt = beta[ic];
        for (int in = 0; in < x.n; ++in) {
          const T* p = x.sample(in) + ic * hw;
          T* xh = cache.xhat.sample(in) + ic * hw;
          T* yo = y.sample(in) + ic * hw;
          for (std::size_t i = 0; i < hw; ++i) {
            const double h = (p[i] - mean) * inv;
            xh[i] = static_cast<T>(h);
            yo[i] = static_cast<T>(g * h + bt);
          }
        }
      }
    } else {
      for (int ic = 0; ic < channels; ++ic) {
        const double inv = 1.0 / std::sqrt(running_var[ic] + eps);
        const double mean = running_mean[ic];
        const double g = gamma[ic], bt = beta[ic];
        for (int in = 0; in < x.n; ++in) {
          const T* p = x.sample(in) + ic * hw;
          T* yo = y.sample(in) + ic * hw;
          for (std::size_t i = 0; i < hw; ++i)
            yo[i] = static_cast<T>(g * ((p[i] - mean) * inv) + bt);
        }
      }
    }
    return y;
  }

  Tensor4<T> backward(const Tensor4<T>& dy, const Cache& cache) {
    Tensor4<T> dx(dy.n, dy.c, dy.h, dy.w);
    const std::size_t hw = dy.plane();
    const double m = static_cast<double>(dy.n) * hw;
    for (int ic = 0; ic < channels; ++ic) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int in = 0; in < dy.n; ++in) {
        const T* d = dy.sample(in) + ic * hw;
        const T* xh = cache.xhat.sample(in) + ic * hw;
        for (std::size_t i = 0; i < hw; ++i) {
          sum_dy += d[i];
          sum_dy_xhat += static_cast<double>(d[i]) * xh[i];
        }
      }
      ggamma[ic] += static_cast<T>(sum_dy_xhat);
      gbeta[ic] += static_cast<T>(sum_dy);
      const double g = gamma[ic];
      const double inv = cache.inv_std[ic];
      for (int in = 0; in < dy.n; ++in) {
        const T* d = dy.sample(in) + ic * hw;
        const T* xh = cache.xhat.sample(in) + ic * hw;
        T* o = dx.sample(in) + ic * hw;
        for (std::size_t i = 0; i < hw; ++i) {
          o[i] = static_cast<T>(g * inv / m *
                                (m * d[i] - sum_dy - xh[i] * sum_dy_xhat));
        }
      }
    }
    return dx;
  }
};

// ---------------------------------------------------------------------------
// Stateless spatial ops.
// ---------------------------------------------------------------------------

template <typename T>
struct Relu {
  struct Cache {
    Tensor4<T> input;
  };
  Tensor4<T> forward(const Tensor4<T>& x, Cache& cache) const {
    Tensor4<T> y = x;
    for (auto& v : y.v)
      if (v < T{}) v = T{};
    cache.input = x;
    return y;
  }
  Tensor4<T> backward(const Tensor4<T>& dy, const Cache& cache) const {
    Tensor4<T> dx = dy;
    for (std::size_t i = 0; i < dx.v.size(); ++i)
      if (cache.input.v[i] <= T{}) dx.v[i] = T{};
    return dx;
  }
};

template <typename T>
struct MaxPool2x2 {
  struct Cache {
    std::vector<std::uint32_t> argmax;  // flat input index per output element
    int in_h = 0, in_w = 0;
  };
  Tensor4<T> forward(const Tensor4<T>& x, Cache& cache) const {
    require(x.h % 2 == 0 && x.w % 2 == 0, "MaxPool2x2: odd spatial size");
    Tensor4<T> y(x.n, x.c, x.h / 2, x.w / 2);
    cache.argmax.resize(y.size());
    cache.in_h = x.h;
    cache.in_w = x.w;
    std::size_t oi = 0;
    for (int in = 0; in < x.n; ++in)
      for (int ic = 0; ic < x.c; ++ic) {
        const T* plane = x.v.data() + (static_cast<std::size_t>(in) * x.c + ic) * x.plane();
        for (int y2 = 0; y2 < y.h; ++y2)
          for (int x2 = 0; x2 < y.w; ++x2, ++oi) {
            const int iy = 2 * y2, ix = 2 * x2;
            std::size_t best = static_cast<std::size_t>(iy) * x.w + ix;
            T bv = plane[best];
            const std::size_t cand[3] = {best + 1, best + x.w, best + x.w + 1};
            for (std::size_t ci : cand)
              if (plane[ci] > bv) {
                bv = plane[ci];
                best = ci;
              }
            y.v[oi] = bv;
            cache.argmax[oi] = static_cast<std::uint32_t>(best);
          }
      }
    return y;
  }
  Tensor4<T> backward(const Tensor4<T>& dy, const Cache& cache) const {
    Tensor4<T> dx(dy.n, dy.c, cache.in_h, cache.in_w);
    const std::size_t in_plane = static_cast<std::size_t>(cache.in_h) * cache.in_w;
    std::size_t oi = 0;
    for (int in = 0; in < dy.n; ++in)
      for (int ic = 0; ic < dy.c; ++ic) {
        T* plane = dx.v.data() + (static_cast<std::size_t>(in) * dy.c + ic) * in_plane;
        const std::size_t count = dy.plane();
        for (std::size_t i = 0; i < count; ++i, ++oi)
          plane[cache.argmax[oi]] += dy.v[oi];
      }
    return dx;
  }
};

/// Replaces each pixel with a 2x2 square of the same value.
template <typename T>
struct UpsampleNearest2x {
  Tensor4<T> forward(const Tensor4<T>& x) const {
    Tensor4<T> y(x.n, x.c, x.h * 2, x.w * 2);
    for (int in = 0; in < x.n; ++in)
      for (int ic = 0; ic < x.c; ++ic) {
        const T* src = x.v.data() + (static_cast<std::size_t>(in) * x.c + ic) * x.plane();
        T* dst = y.v.data() + (static_cast<std::size_t>(in) * x.c + ic) * y.plane();
        for (int r = 0; r < x.h; ++r)
          for (int c = 0; c < x.w; ++c) {
            const T v = src[static_cast<std::size_t>(r) * x.w + c];
            T* d = dst + (static_cast<std::size_t>(2 * r) * y.w + 2 * c);
            d[0] = v;
            d[1] = v;
            d[y.w] = v;
            d[y.w + 1] = v;
          }
      }
    return y;
  }
  Tensor4<T> backward(const Tensor4<T>& dy) const {
    Tensor4<T> dx(dy.n, dy.c, dy.h / 2, dy.w / 2);
    for (int in = 0; in < dy.n; ++in)
      for (int ic = 0; ic < dy.c; ++ic) {
        const T* src = dy.v.data() + (static_cast<std::size_t>(in) * dy.c + ic) * dy.plane();
        T* dst = dx.v.data() + (static_cast<std::size_t>(in) * dy.c + ic) * dx.plane();
        for (int r = 0; r < dx.h; ++r)
          for (int c = 0; c < dx.w; ++c) {
            const T* s = src + (static_cast<std::size_t>(2 * r) * dy.w + 2 * c);
            dst[static_cast<std::size_t>(r) * dx.w + c] = s[0] + s[1] + s[dy.w] + s[dy.w + 1];
          }
      }
    return dx;
  }
};

template <typename T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b) {
  require(a.n == b.n && a.h == b.h && a.w == b.w, "concat_channels: shape mismatch");
  Tensor4<T> y(a.n, a.c + b.c, a.h, a.w);
  for (int in = 0; in < a.n; ++in) {
    std::copy_n(a.sample(in), a.sample_stride(), y.sample(in));
    std::copy_n(b.sample(in), b.sample_stride(), y.sample(in) + a.sample_stride());
  }
  return y;
}

template <typename T>
void split_channels(const Tensor4<T>& dy, Tensor4<T>& da, Tensor4<T>& db, int a_channels) {
  da = Tensor4<T>(dy.n, a_channels, dy.h, dy.w);
  db = Tensor4<T>(dy.n, dy.c - a_channels, dy.h, dy.w);
  for (int in = 0; in < dy.n; ++in) {
    std::copy_n(dy.sample(in), da.sample_stride(), da.sample(in));
    std::copy_n(dy.sample(in) + da.sample_stride(), db.sample_stride(), db.sample(in));
  }
}

}  // namespace wetseg::nn
