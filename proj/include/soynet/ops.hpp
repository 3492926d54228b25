#pragma once

// Dense kernels with explicit backward passes. Every function here is pure.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "soynet/errors.hpp"
#include "soynet/tensor.hpp"

namespace soynet {

namespace detail {

// C[m x n] (+)= A[m x k] * B[k x n], all row-major with the given leading dims.
template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b,
             std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * ldc;
    if (!accumulate) std::fill(crow, crow + n, T{0});
    const T* arow = a + i * lda;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T{0}) continue;
      const T* brow = b + p * ldb;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m x n] (+)= A^T * B with A stored [k x m], B stored [k x n].
template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b,
             std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
  if (!accumulate) {
    for (std::size_t i = 0; i < m; ++i) std::fill(c + i * ldc, c + i * ldc + n, T{0});
  }
  for (std::size_t p = 0; p < k; ++p) {
    const T* arow = a + p * lda;
    const T* brow = b + p * ldb;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = arow[i];
      if (av == T{0}) continue;
      T* crow = c + i * ldc;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// Fixed-order 8-lane dot product; vectorizes without reassociation flags.
template <typename T>
T dot(const T* x, const T* y, std::size_t n) {
  T acc[8] = {};
  std::size_t p = 0;
  for (; p + 8 <= n; p += 8) {
    for (std::size_t q = 0; q < 8; ++q) acc[q] += x[p + q] * y[p + q];
  }
  T s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
  for (; p < n; ++p) s += x[p] * y[p];
  return s;
}

// C[m x n] (+)= A * B^T with A stored [m x k], B stored [n x k].
template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b,
             std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * lda;
    T* crow = c + i * ldc;
    for (std::size_t j = 0; j < n; ++j) {
      const T v = dot(arow, b + j * ldb, k);
      crow[j] = accumulate ? crow[j] + v : v;
    }
  }
}

}  // namespace detail

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> c({m, n});
  detail::gemm_nn(m, n, k, a.data(), k, b.data(), n, c.data(), n, false);
  return c;
}

template <typename T>
Tensor<T> transpose2d(const Tensor<T>& a) {
  if (a.rank() != 2) throw ShapeError("transpose2d expects a matrix");
  const std::size_t r = a.dim(0), c = a.dim(1);
  Tensor<T> t({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) t[j * r + i] = a[i * c + j];
  return t;
}

/// [H x W x C] <-> [C x H x W]
template <typename T>
Tensor<T> hwc_to_chw(const Tensor<T>& x) {
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  Tensor<T> y({c, h, w});
  for (std::size_t p = 0; p < h * w; ++p)
    for (std::size_t ch = 0; ch < c; ++ch) y[ch * h * w + p] = x[p * c + ch];
  return y;
}

template <typename T>
Tensor<T> chw_to_hwc(const Tensor<T>& x) {
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor<T> y({h, w, c});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t p = 0; p < h * w; ++p) y[p * c + ch] = x[ch * h * w + p];
  return y;
}

// ---------------------------------------------------------------------------
// softmax

namespace detail {

// Splits shape around `axis` into (outer, len, inner) strides.
inline void axis_split(const Shape& s, std::size_t axis, std::size_t& outer, std::size_t& len,
                       std::size_t& inner) {
  if (axis >= s.size()) throw ShapeError("softmax axis out of range");
  outer = 1;
  inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
}

// In-place max-subtracted softmax over a strided row.
template <typename T>
void softmax_row(T* x, std::size_t len, std::size_t stride) {
  T mx = x[0];
  for (std::size_t i = 1; i < len; ++i) mx = std::max(mx, x[i * stride]);
  T s = 0;
  for (std::size_t i = 0; i < len; ++i) {
    x[i * stride] = std::exp(x[i * stride] - mx);
    s += x[i * stride];
  }
  const T inv = T{1} / s;
  for (std::size_t i = 0; i < len; ++i) x[i * stride] *= inv;
}

// dx = y * (dy - <dy, y>) over a strided row.
template <typename T>
void softmax_row_backward(const T* y, const T* dy, T* dx, std::size_t len, std::size_t stride) {
  T d = 0;
  for (std::size_t i = 0; i < len; ++i) d += dy[i * stride] * y[i * stride];
  for (std::size_t i = 0; i < len; ++i) dx[i * stride] = y[i * stride] * (dy[i * stride] - d);
}

}  // namespace detail

template <typename T>
Tensor<T> softmax(Tensor<T> x, std::size_t axis) {
  std::size_t outer, len, inner;
  detail::axis_split(x.shape(), axis, outer, len, inner);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in)
      detail::softmax_row(x.data() + o * len * inner + in, len, inner);
  return x;
}

/// Gradient of softmax given its output y and upstream gradient dy.
template <typename T>
Tensor<T> softmax_backward(const Tensor<T>& y, const Tensor<T>& dy, std::size_t axis) {
  y.require_same_shape(dy, "softmax_backward");
  std::size_t outer, len, inner;
  detail::axis_split(y.shape(), axis, outer, len, inner);
  Tensor<T> dx(y.shape());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t off = o * len * inner + in;
      detail::softmax_row_backward(y.data() + off, dy.data() + off, dx.data() + off, len, inner);
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// layer norm over the last axis

template <typename T>
struct LayerNormCache {
  Tensor<T> xhat;          // normalized input, same shape as x
  std::vector<T> inv_std;  // one per row
};

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, std::span<const T> gamma, std::span<const T> beta, T eps,
                     LayerNormCache<T>* cache = nullptr) {
  if (x.rank() == 0) throw ShapeError("layer_norm needs rank >= 1");
  const std::size_t d = x.shape().back();
  if (gamma.size() != d || beta.size() != d) {
    throw ShapeError("layer_norm: affine size mismatch with " + shape_str(x.shape()));
  }
  const std::size_t rows = x.size() / d;
  Tensor<T> y(x.shape());
  if (cache) {
    cache->xhat = Tensor<T>(x.shape());
    cache->inv_std.assign(rows, T{0});
  }
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x.data() + r * d;
    T mean = 0;
    for (std::size_t i = 0; i < d; ++i) mean += xr[i];
    mean /= static_cast<T>(d);
    T var = 0;
    for (std::size_t i = 0; i < d; ++i) var += (xr[i] - mean) * (xr[i] - mean);
    var /= static_cast<T>(d);
    const T inv = T{1} / std::sqrt(var + eps);
    T* yr = y.data() + r * d;
    for (std::size_t i = 0; i < d; ++i) {
      const T xh = (xr[i] - mean) * inv;
      if (cache) cache->xhat[r * d + i] = xh;
      yr[i] = xh * gamma[i] + beta[i];
    }
    if (cache) cache->inv_std[r] = inv;
  }
  return y;
}

/// Returns dx; accumulates into dgamma/dbeta.
template <typename T>
Tensor<T> layer_norm_backward(const Tensor<T>& dy, const LayerNormCache<T>& cache,
                              std::span<const T> gamma, std::span<T> dgamma, std::span<T> dbeta) {
  const std::size_t d = dy.shape().back();
  const std::size_t rows = dy.size() / d;
  Tensor<T> dx(dy.shape());
  std::vector<T> g(d);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* dyr = dy.data() + r * d;
    const T* xh = cache.xhat.data() + r * d;
    T sum_g = 0, sum_gx = 0;
    for (std::size_t i = 0; i < d; ++i) {
      dgamma[i] += dyr[i] * xh[i];
      dbeta[i] += dyr[i];
      g[i] = dyr[i] * gamma[i];
      sum_g += g[i];
      sum_gx += g[i] * xh[i];
    }
    const T inv_d = T{1} / static_cast<T>(d);
    const T inv = cache.inv_std[r];
    T* dxr = dx.data() + r * d;
    for (std::size_t i = 0; i < d; ++i) dxr[i] = inv * (g[i] - inv_d * sum_g - xh[i] * inv_d * sum_gx);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// pointwise activations

template <typename T>
T gelu(T x) {
  return T{0.5} * x * (T{1} + std::erf(x * T{0.70710678118654752440}));
}

template <typename T>
T gelu_grad(T x) {
  const T cdf = T{0.5} * (T{1} + std::erf(x * T{0.70710678118654752440}));
  const T pdf = T{0.39894228040143267794} * std::exp(T{-0.5} * x * x);
  return cdf + x * pdf;
}

template <typename T>
Tensor<T> gelu(Tensor<T> x) {
  for (T& v : x.values()) v = gelu(v);
  return x;
}

template <typename T>
Tensor<T> gelu_backward(const Tensor<T>& x, Tensor<T> dy) {
  for (std::size_t i = 0; i < dy.size(); ++i) dy[i] *= gelu_grad(x[i]);
  return dy;
}

template <typename T>
Tensor<T> relu(Tensor<T> x) {
  for (T& v : x.values()) v = v > T{0} ? v : T{0};
  return x;
}

/// Gradient of ReLU given its output y.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& y, Tensor<T> dy) {
  for (std::size_t i = 0; i < dy.size(); ++i)
    if (!(y[i] > T{0})) dy[i] = T{0};
  return dy;
}

// ---------------------------------------------------------------------------
// conv2d, cross-correlation on [C x H x W]

struct Conv2dGeometry {
  std::size_t c_in, h, w, c_out, k, stride, pad, h_out, w_out;
};

inline Conv2dGeometry conv2d_geometry(const Shape& x, const Shape& w, std::size_t stride,
                                      std::size_t pad) {
  if (x.size() != 3 || w.size() != 4) throw ShapeError("conv2d expects x CxHxW and w OxIxkxk");
  if (w[1] != x[0]) throw ShapeError("conv2d: weight input channels != x channels");
  if (w[2] != w[3] || w[2] % 2 == 0) throw ShapeError("conv2d: kernel must be square and odd");
  if (stride == 0) throw ShapeError("conv2d: stride must be >= 1");
  Conv2dGeometry g{x[0], x[1], x[2], w[0], w[2], stride, pad, 0, 0};
  if (g.h + 2 * pad < g.k || g.w + 2 * pad < g.k) throw ShapeError("conv2d: kernel larger than input");
  g.h_out = (g.h + 2 * pad - g.k) / stride + 1;
  g.w_out = (g.w + 2 * pad - g.k) / stride + 1;
  return g;
}

namespace detail {

// cols[(c*k*k + ky*k + kx) x (oy*w_out + ox)]
template <typename T>
std::vector<T> im2col(const T* x, const Conv2dGeometry& g) {
  const std::size_t kk = g.k * g.k, npix = g.h_out * g.w_out;
  std::vector<T> cols(g.c_in * kk * npix, T{0});
  for (std::size_t c = 0; c < g.c_in; ++c) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        T* row = cols.data() + ((c * g.k + ky) * g.k + kx) * npix;
        for (std::size_t oy = 0; oy < g.h_out; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                    static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          const T* xrow = x + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.w_out; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            row[oy * g.w_out + ox] = xrow[ix];
          }
        }
      }
    }
  }
  return cols;
}

template <typename T>
void col2im(const T* cols, const Conv2dGeometry& g, T* dx) {
  const std::size_t npix = g.h_out * g.w_out;
  for (std::size_t c = 0; c < g.c_in; ++c) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const T* row = cols + ((c * g.k + ky) * g.k + kx) * npix;
        for (std::size_t oy = 0; oy < g.h_out; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                    static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          T* dxrow = dx + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.w_out; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            dxrow[ix] += row[oy * g.w_out + ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, std::span<const T> bias,
                 std::size_t stride, std::size_t pad) {
  const Conv2dGeometry g = conv2d_geometry(x.shape(), weight.shape(), stride, pad);
  if (!bias.empty() && bias.size() != g.c_out) throw ShapeError("conv2d: bias size mismatch");
  const std::size_t npix = g.h_out * g.w_out, kdim = g.c_in * g.k * g.k;
  const std::vector<T> cols = detail::im2col(x.data(), g);
  Tensor<T> y({g.c_out, g.h_out, g.w_out});
  for (std::size_t o = 0; o < g.c_out; ++o) {
    const T b = bias.empty() ? T{0} : bias[o];
    std::fill(y.data() + o * npix, y.data() + (o + 1) * npix, b);
  }
  detail::gemm_nn(g.c_out, npix, kdim, weight.data(), kdim, cols.data(), npix, y.data(), npix, true);
  return y;
}

template <typename T>
struct Conv2dGrads {
  Tensor<T> dx;
  Tensor<T> dweight;
  std::vector<T> dbias;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& dy,
                               std::size_t stride, std::size_t pad) {
  const Conv2dGeometry g = conv2d_geometry(x.shape(), weight.shape(), stride, pad);
  const std::size_t npix = g.h_out * g.w_out, kdim = g.c_in * g.k * g.k;
  const std::vector<T> cols = detail::im2col(x.data(), g);
  Conv2dGrads<T> r{Tensor<T>(x.shape()), Tensor<T>(weight.shape()), std::vector<T>(g.c_out, T{0})};
  for (std::size_t o = 0; o < g.c_out; ++o) {
    T s = 0;
    for (std::size_t p = 0; p < npix; ++p) s += dy[o * npix + p];
    r.dbias[o] = s;
  }
  detail::gemm_nt(g.c_out, kdim, npix, dy.data(), npix, cols.data(), npix, r.dweight.data(), kdim,
                  false);
  std::vector<T> dcols(kdim * npix);
  detail::gemm_tn(kdim, npix, g.c_out, weight.data(), kdim, dy.data(), npix, dcols.data(), npix,
                  false);
  detail::col2im(dcols.data(), g, r.dx.data());
  return r;
}

// ---------------------------------------------------------------------------
// nearest-neighbour 2x upsampling

/// [C x H x W] -> [C x 2H x 2W]
template <typename T>
Tensor<T> nearest_upsample2x(const Tensor<T>& x) {
  if (x.rank() != 3) throw ShapeError("nearest_upsample2x expects CxHxW");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor<T> y({c, 2 * h, 2 * w});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < 2 * h; ++i)
      for (std::size_t j = 0; j < 2 * w; ++j) y(ch, i, j) = x(ch, i / 2, j / 2);
  return y;
}

template <typename T>
Tensor<T> nearest_upsample2x_backward(const Tensor<T>& dy) {
  const std::size_t c = dy.dim(0), h = dy.dim(1) / 2, w = dy.dim(2) / 2;
  Tensor<T> dx({c, h, w});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < 2 * h; ++i)
      for (std::size_t j = 0; j < 2 * w; ++j) dx(ch, i / 2, j / 2) += dy(ch, i, j);
  return dx;
}

/// [H x W x C] -> [2H x 2W x C]
template <typename T>
Tensor<T> nearest_upsample2x_hwc(const Tensor<T>& x) {
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  Tensor<T> y({2 * h, 2 * w, c});
  for (std::size_t i = 0; i < 2 * h; ++i)
    for (std::size_t j = 0; j < 2 * w; ++j)
      std::copy_n(x.data() + ((i / 2) * w + j / 2) * c, c, y.data() + (i * 2 * w + j) * c);
  return y;
}

template <typename T>
Tensor<T> nearest_upsample2x_hwc_backward(const Tensor<T>& dy) {
  const std::size_t h = dy.dim(0) / 2, w = dy.dim(1) / 2, c = dy.dim(2);
  Tensor<T> dx({h, w, c});
  for (std::size_t i = 0; i < 2 * h; ++i) {
    for (std::size_t j = 0; j < 2 * w; ++j) {
      const T* src = dy.data() + (i * 2 * w + j) * c;
      T* dst = dx.data() + ((i / 2) * w + j / 2) * c;
      for (std::size_t ch = 0; ch < c; ++ch) dst[ch] += src[ch];
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// window bookkeeping on [H x W x C] token grids

/// Zero-pads bottom/right so both extents become multiples of `multiple`.
template <typename T>
Tensor<T> pad_to_multiple(const Tensor<T>& x, std::size_t multiple) {
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  const std::size_t hp = (h + multiple - 1) / multiple * multiple;
  const std::size_t wp = (w + multiple - 1) / multiple * multiple;
  if (hp == h && wp == w) return x;
  Tensor<T> y({hp, wp, c});
  for (std::size_t i = 0; i < h; ++i) std::copy_n(x.data() + i * w * c, w * c, y.data() + i * wp * c);
  return y;
}

/// Inverse of pad_to_multiple: keeps the top-left h x w region.
template <typename T>
Tensor<T> crop_hw(const Tensor<T>& x, std::size_t h, std::size_t w) {
  const std::size_t wp = x.dim(1), c = x.dim(2);
  if (x.dim(0) == h && wp == w) return x;
  Tensor<T> y({h, w, c});
  for (std::size_t i = 0; i < h; ++i) std::copy_n(x.data() + i * wp * c, w * c, y.data() + i * w * c);
  return y;
}

/// Cyclic shift: out[(i + dy) mod H][(j + dx) mod W] = x[i][j].
template <typename T>
Tensor<T> roll_hw(const Tensor<T>& x, std::ptrdiff_t dy, std::ptrdiff_t dx) {
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  const auto mod = [](std::ptrdiff_t a, std::size_t n) {
    const std::ptrdiff_t m = a % static_cast<std::ptrdiff_t>(n);
    return static_cast<std::size_t>(m < 0 ? m + static_cast<std::ptrdiff_t>(n) : m);
  };
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < h; ++i) {
    const std::size_t oi = mod(static_cast<std::ptrdiff_t>(i) + dy, h);
    for (std::size_t j = 0; j < w; ++j) {
      const std::size_t oj = mod(static_cast<std::ptrdiff_t>(j) + dx, w);
      std::copy_n(x.data() + (i * w + j) * c, c, y.data() + (oi * w + oj) * c);
    }
  }
  return y;
}

/// [H x W x C] -> [(H/w * W/w) x w^2 x C]; windows in row-major order.
template <typename T>
Tensor<T> window_partition(const Tensor<T>& x, std::size_t win) {
  if (x.rank() != 3) throw ShapeError("window_partition expects HxWxC");
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  if (win == 0 || h % win || w % win) {
    throw ShapeError("window_partition: " + shape_str(x.shape()) + " not divisible by window " +
                     std::to_string(win));
  }
  const std::size_t nh = h / win, nw = w / win;
  Tensor<T> y({nh * nw, win * win, c});
  for (std::size_t bi = 0; bi < nh; ++bi)
    for (std::size_t bj = 0; bj < nw; ++bj)
      for (std::size_t r = 0; r < win; ++r)
        std::copy_n(x.data() + ((bi * win + r) * w + bj * win) * c, win * c,
                    y.data() + ((bi * nw + bj) * win * win + r * win) * c);
  return y;
}

template <typename T>
Tensor<T> window_reverse(const Tensor<T>& windows, std::size_t win, std::size_t h, std::size_t w) {
  if (windows.rank() != 3 || windows.dim(1) != win * win || h % win || w % win ||
      windows.dim(0) != (h / win) * (w / win)) {
    throw ShapeError("window_reverse: inconsistent shape " + shape_str(windows.shape()));
  }
  const std::size_t c = windows.dim(2), nw = w / win;
  Tensor<T> x({h, w, c});
  for (std::size_t bi = 0; bi < h / win; ++bi)
    for (std::size_t bj = 0; bj < nw; ++bj)
      for (std::size_t r = 0; r < win; ++r)
        std::copy_n(windows.data() + ((bi * nw + bj) * win * win + r * win) * c, win * c,
                    x.data() + ((bi * win + r) * w + bj * win) * c);
  return x;
}

}  // namespace soynet
