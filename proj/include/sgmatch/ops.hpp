#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "sgmatch/tensor.hpp"

// Dense kernels used by the encoders. Every forward has a matching backward
// that accumulates into the operand gradients; reductions run in double
// accumulators regardless of T so float32 runs keep reorder noise at the ulp
// level.

namespace sgmatch {

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw ShapeMismatch("matmul: " + a.shape_str() + " x " + b.shape_str());
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> c({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p)
        acc += static_cast<double>(a.at(i, p)) * static_cast<double>(b.at(p, j));
      c.at(i, j) = static_cast<T>(acc);
    }
  return c;
}

// dA += dC * B^T, dB += A^T * dC
template <typename T>
void matmul_backward(const Tensor<T>& a, const Tensor<T>& b,
                     const Tensor<T>& dc, Tensor<T>& da, Tensor<T>& db) {
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        acc += static_cast<double>(dc.at(i, j)) * static_cast<double>(b.at(p, j));
      da.at(i, p) += static_cast<T>(acc);
    }
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < m; ++i)
        acc += static_cast<double>(a.at(i, p)) * static_cast<double>(dc.at(i, j));
      db.at(p, j) += static_cast<T>(acc);
    }
}

// Row-wise softmax with per-row max subtraction.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  const std::size_t m = x.rows(), n = x.cols();
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      mx = std::max(mx, static_cast<double>(x.at(i, j)));
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      z += std::exp(static_cast<double>(x.at(i, j)) - mx);
    for (std::size_t j = 0; j < n; ++j)
      y.at(i, j) =
          static_cast<T>(std::exp(static_cast<double>(x.at(i, j)) - mx) / z);
  }
  return y;
}

// dx += y .* (dy - rowsum(dy .* y))
template <typename T>
void softmax_rows_backward(const Tensor<T>& y, const Tensor<T>& dy,
                           Tensor<T>& dx) {
  const std::size_t m = y.rows(), n = y.cols();
  for (std::size_t i = 0; i < m; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      dot += static_cast<double>(dy.at(i, j)) * static_cast<double>(y.at(i, j));
    for (std::size_t j = 0; j < n; ++j)
      dx.at(i, j) += static_cast<T>(static_cast<double>(y.at(i, j)) *
                                    (static_cast<double>(dy.at(i, j)) - dot));
  }
}

template <typename T>
struct LayerNormCache {
  Tensor<T> x_hat;              // normalized input before the affine step
  std::vector<double> inv_std;  // one per row
};

// Per-row mean-0/var-1 normalization, eps inside the square root, then
// gain/bias.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain,
                     const Tensor<T>& bias, double eps,
                     LayerNormCache<T>* cache = nullptr) {
  const std::size_t m = x.rows(), n = x.cols();
  if (gain.size() != n || bias.size() != n)
    throw ShapeMismatch("layer_norm: gain/bias length " +
                        std::to_string(gain.size()) + " vs width " +
                        std::to_string(n));
  Tensor<T> y(x.shape());
  Tensor<T> x_hat(x.shape());
  std::vector<double> inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += static_cast<double>(x.at(i, j));
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double d = static_cast<double>(x.at(i, j)) - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    double is = 1.0 / std::sqrt(var + eps);
    inv_std[i] = is;
    for (std::size_t j = 0; j < n; ++j) {
      double xh = (static_cast<double>(x.at(i, j)) - mean) * is;
      x_hat.at(i, j) = static_cast<T>(xh);
      y.at(i, j) = static_cast<T>(xh * static_cast<double>(gain[j]) +
                                  static_cast<double>(bias[j]));
    }
  }
  if (cache) {
    cache->x_hat = std::move(x_hat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <typename T>
void layer_norm_backward(const LayerNormCache<T>& cache, const Tensor<T>& gain,
                         const Tensor<T>& dy, Tensor<T>& dx, Tensor<T>& dgain,
                         Tensor<T>& dbias) {
  const Tensor<T>& xh = cache.x_hat;
  const std::size_t m = xh.rows(), n = xh.cols();
  for (std::size_t i = 0; i < m; ++i) {
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double g = static_cast<double>(dy.at(i, j)) * static_cast<double>(gain[j]);
      sum_g += g;
      sum_gx += g * static_cast<double>(xh.at(i, j));
      dgain[j] += static_cast<T>(static_cast<double>(dy.at(i, j)) *
                                 static_cast<double>(xh.at(i, j)));
      dbias[j] += dy.at(i, j);
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) {
      double g = static_cast<double>(dy.at(i, j)) * static_cast<double>(gain[j]);
      double xhat = static_cast<double>(xh.at(i, j));
      dx.at(i, j) += static_cast<T>(cache.inv_std[i] *
                                    (g - inv_n * sum_g - xhat * inv_n * sum_gx));
    }
  }
}

// tanh-approximation GELU:
//   gelu(x) = 0.5 * x * (1 + tanh(sqrt(2/pi) * (x + 0.044715 * x^3)))
inline double gelu_scalar(double x) {
  const double c = 0.7978845608028653558798921198687;  // sqrt(2/pi)
  return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
}

inline double gelu_grad_scalar(double x) {
  const double c = 0.7978845608028653558798921198687;
  double u = c * (x + 0.044715 * x * x * x);
  double t = std::tanh(u);
  double du = c * (1.0 + 3.0 * 0.044715 * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] = static_cast<T>(gelu_scalar(static_cast<double>(x[i])));
  return y;
}

template <typename T>
void gelu_backward(const Tensor<T>& x, const Tensor<T>& dy, Tensor<T>& dx) {
  for (std::size_t i = 0; i < x.size(); ++i)
    dx[i] += static_cast<T>(gelu_grad_scalar(static_cast<double>(x[i])) *
                            static_cast<double>(dy[i]));
}

// y = x * W^T + b with W stored [out x in]. The bias is optional; the
// attention projections run without one (a key bias cancels in the softmax
// anyway).
template <typename T>
struct Linear {
  Param<T>* w = nullptr;
  Param<T>* b = nullptr;  // may stay null for a bias-free projection

  Tensor<T> forward(const Tensor<T>& x) const {
    const std::size_t m = x.rows(), in = x.cols(), out = w->value.dim(0);
    if (in != w->value.dim(1))
      throw ShapeMismatch("linear: input width " + std::to_string(in) +
                          " vs weight " + w->value.shape_str());
    Tensor<T> y({m, out});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t o = 0; o < out; ++o) {
        double acc = b ? static_cast<double>(b->value[o]) : 0.0;
        for (std::size_t j = 0; j < in; ++j)
          acc += static_cast<double>(x.at(i, j)) *
                 static_cast<double>(w->value.at(o, j));
        y.at(i, o) = static_cast<T>(acc);
      }
    return y;
  }

  void backward(const Tensor<T>& x, const Tensor<T>& dy, Tensor<T>& dx) const {
    const std::size_t m = x.rows(), in = x.cols(), out = w->value.dim(0);
    // Loops sweep the weight matrix row-contiguously; the dx accumulation
    // runs in a per-row double buffer to keep the summation order fixed.
    std::vector<double> dx_row(in);
    for (std::size_t i = 0; i < m; ++i) {
      std::fill(dx_row.begin(), dx_row.end(), 0.0);
      for (std::size_t o = 0; o < out; ++o) {
        const double g = static_cast<double>(dy.at(i, o));
        if (b) b->grad[o] += static_cast<T>(g);
        const T* w_row = &w->value.at(o, 0);
        T* wg_row = &w->grad.at(o, 0);
        const T* x_row = &x.at(i, 0);
        for (std::size_t j = 0; j < in; ++j) {
          wg_row[j] += static_cast<T>(g * static_cast<double>(x_row[j]));
          dx_row[j] += g * static_cast<double>(w_row[j]);
        }
      }
      for (std::size_t j = 0; j < in; ++j)
        dx.at(i, j) += static_cast<T>(dx_row[j]);
    }
  }
};

template <typename T>
struct AttentionCache {
  Tensor<T> x, q, k, v;
  std::vector<Tensor<T>> attn;  // per-head [K x K] softmax weights
  Tensor<T> concat;             // heads concatenated, pre output projection
};

// Scaled dot-product multi-head self-attention over a K x d block. There are
// no positional encodings here; the triple set must stay order-free, and the
// text encoder injects positions into its own input embeddings instead.
template <typename T>
struct MultiHeadAttention {
  Linear<T> wq, wk, wv, wo;
  std::size_t heads = 1;

  Tensor<T> forward(const Tensor<T>& x, AttentionCache<T>* cache) const {
    const std::size_t n = x.rows(), d = x.cols();
    if (d % heads != 0)
      throw ShapeMismatch("attention: dim " + std::to_string(d) +
                          " not divisible by " + std::to_string(heads) +
                          " heads");
    const std::size_t hd = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

    Tensor<T> q = wq.forward(x), k = wk.forward(x), v = wv.forward(x);
    Tensor<T> concat({n, d});
    std::vector<Tensor<T>> attn;
    attn.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * hd;
      Tensor<T> scores({n, n});
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          double acc = 0.0;
          for (std::size_t c = 0; c < hd; ++c)
            acc += static_cast<double>(q.at(i, off + c)) *
                   static_cast<double>(k.at(j, off + c));
          scores.at(i, j) = static_cast<T>(acc * scale);
        }
      Tensor<T> a = softmax_rows(scores);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < hd; ++c) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j)
            acc += static_cast<double>(a.at(i, j)) *
                   static_cast<double>(v.at(j, off + c));
          concat.at(i, off + c) = static_cast<T>(acc);
        }
      attn.push_back(std::move(a));
    }
    Tensor<T> y = wo.forward(concat);
    if (cache) {
      cache->x = x;
      cache->q = std::move(q);
      cache->k = std::move(k);
      cache->v = std::move(v);
      cache->attn = std::move(attn);
      cache->concat = std::move(concat);
    }
    return y;
  }

  void backward(const AttentionCache<T>& c, const Tensor<T>& dy,
                Tensor<T>& dx) const {
    const std::size_t n = c.x.rows(), d = c.x.cols();
    const std::size_t hd = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

    Tensor<T> dconcat({n, d});
    wo.backward(c.concat, dy, dconcat);

    Tensor<T> dq({n, d}), dk({n, d}), dv({n, d});
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * hd;
      const Tensor<T>& a = c.attn[h];
      // through the attn * V product
      Tensor<T> da({n, n});
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          double acc = 0.0;
          for (std::size_t cc = 0; cc < hd; ++cc)
            acc += static_cast<double>(dconcat.at(i, off + cc)) *
                   static_cast<double>(c.v.at(j, off + cc));
          da.at(i, j) = static_cast<T>(acc);
        }
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t cc = 0; cc < hd; ++cc) {
          double acc = 0.0;
          for (std::size_t i = 0; i < n; ++i)
            acc += static_cast<double>(a.at(i, j)) *
                   static_cast<double>(dconcat.at(i, off + cc));
          dv.at(j, off + cc) += static_cast<T>(acc);
        }
      // through softmax and the scaled q k^T
      Tensor<T> dscores({n, n});
      softmax_rows_backward(a, da, dscores);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          double g = static_cast<double>(dscores.at(i, j)) * scale;
          for (std::size_t cc = 0; cc < hd; ++cc) {
            dq.at(i, off + cc) +=
                static_cast<T>(g * static_cast<double>(c.k.at(j, off + cc)));
            dk.at(j, off + cc) +=
                static_cast<T>(g * static_cast<double>(c.q.at(i, off + cc)));
          }
        }
    }
    wq.backward(c.x, dq, dx);
    wk.backward(c.x, dk, dx);
    wv.backward(c.x, dv, dx);
  }
};

template <typename T>
struct TransformerLayerCache {
  LayerNormCache<T> ln1, ln2;
  Tensor<T> x, h;            // block input and post-attention residual
  Tensor<T> ln1_out, ln2_out;
  AttentionCache<T> attn;
  Tensor<T> ff_hidden_pre;   // before GELU
  Tensor<T> ff_hidden;       // after GELU
};

// Pre-layer-norm block: x + attn(ln1(x)), then h + ff(ln2(h)).
template <typename T>
struct TransformerLayer {
  MultiHeadAttention<T> attn;
  Param<T>*ln1_g = nullptr, *ln1_b = nullptr;
  Param<T>*ln2_g = nullptr, *ln2_b = nullptr;
  Linear<T> ff1, ff2;
  static constexpr double kLnEps = 1e-5;

  Tensor<T> forward(const Tensor<T>& x, TransformerLayerCache<T>* cache) const {
    TransformerLayerCache<T> local;
    TransformerLayerCache<T>& c = cache ? *cache : local;
    c.x = x;
    c.ln1_out = layer_norm(x, ln1_g->value, ln1_b->value, kLnEps, &c.ln1);
    Tensor<T> a = attn.forward(c.ln1_out, &c.attn);
    Tensor<T> h(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) h[i] = x[i] + a[i];
    c.h = h;
    c.ln2_out = layer_norm(h, ln2_g->value, ln2_b->value, kLnEps, &c.ln2);
    c.ff_hidden_pre = ff1.forward(c.ln2_out);
    c.ff_hidden = gelu(c.ff_hidden_pre);
    Tensor<T> f = ff2.forward(c.ff_hidden);
    Tensor<T> y(h.shape());
    for (std::size_t i = 0; i < h.size(); ++i) y[i] = h[i] + f[i];
    return y;
  }

  void backward(const TransformerLayerCache<T>& c, const Tensor<T>& dy,
                Tensor<T>& dx) const {
    Tensor<T> dh = dy;  // residual path
    Tensor<T> dff_hidden(c.ff_hidden.shape());
    ff2.backward(c.ff_hidden, dy, dff_hidden);
    Tensor<T> dff_pre(c.ff_hidden_pre.shape());
    gelu_backward(c.ff_hidden_pre, dff_hidden, dff_pre);
    Tensor<T> dln2(c.ln2_out.shape());
    ff1.backward(c.ln2_out, dff_pre, dln2);
    layer_norm_backward(c.ln2, ln2_g->value, dln2, dh, ln2_g->grad,
                        ln2_b->grad);

    Tensor<T> da = dh;  // residual path again
    Tensor<T> dln1(c.ln1_out.shape());
    attn.backward(c.attn, dh, dln1);
    layer_norm_backward(c.ln1, ln1_g->value, dln1, da, ln1_g->grad,
                        ln1_b->grad);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += da[i];
  }
};

// L2 normalization to unit length.
template <typename T>
Tensor<T> l2_normalize(const Tensor<T>& x, double* norm_out = nullptr) {
  double nrm = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    nrm += static_cast<double>(x[i]) * static_cast<double>(x[i]);
  nrm = std::sqrt(nrm);
  if (nrm == 0.0) throw ZeroVector("l2_normalize: zero-norm input");
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] = static_cast<T>(static_cast<double>(x[i]) / nrm);
  if (norm_out) *norm_out = nrm;
  return y;
}

// dx += (dy - y * <y, dy>) / ||x||
template <typename T>
void l2_normalize_backward(const Tensor<T>& y, double norm, const Tensor<T>& dy,
                           Tensor<T>& dx) {
  double dot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i)
    dot += static_cast<double>(y[i]) * static_cast<double>(dy[i]);
  for (std::size_t i = 0; i < y.size(); ++i)
    dx[i] += static_cast<T>(
        (static_cast<double>(dy[i]) - static_cast<double>(y[i]) * dot) / norm);
}

}  // namespace sgmatch
