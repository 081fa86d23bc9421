#pragma once

// Dense layer kernels with exact backward passes. Conventions:
//  - convolution is cross-correlation; the direct and im2col paths execute
//    the same floating additions in the same order, so they agree bitwise
//    (padded taps contribute an explicit 0 * w term in both).
//  - parallel partitions are disjoint output ranges with sequential inner
//    accumulation, so any NHL_THREADS value reproduces the 1-thread bits.

#include <cmath>
#include <limits>
#include <type_traits>
#include <vector>

#include "nhl/graph.hpp"
#include "nhl/parallel.hpp"
#include "nhl/tensor.hpp"

namespace nhl {

enum class ConvAlgo { im2col, direct };

template <typename T>
struct ConvGrads {
  Tensor<T> dx, dw, db;
};

namespace detail {

inline long long conv_extent(long long in, int pad, int k, int stride) {
  const long long padded = in + 2LL * pad;
  if (padded < k) {
    throw ValidationError("NonPositiveSpatial", "kernel larger than padded input");
  }
  return (padded - k) / stride + 1;
}

// col is (Cg*KH*KW) x (OH*OW) for one sample and one channel group, row
// order (ic, kh, kw) to match the direct path's accumulation order.
template <typename T>
void im2col(const T* x, long long C, long long H, long long W, long long g, long long cg, int kh, int kw,
            int stride, int pad, long long oh_n, long long ow_n, T* col) {
  const long long P = oh_n * ow_n;
  for (long long ic = 0; ic < cg; ++ic) {
    const T* plane = x + (g * cg + ic) * H * W;
    for (int fh = 0; fh < kh; ++fh) {
      for (int fw = 0; fw < kw; ++fw) {
        T* row = col + ((ic * kh + fh) * kw + fw) * P;
        for (long long oh = 0; oh < oh_n; ++oh) {
          const long long ih = oh * stride - pad + fh;
          if (ih < 0 || ih >= H) {
            for (long long ow = 0; ow < ow_n; ++ow) row[oh * ow_n + ow] = T(0);
            continue;
          }
          for (long long ow = 0; ow < ow_n; ++ow) {
            const long long iw = ow * stride - pad + fw;
            row[oh * ow_n + ow] = (iw >= 0 && iw < W) ? plane[ih * W + iw] : T(0);
          }
        }
      }
    }
  }
}

}  // namespace detail

template <typename T>
void check_conv_args(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias, int stride, int padding,
                     int groups) {
  require_rank(x, 4, "conv2d input");
  require_rank(w, 4, "conv2d weight");
  if (stride < 1 || padding < 0 || groups < 1) {
    throw ValidationError("ShapeMismatch", "conv2d: stride/padding/groups out of range");
  }
  if (x.dim(1) % groups != 0 || w.dim(0) % groups != 0) {
    throw ValidationError("GroupMismatch", "conv2d: channels not divisible by groups");
  }
  if (w.dim(1) != x.dim(1) / groups) {
    throw ValidationError("GroupMismatch", "conv2d: weight in-channels disagree with input");
  }
  if (bias != nullptr && (bias->rank() != 1 || bias->dim(0) != w.dim(0))) {
    throw ValidationError("ShapeMismatch", "conv2d: bias must be (out_ch)");
  }
}

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w,
                         std::type_identity_t<const Tensor<T>*> bias, int stride, int padding,
                         int groups, ConvAlgo algo = ConvAlgo::im2col) {
  check_conv_args(x, w, bias, stride, padding, groups);
  const long long N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const long long OC = w.dim(0), cg = w.dim(1);
  const int kh = static_cast<int>(w.dim(2)), kw = static_cast<int>(w.dim(3));
  const long long oh_n = detail::conv_extent(H, padding, kh, stride);
  const long long ow_n = detail::conv_extent(W, padding, kw, stride);
  const long long ocg = OC / groups;
  const long long K = cg * kh * kw;
  const long long P = oh_n * ow_n;

  Tensor<T> y({N, OC, oh_n, ow_n});

  if (algo == ConvAlgo::im2col) {
    std::vector<T> col(static_cast<size_t>(K * P));
    for (long long n = 0; n < N; ++n) {
      for (int g = 0; g < groups; ++g) {
        detail::im2col(x.ptr() + n * C * H * W, C, H, W, g, cg, kh, kw, stride, padding, oh_n, ow_n,
                       col.data());
        parallel_for(ocg, [&](long long i0, long long i1) {
          for (long long i = i0; i < i1; ++i) {
            const long long oc = g * ocg + i;
            const T* wrow = w.ptr() + oc * K;
            T* yrow = y.ptr() + ((n * OC + oc) * oh_n) * ow_n;
            const T b = bias ? bias->ptr()[oc] : T(0);
            for (long long j = 0; j < P; ++j) yrow[j] = b;
            for (long long k = 0; k < K; ++k) {
              const T wv = wrow[k];
              const T* crow = col.data() + k * P;
              for (long long j = 0; j < P; ++j) yrow[j] += wv * crow[j];
            }
          }
        });
      }
    }
    return y;
  }

  // Direct path: same accumulation order as the im2col path.
  for (long long n = 0; n < N; ++n) {
    for (int g = 0; g < groups; ++g) {
      parallel_for(ocg, [&](long long i0, long long i1) {
        for (long long i = i0; i < i1; ++i) {
          const long long oc = g * ocg + i;
          const T* wbase = w.ptr() + oc * K;
          const T b = bias ? bias->ptr()[oc] : T(0);
          for (long long oh = 0; oh < oh_n; ++oh) {
            for (long long ow = 0; ow < ow_n; ++ow) {
              T acc = b;
              for (long long ic = 0; ic < cg; ++ic) {
                const T* plane = x.ptr() + ((n * C + g * cg + ic) * H) * W;
                for (int fh = 0; fh < kh; ++fh) {
                  for (int fw = 0; fw < kw; ++fw) {
                    const long long ih = oh * stride - padding + fh;
                    const long long iw = ow * stride - padding + fw;
                    const T xv =
                        (ih >= 0 && ih < H && iw >= 0 && iw < W) ? plane[ih * W + iw] : T(0);
                    acc += wbase[(ic * kh + fh) * kw + fw] * xv;
                  }
                }
              }
              y.at4(n, oc, oh, ow) = acc;
            }
          }
        }
      });
    }
  }
  return y;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, bool has_bias, int stride, int padding,
                             int groups, const Tensor<T>& dy, bool need_dx = true) {
  check_conv_args(x, w, static_cast<const Tensor<T>*>(nullptr), stride, padding, groups);
  const long long N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const long long OC = w.dim(0), cg = w.dim(1);
  const int kh = static_cast<int>(w.dim(2)), kw = static_cast<int>(w.dim(3));
  const long long oh_n = detail::conv_extent(H, padding, kh, stride);
  const long long ow_n = detail::conv_extent(W, padding, kw, stride);
  if (dy.dims != std::vector<long long>{N, OC, oh_n, ow_n}) {
    throw ValidationError("ShapeMismatch", "conv2d backward: dy shape mismatch");
  }
  const long long ocg = OC / groups;
  const long long K = cg * kh * kw;
  const long long P = oh_n * ow_n;

  ConvGrads<T> grads;
  grads.dw = Tensor<T>({OC, cg, kh, kw});
  if (has_bias) {
    grads.db = Tensor<T>({OC});
    for (long long oc = 0; oc < OC; ++oc) {
      T acc = T(0);
      for (long long n = 0; n < N; ++n) {
        const T* row = dy.ptr() + ((n * OC + oc) * oh_n) * ow_n;
        for (long long j = 0; j < P; ++j) acc += row[j];
      }
      grads.db.ptr()[oc] = acc;
    }
  }

  // dw[oc][k] = sum over n of <dy row, col row>; n outer-sequential so the
  // accumulation order is fixed no matter how rows are partitioned.
  {
    std::vector<T> col(static_cast<size_t>(K * P));
    for (long long n = 0; n < N; ++n) {
      for (int g = 0; g < groups; ++g) {
        detail::im2col(x.ptr() + n * C * H * W, C, H, W, g, cg, kh, kw, stride, padding, oh_n, ow_n,
                       col.data());
        parallel_for(ocg, [&](long long i0, long long i1) {
          for (long long i = i0; i < i1; ++i) {
            const long long oc = g * ocg + i;
            const T* dyrow = dy.ptr() + ((n * OC + oc) * oh_n) * ow_n;
            T* dwrow = grads.dw.ptr() + oc * K;
            for (long long k = 0; k < K; ++k) {
              const T* crow = col.data() + k * P;
              T acc = T(0);
              for (long long j = 0; j < P; ++j) acc += dyrow[j] * crow[j];
              dwrow[k] += acc;
            }
          }
        });
      }
    }
  }

  if (need_dx) {
    grads.dx = Tensor<T>({N, C, H, W});
    parallel_for(N, [&](long long n0, long long n1) {
      std::vector<T> colgrad(static_cast<size_t>(K * P));
      for (long long n = n0; n < n1; ++n) {
        for (int g = 0; g < groups; ++g) {
          std::fill(colgrad.begin(), colgrad.end(), T(0));
          for (long long i = 0; i < ocg; ++i) {
            const long long oc = g * ocg + i;
            const T* wrow = w.ptr() + oc * K;
            const T* dyrow = dy.ptr() + ((n * OC + oc) * oh_n) * ow_n;
            for (long long k = 0; k < K; ++k) {
              const T wv = wrow[k];
              T* crow = colgrad.data() + k * P;
              for (long long j = 0; j < P; ++j) crow[j] += wv * dyrow[j];
            }
          }
          // col2im scatter-add
          for (long long ic = 0; ic < cg; ++ic) {
            T* plane = grads.dx.ptr() + ((n * C + g * cg + ic) * H) * W;
            for (int fh = 0; fh < kh; ++fh) {
              for (int fw = 0; fw < kw; ++fw) {
                const T* crow = colgrad.data() + ((ic * kh + fh) * kw + fw) * P;
                for (long long oh = 0; oh < oh_n; ++oh) {
                  const long long ih = oh * stride - padding + fh;
                  if (ih < 0 || ih >= H) continue;
                  for (long long ow = 0; ow < ow_n; ++ow) {
                    const long long iw = ow * stride - padding + fw;
                    if (iw < 0 || iw >= W) continue;
                    plane[ih * W + iw] += crow[oh * ow_n + ow];
                  }
                }
              }
            }
          }
        }
      }
    });
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Batch normalization

template <typename T>
struct BatchNormCache {
  Tensor<T> mean, invstd;  // statistics actually used by the forward pass
  bool train = false;
};

template <typename T>
Tensor<T> batchnorm2d_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                              Tensor<T>& running_mean, Tensor<T>& running_var, bool train,
                              std::type_identity_t<T> momentum, std::type_identity_t<T> eps,
                              std::type_identity_t<BatchNormCache<T>*> cache = nullptr) {
  require_rank(x, 4, "batchnorm2d input");
  const long long N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (gamma.size() != C || beta.size() != C || running_mean.size() != C || running_var.size() != C) {
    throw ValidationError("ShapeMismatch", "batchnorm2d: affine/stat tensors must have C entries");
  }
  Tensor<T> mean({C}), invstd({C});
  const long long count = N * H * W;
  if (train) {
    for (long long c = 0; c < C; ++c) {
      T sum = T(0);
      for (long long n = 0; n < N; ++n) {
        const T* plane = x.ptr() + ((n * C + c) * H) * W;
        for (long long i = 0; i < H * W; ++i) sum += plane[i];
      }
      const T m = sum / static_cast<T>(count);
      T sq = T(0);
      for (long long n = 0; n < N; ++n) {
        const T* plane = x.ptr() + ((n * C + c) * H) * W;
        for (long long i = 0; i < H * W; ++i) {
          const T d = plane[i] - m;
          sq += d * d;
        }
      }
      const T var_biased = sq / static_cast<T>(count);
      mean.ptr()[c] = m;
      invstd.ptr()[c] = T(1) / std::sqrt(var_biased + eps);
      const T var_unbiased = count > 1 ? sq / static_cast<T>(count - 1) : var_biased;
      running_mean.ptr()[c] = (T(1) - momentum) * running_mean.ptr()[c] + momentum * m;
      running_var.ptr()[c] = (T(1) - momentum) * running_var.ptr()[c] + momentum * var_unbiased;
    }
  } else {
    for (long long c = 0; c < C; ++c) {
      mean.ptr()[c] = running_mean.ptr()[c];
      invstd.ptr()[c] = T(1) / std::sqrt(running_var.ptr()[c] + eps);
    }
  }

  Tensor<T> y(x.dims);
  for (long long c = 0; c < C; ++c) {
    const T m = mean.ptr()[c], is = invstd.ptr()[c], ga = gamma.ptr()[c], be = beta.ptr()[c];
    for (long long n = 0; n < N; ++n) {
      const T* xp = x.ptr() + ((n * C + c) * H) * W;
      T* yp = y.ptr() + ((n * C + c) * H) * W;
      for (long long i = 0; i < H * W; ++i) yp[i] = ga * (xp[i] - m) * is + be;
    }
  }
  if (cache != nullptr) {
    cache->mean = std::move(mean);
    cache->invstd = std::move(invstd);
    cache->train = train;
  }
  return y;
}

template <typename T>
struct BatchNormGrads {
  Tensor<T> dx, dgamma, dbeta;
};

template <typename T>
BatchNormGrads<T> batchnorm2d_backward(const Tensor<T>& x, const Tensor<T>& gamma,
                                       const BatchNormCache<T>& cache, const Tensor<T>& dy) {
  require_rank(x, 4, "batchnorm2d input");
  if (!x.same_dims(dy)) {
    throw ValidationError("ShapeMismatch", "batchnorm2d backward: dy shape mismatch");
  }
  const long long N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const long long count = N * H * W;
  BatchNormGrads<T> g{Tensor<T>(x.dims), Tensor<T>({C}), Tensor<T>({C})};
  for (long long c = 0; c < C; ++c) {
    const T m = cache.mean.ptr()[c], is = cache.invstd.ptr()[c], ga = gamma.ptr()[c];
    T sum_dy = T(0), sum_dy_xhat = T(0);
    for (long long n = 0; n < N; ++n) {
      const T* xp = x.ptr() + ((n * C + c) * H) * W;
      const T* dp = dy.ptr() + ((n * C + c) * H) * W;
      for (long long i = 0; i < H * W; ++i) {
        sum_dy += dp[i];
        sum_dy_xhat += dp[i] * (xp[i] - m) * is;
      }
    }
    g.dbeta.ptr()[c] = sum_dy;
    g.dgamma.ptr()[c] = sum_dy_xhat;
    const T inv_count = T(1) / static_cast<T>(count);
    for (long long n = 0; n < N; ++n) {
      const T* xp = x.ptr() + ((n * C + c) * H) * W;
      const T* dp = dy.ptr() + ((n * C + c) * H) * W;
      T* op = g.dx.ptr() + ((n * C + c) * H) * W;
      for (long long i = 0; i < H * W; ++i) {
        if (cache.train) {
          const T xhat = (xp[i] - m) * is;
          op[i] = ga * is * (dp[i] - sum_dy * inv_count - xhat * sum_dy_xhat * inv_count);
        } else {
          op[i] = ga * is * dp[i];  // stats are constants in eval mode
        }
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Activations

template <typename T>
T gelu_scalar(T v) {
  return v * T(0.5) * (T(1) + std::erf(v / std::sqrt(T(2))));
}

template <typename T>
Tensor<T> activation_forward(const Tensor<T>& x, ActFn fn) {
  Tensor<T> y(x.dims);
  const T* xp = x.ptr();
  T* yp = y.ptr();
  if (fn == ActFn::relu) {
    for (long long i = 0; i < x.size(); ++i) yp[i] = xp[i] > T(0) ? xp[i] : T(0);
  } else {
    for (long long i = 0; i < x.size(); ++i) yp[i] = gelu_scalar(xp[i]);
  }
  return y;
}

template <typename T>
Tensor<T> activation_backward(const Tensor<T>& x, ActFn fn, const Tensor<T>& dy) {
  if (!x.same_dims(dy)) {
    throw ValidationError("ShapeMismatch", "activation backward: dy shape mismatch");
  }
  Tensor<T> dx(x.dims);
  const T* xp = x.ptr();
  const T* dp = dy.ptr();
  T* op = dx.ptr();
  if (fn == ActFn::relu) {
    for (long long i = 0; i < x.size(); ++i) op[i] = xp[i] > T(0) ? dp[i] : T(0);
  } else {
    const T inv_sqrt2 = T(1) / std::sqrt(T(2));
    const T inv_sqrt2pi = T(1) / std::sqrt(T(2) * static_cast<T>(M_PI));
    for (long long i = 0; i < x.size(); ++i) {
      const T phi = T(0.5) * (T(1) + std::erf(xp[i] * inv_sqrt2));
      const T pdf = inv_sqrt2pi * std::exp(-xp[i] * xp[i] * T(0.5));
      op[i] = dp[i] * (phi + xp[i] * pdf);
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Pooling

struct MaxPoolCache {
  std::vector<long long> argmax;  // flat input index per output element
};

template <typename T>
Tensor<T> maxpool2d_forward(const Tensor<T>& x, int kh, int kw, int stride, int padding,
                            MaxPoolCache* cache = nullptr) {
  require_rank(x, 4, "maxpool2d input");
  if (2 * padding > kh || 2 * padding > kw) {
    throw ValidationError("PaddingTooLarge", "maxpool2d: padding may not exceed half the kernel");
  }
  const long long N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const long long oh_n = detail::conv_extent(H, padding, kh, stride);
  const long long ow_n = detail::conv_extent(W, padding, kw, stride);
  Tensor<T> y({N, C, oh_n, ow_n});
  if (cache != nullptr) cache->argmax.assign(static_cast<size_t>(y.size()), -1);
  long long oi = 0;
  for (long long n = 0; n < N; ++n) {
    for (long long c = 0; c < C; ++c) {
      const T* plane = x.ptr() + ((n * C + c) * H) * W;
      for (long long oh = 0; oh < oh_n; ++oh) {
        for (long long ow = 0; ow < ow_n; ++ow, ++oi) {
          T best = -std::numeric_limits<T>::infinity();
          long long best_idx = -1;
          for (int fh = 0; fh < kh; ++fh) {
            const long long ih = oh * stride - padding + fh;
            if (ih < 0 || ih >= H) continue;  // padding holds -inf, never selected
            for (int fw = 0; fw < kw; ++fw) {
              const long long iw = ow * stride - padding + fw;
              if (iw < 0 || iw >= W) continue;
              const T v = plane[ih * W + iw];
              if (v > best) {  // strict: first index wins ties
                best = v;
                best_idx = ((n * C + c) * H + ih) * W + iw;
              }
            }
          }
          y.ptr()[oi] = best;
          if (cache != nullptr) cache->argmax[static_cast<size_t>(oi)] = best_idx;
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> maxpool2d_backward(const std::vector<long long>& x_dims, const MaxPoolCache& cache,
                             const Tensor<T>& dy) {
  Tensor<T> dx(x_dims);
  const T* dp = dy.ptr();
  for (long long i = 0; i < dy.size(); ++i) {
    const long long src = cache.argmax[static_cast<size_t>(i)];
    if (src >= 0) dx.ptr()[src] += dp[i];
  }
  return dx;
}

template <typename T>
Tensor<T> global_avg_pool_forward(const Tensor<T>& x) {
  require_rank(x, 4, "global_avg_pool input");
  const long long N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  Tensor<T> y({N, C});
  for (long long n = 0; n < N; ++n) {
    for (long long c = 0; c < C; ++c) {
      const T* plane = x.ptr() + (n * C + c) * HW;
      T acc = T(0);
      for (long long i = 0; i < HW; ++i) acc += plane[i];
      y.at2(n, c) = acc / static_cast<T>(HW);
    }
  }
  return y;
}

template <typename T>
Tensor<T> global_avg_pool_backward(const std::vector<long long>& x_dims, const Tensor<T>& dy) {
  Tensor<T> dx(x_dims);
  const long long N = x_dims[0], C = x_dims[1], HW = x_dims[2] * x_dims[3];
  const T scale = T(1) / static_cast<T>(HW);
  for (long long n = 0; n < N; ++n) {
    for (long long c = 0; c < C; ++c) {
      const T g = dy.at2(n, c) * scale;
      T* plane = dx.ptr() + (n * C + c) * HW;
      for (long long i = 0; i < HW; ++i) plane[i] = g;
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Linear

// `w` is (rows, in_features); `row_select` (possibly empty) maps output slot
// to stored row, which is how sliced expert heads reuse full checkpoints.
template <typename T>
Tensor<T> linear_forward(const Tensor<T>& x, const Tensor<T>& w,
                         std::type_identity_t<const Tensor<T>*> bias,
                         const std::vector<int>& row_select) {
  require_rank(x, 2, "linear input");
  require_rank(w, 2, "linear weight");
  const long long N = x.dim(0), F = x.dim(1);
  if (w.dim(1) != F) {
    throw ValidationError("ShapeMismatch", "linear: weight columns != input features");
  }
  const long long out = row_select.empty() ? w.dim(0) : static_cast<long long>(row_select.size());
  Tensor<T> y({N, out});
  for (long long n = 0; n < N; ++n) {
    const T* xrow = x.ptr() + n * F;
    for (long long o = 0; o < out; ++o) {
      const long long row = row_select.empty() ? o : row_select[static_cast<size_t>(o)];
      if (row < 0 || row >= w.dim(0)) {
        throw ValidationError("ShapeMismatch", "linear: row_select out of range");
      }
      const T* wrow = w.ptr() + row * F;
      T acc = bias ? bias->ptr()[row] : T(0);
      for (long long f = 0; f < F; ++f) acc += xrow[f] * wrow[f];
      y.at2(n, o) = acc;
    }
  }
  return y;
}

template <typename T>
struct LinearGrads {
  Tensor<T> dx, dw, db;
};

template <typename T>
LinearGrads<T> linear_backward(const Tensor<T>& x, const Tensor<T>& w, bool has_bias,
                               const std::vector<int>& row_select, const Tensor<T>& dy) {
  const long long N = x.dim(0), F = x.dim(1);
  const long long out = row_select.empty() ? w.dim(0) : static_cast<long long>(row_select.size());
  if (dy.dims != std::vector<long long>{N, out}) {
    throw ValidationError("ShapeMismatch", "linear backward: dy shape mismatch");
  }
  LinearGrads<T> g;
  g.dx = Tensor<T>({N, F});
  g.dw = Tensor<T>(w.dims);
  if (has_bias) g.db = Tensor<T>({w.dim(0)});
  for (long long n = 0; n < N; ++n) {
    const T* xrow = x.ptr() + n * F;
    T* dxrow = g.dx.ptr() + n * F;
    for (long long o = 0; o < out; ++o) {
      const long long row = row_select.empty() ? o : row_select[static_cast<size_t>(o)];
      const T gv = dy.at2(n, o);
      const T* wrow = w.ptr() + row * F;
      T* dwrow = g.dw.ptr() + row * F;
      for (long long f = 0; f < F; ++f) {
        dxrow[f] += gv * wrow[f];
        dwrow[f] += gv * xrow[f];
      }
      if (has_bias) g.db.ptr()[row] += gv;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Loss

template <typename T>
struct SoftmaxLoss {
  T loss;
  Tensor<T> dlogits;
};

// Mean softmax-log-loss with the log-sum-exp shift; dlogits = (p - onehot)/N.
template <typename T>
SoftmaxLoss<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& targets) {
  require_rank(logits, 2, "softmax_cross_entropy logits");
  const long long N = logits.dim(0), K = logits.dim(1);
  if (static_cast<long long>(targets.size()) != N) {
    throw ValidationError("ShapeMismatch", "softmax_cross_entropy: one target per sample required");
  }
  SoftmaxLoss<T> out{T(0), Tensor<T>({N, K})};
  for (long long n = 0; n < N; ++n) {
    const int t = targets[static_cast<size_t>(n)];
    if (t < 0 || t >= K) {
      throw ValidationError("TargetOutOfRange", "target " + std::to_string(t) + " outside [0," +
                                                    std::to_string(K) + ")");
    }
    const T* z = logits.ptr() + n * K;
    T zmax = z[0];
    for (long long k = 1; k < K; ++k) zmax = std::max(zmax, z[k]);
    T sum = T(0);
    for (long long k = 0; k < K; ++k) sum += std::exp(z[k] - zmax);
    const T lse = zmax + std::log(sum);
    out.loss += lse - z[t];
    T* d = out.dlogits.ptr() + n * K;
    for (long long k = 0; k < K; ++k) {
      const T p = std::exp(z[k] - zmax) / sum;
      d[k] = (p - (k == t ? T(1) : T(0))) / static_cast<T>(N);
    }
  }
  out.loss /= static_cast<T>(N);
  return out;
}

}  // namespace nhl
