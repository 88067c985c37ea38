#ifndef MATCHGAN_KERNELS_HPP_
#define MATCHGAN_KERNELS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "matchgan/tensor.hpp"

// OpenMP compute kernels. Parallelism rule: a thread owns a disjoint slice of
// the OUTPUT and reduces sequentially over its inputs, so results are
// bit-identical for any thread count. Cross-thread reductions into shared
// accumulators are never used.

namespace matchgan::kernels {

constexpr int64_t kGemmTileN = 256;

/// C[M,N] (+)= A[M,K] * B[K,N]
template <class T>
void gemm_nn(int64_t M, int64_t N, int64_t K, const T* A, const T* B, T* C,
             bool accum) {
  const int64_t nblocks = (N + kGemmTileN - 1) / kGemmTileN;
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t m = 0; m < M; ++m) {
    for (int64_t nb = 0; nb < nblocks; ++nb) {
      const int64_t n0 = nb * kGemmTileN;
      const int64_t n1 = std::min(N, n0 + kGemmTileN);
      T* c = C + m * N;
      if (!accum) {
        for (int64_t n = n0; n < n1; ++n) c[n] = T(0);
      }
      const T* a = A + m * K;
      for (int64_t k = 0; k < K; ++k) {
        const T av = a[k];
        const T* b = B + k * N;
#pragma omp simd
        for (int64_t n = n0; n < n1; ++n) c[n] += av * b[n];
      }
    }
  }
}

/// C[M,N] (+)= A^T * B with A stored [K,M]
template <class T>
void gemm_tn(int64_t M, int64_t N, int64_t K, const T* A, const T* B, T* C,
             bool accum) {
  const int64_t nblocks = (N + kGemmTileN - 1) / kGemmTileN;
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t m = 0; m < M; ++m) {
    for (int64_t nb = 0; nb < nblocks; ++nb) {
      const int64_t n0 = nb * kGemmTileN;
      const int64_t n1 = std::min(N, n0 + kGemmTileN);
      T* c = C + m * N;
      if (!accum) {
        for (int64_t n = n0; n < n1; ++n) c[n] = T(0);
      }
      for (int64_t k = 0; k < K; ++k) {
        const T av = A[k * M + m];
        const T* b = B + k * N;
#pragma omp simd
        for (int64_t n = n0; n < n1; ++n) c[n] += av * b[n];
      }
    }
  }
}

/// C[M,N] (+)= A * B^T with B stored [N,K]
template <class T>
void gemm_nt(int64_t M, int64_t N, int64_t K, const T* A, const T* B, T* C,
             bool accum) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t m = 0; m < M; ++m) {
    for (int64_t n = 0; n < N; ++n) {
      const T* a = A + m * K;
      const T* b = B + n * K;
      T acc = T(0);
#pragma omp simd reduction(+ : acc)
      for (int64_t k = 0; k < K; ++k) acc += a[k] * b[k];
      if (accum) {
        C[m * N + n] += acc;
      } else {
        C[m * N + n] = acc;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// conv plumbing: im2col/col2im with column order (b, oh, ow).
// im2col samples the source at (oh*stride - pad + kh, ow*stride - pad + kw);
// col2im is its scatter-add transpose. Both views serve plain and transposed
// convolutions (the transposed conv is the conv's adjoint).
// ---------------------------------------------------------------------------

template <class T>
void im2col(const T* X, int64_t B, int64_t C, int64_t Hs, int64_t Ws,
            int64_t k, int64_t stride, int64_t pad, int64_t Hd, int64_t Wd,
            T* col) {
  const int64_t cols = B * Hd * Wd;
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t b = 0; b < B; ++b) {
      const T* src = X + (b * C + c) * Hs * Ws;
      for (int64_t kh = 0; kh < k; ++kh) {
        for (int64_t kw = 0; kw < k; ++kw) {
          T* dst = col + ((c * k + kh) * k + kw) * cols + b * Hd * Wd;
          for (int64_t oh = 0; oh < Hd; ++oh) {
            const int64_t ih = oh * stride - pad + kh;
            for (int64_t ow = 0; ow < Wd; ++ow) {
              const int64_t iw = ow * stride - pad + kw;
              dst[oh * Wd + ow] =
                  (ih >= 0 && ih < Hs && iw >= 0 && iw < Ws)
                      ? src[ih * Ws + iw]
                      : T(0);
            }
          }
        }
      }
    }
  }
}

template <class T>
void col2im(const T* col, int64_t B, int64_t C, int64_t Hs, int64_t Ws,
            int64_t k, int64_t stride, int64_t pad, int64_t Hd, int64_t Wd,
            T* X) {
  const int64_t cols = B * Hd * Wd;
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t b = 0; b < B; ++b) {
    for (int64_t c = 0; c < C; ++c) {
      T* dst = X + (b * C + c) * Hs * Ws;
      for (int64_t i = 0; i < Hs * Ws; ++i) dst[i] = T(0);
      for (int64_t kh = 0; kh < k; ++kh) {
        for (int64_t kw = 0; kw < k; ++kw) {
          const T* src = col + ((c * k + kh) * k + kw) * cols + b * Hd * Wd;
          for (int64_t oh = 0; oh < Hd; ++oh) {
            const int64_t ih = oh * stride - pad + kh;
            if (ih < 0 || ih >= Hs) continue;
            for (int64_t ow = 0; ow < Wd; ++ow) {
              const int64_t iw = ow * stride - pad + kw;
              if (iw < 0 || iw >= Ws) continue;
              dst[ih * Ws + iw] += src[oh * Wd + ow];
            }
          }
        }
      }
    }
  }
}

/// NCHW -> matrix [C][B*H*W] with column order (b, h, w).
template <class T>
void nchw_to_mat(const T* X, int64_t B, int64_t C, int64_t H, int64_t W,
                 T* M) {
  const int64_t hw = H * W;
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t b = 0; b < B; ++b) {
      const T* src = X + (b * C + c) * hw;
      T* dst = M + c * (B * hw) + b * hw;
      for (int64_t i = 0; i < hw; ++i) dst[i] = src[i];
    }
  }
}

template <class T>
void mat_to_nchw(const T* M, int64_t B, int64_t C, int64_t H, int64_t W,
                 T* X) {
  const int64_t hw = H * W;
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t b = 0; b < B; ++b) {
    for (int64_t c = 0; c < C; ++c) {
      const T* src = M + c * (B * hw) + b * hw;
      T* dst = X + (b * C + c) * hw;
      for (int64_t i = 0; i < hw; ++i) dst[i] = src[i];
    }
  }
}

inline int64_t conv_out_size(int64_t in, int64_t k, int64_t stride,
                             int64_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

inline int64_t convt_out_size(int64_t in, int64_t k, int64_t stride,
                              int64_t pad, int64_t outpad) {
  return (in - 1) * stride + k - 2 * pad + outpad;
}

/// Y[B,Co,Ho,Wo] = conv(X[B,Ci,H,W], W[Co,Ci,k,k]) + b
template <class T>
void conv2d_forward(const Tensor<T>& X, const Tensor<T>& W, const T* bias,
                    int64_t stride, int64_t pad, Tensor<T>& Y) {
  const int64_t B = X.shape[0], Ci = X.shape[1], H = X.shape[2],
                Wd = X.shape[3];
  const int64_t Co = W.shape[0], k = W.shape[2];
  const int64_t Ho = conv_out_size(H, k, stride, pad);
  const int64_t Wo = conv_out_size(Wd, k, stride, pad);
  Y = Tensor<T>({B, Co, Ho, Wo});
  const int64_t K = Ci * k * k, N = B * Ho * Wo;
  std::vector<T> col(static_cast<size_t>(K * N));
  im2col(X.data(), B, Ci, H, Wd, k, stride, pad, Ho, Wo, col.data());
  std::vector<T> ymat(static_cast<size_t>(Co * N));
  gemm_nn(Co, N, K, W.data(), col.data(), ymat.data(), false);
  mat_to_nchw(ymat.data(), B, Co, Ho, Wo, Y.data());
  if (bias) {
    const int64_t hw = Ho * Wo;
#pragma omp parallel for collapse(2) schedule(static)
    for (int64_t b = 0; b < B; ++b)
      for (int64_t c = 0; c < Co; ++c) {
        T* dst = Y.data() + (b * Co + c) * hw;
        const T bv = bias[c];
        for (int64_t i = 0; i < hw; ++i) dst[i] += bv;
      }
  }
}

/// dX = conv2d adjoint of dY w.r.t. the input.
template <class T>
void conv2d_dx(const Tensor<T>& dY, const Tensor<T>& W, int64_t stride,
               int64_t pad, int64_t H, int64_t Wd, Tensor<T>& dX) {
  const int64_t B = dY.shape[0], Co = dY.shape[1], Ho = dY.shape[2],
                Wo = dY.shape[3];
  const int64_t Ci = W.shape[1], k = W.shape[2];
  const int64_t K = Ci * k * k, N = B * Ho * Wo;
  std::vector<T> dymat(static_cast<size_t>(Co * N));
  nchw_to_mat(dY.data(), B, Co, Ho, Wo, dymat.data());
  std::vector<T> colg(static_cast<size_t>(K * N));
  gemm_tn(K, N, Co, W.data(), dymat.data(), colg.data(), false);
  dX = Tensor<T>({B, Ci, H, Wd});
  col2im(colg.data(), B, Ci, H, Wd, k, stride, pad, Ho, Wo, dX.data());
}

/// dW += wgrad(X, dY); db += channel sums of dY.
template <class T>
void conv2d_dw(const Tensor<T>& X, const Tensor<T>& dY, int64_t stride,
               int64_t pad, Tensor<T>& dW, T* db) {
  const int64_t B = X.shape[0], Ci = X.shape[1], H = X.shape[2],
                Wd = X.shape[3];
  const int64_t Co = dY.shape[1], Ho = dY.shape[2], Wo = dY.shape[3];
  const int64_t k = dW.shape[2];
  const int64_t K = Ci * k * k, N = B * Ho * Wo;
  std::vector<T> col(static_cast<size_t>(K * N));
  im2col(X.data(), B, Ci, H, Wd, k, stride, pad, Ho, Wo, col.data());
  std::vector<T> dymat(static_cast<size_t>(Co * N));
  nchw_to_mat(dY.data(), B, Co, Ho, Wo, dymat.data());
  gemm_nt(Co, K, N, dymat.data(), col.data(), dW.data(), true);
  if (db) {
#pragma omp parallel for schedule(static)
    for (int64_t c = 0; c < Co; ++c) {
      T acc = T(0);
      for (int64_t b = 0; b < B; ++b) {
        const T* src = dY.data() + (b * Co + c) * Ho * Wo;
        for (int64_t i = 0; i < Ho * Wo; ++i) acc += src[i];
      }
      db[c] += acc;
    }
  }
}

/// Y = convT(X[B,Ci,Hi,Wi], W[Ci,Co,k,k]) + b, the adjoint map of a conv with
/// (k, stride, pad) going from Y-space back to X-space.
template <class T>
void convt2d_forward(const Tensor<T>& X, const Tensor<T>& W, const T* bias,
                     int64_t stride, int64_t pad, int64_t outpad,
                     Tensor<T>& Y) {
  const int64_t B = X.shape[0], Ci = X.shape[1], Hi = X.shape[2],
                Wi = X.shape[3];
  const int64_t Co = W.shape[1], k = W.shape[2];
  const int64_t Ho = convt_out_size(Hi, k, stride, pad, outpad);
  const int64_t Wo = convt_out_size(Wi, k, stride, pad, outpad);
  const int64_t K = Co * k * k, N = B * Hi * Wi;
  std::vector<T> xmat(static_cast<size_t>(Ci * N));
  nchw_to_mat(X.data(), B, Ci, Hi, Wi, xmat.data());
  std::vector<T> col(static_cast<size_t>(K * N));
  gemm_tn(K, N, Ci, W.data(), xmat.data(), col.data(), false);
  Y = Tensor<T>({B, Co, Ho, Wo});
  col2im(col.data(), B, Co, Ho, Wo, k, stride, pad, Hi, Wi, Y.data());
  if (bias) {
    const int64_t hw = Ho * Wo;
#pragma omp parallel for collapse(2) schedule(static)
    for (int64_t b = 0; b < B; ++b)
      for (int64_t c = 0; c < Co; ++c) {
        T* dst = Y.data() + (b * Co + c) * hw;
        const T bv = bias[c];
        for (int64_t i = 0; i < hw; ++i) dst[i] += bv;
      }
  }
}

template <class T>
void convt2d_dx(const Tensor<T>& dY, const Tensor<T>& W, int64_t stride,
                int64_t pad, int64_t Hi, int64_t Wi, Tensor<T>& dX) {
  const int64_t B = dY.shape[0], Co = dY.shape[1], Ho = dY.shape[2],
                Wo = dY.shape[3];
  const int64_t Ci = W.shape[0], k = W.shape[2];
  const int64_t K = Co * k * k, N = B * Hi * Wi;
  std::vector<T> col(static_cast<size_t>(K * N));
  im2col(dY.data(), B, Co, Ho, Wo, k, stride, pad, Hi, Wi, col.data());
  std::vector<T> dxmat(static_cast<size_t>(Ci * N));
  gemm_nn(Ci, N, K, W.data(), col.data(), dxmat.data(), false);
  dX = Tensor<T>({B, Ci, Hi, Wi});
  mat_to_nchw(dxmat.data(), B, Ci, Hi, Wi, dX.data());
}

template <class T>
void convt2d_dw(const Tensor<T>& X, const Tensor<T>& dY, int64_t stride,
                int64_t pad, Tensor<T>& dW, T* db) {
  const int64_t B = X.shape[0], Ci = X.shape[1], Hi = X.shape[2],
                Wi = X.shape[3];
  const int64_t Co = dY.shape[1], Ho = dY.shape[2], Wo = dY.shape[3];
  const int64_t k = dW.shape[2];
  const int64_t K = Co * k * k, N = B * Hi * Wi;
  std::vector<T> col(static_cast<size_t>(K * N));
  im2col(dY.data(), B, Co, Ho, Wo, k, stride, pad, Hi, Wi, col.data());
  std::vector<T> xmat(static_cast<size_t>(Ci * N));
  nchw_to_mat(X.data(), B, Ci, Hi, Wi, xmat.data());
  gemm_nt(Ci, K, N, xmat.data(), col.data(), dW.data(), true);
  if (db) {
#pragma omp parallel for schedule(static)
    for (int64_t c = 0; c < Co; ++c) {
      T acc = T(0);
      for (int64_t b = 0; b < B; ++b) {
        const T* src = dY.data() + (b * Co + c) * Ho * Wo;
        for (int64_t i = 0; i < Ho * Wo; ++i) acc += src[i];
      }
      db[c] += acc;
    }
  }
}

// ---------------------------------------------------------------------------
// instance norm
// ---------------------------------------------------------------------------

template <class T>
void instance_norm_forward(const Tensor<T>& X, const T* gamma, const T* beta,
                           T eps, Tensor<T>& Y, Tensor<T>& mean,
                           Tensor<T>& invstd) {
  const int64_t B = X.shape[0], C = X.shape[1], hw = X.shape[2] * X.shape[3];
  Y = Tensor<T>(X.shape);
  mean = Tensor<T>({B, C});
  invstd = Tensor<T>({B, C});
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t b = 0; b < B; ++b) {
    for (int64_t c = 0; c < C; ++c) {
      const T* src = X.data() + (b * C + c) * hw;
      T mu = T(0);
      for (int64_t i = 0; i < hw; ++i) mu += src[i];
      mu /= static_cast<T>(hw);
      T var = T(0);
      for (int64_t i = 0; i < hw; ++i) {
        const T d = src[i] - mu;
        var += d * d;
      }
      var /= static_cast<T>(hw);
      const T is = T(1) / std::sqrt(var + eps);
      mean[b * C + c] = mu;
      invstd[b * C + c] = is;
      T* dst = Y.data() + (b * C + c) * hw;
      const T g = gamma[c], be = beta[c];
      for (int64_t i = 0; i < hw; ++i) dst[i] = g * (src[i] - mu) * is + be;
    }
  }
}

template <class T>
void instance_norm_backward(const Tensor<T>& X, const Tensor<T>& dY,
                            const T* gamma, const Tensor<T>& mean,
                            const Tensor<T>& invstd, Tensor<T>& dX, T* dgamma,
                            T* dbeta) {
  const int64_t B = X.shape[0], C = X.shape[1], hw = X.shape[2] * X.shape[3];
  dX = Tensor<T>(X.shape);
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t b = 0; b < B; ++b) {
    for (int64_t c = 0; c < C; ++c) {
      const T* x = X.data() + (b * C + c) * hw;
      const T* dy = dY.data() + (b * C + c) * hw;
      T* dx = dX.data() + (b * C + c) * hw;
      const T mu = mean[b * C + c], is = invstd[b * C + c];
      T sum_dy = T(0), sum_dy_xhat = T(0);
      for (int64_t i = 0; i < hw; ++i) {
        const T xhat = (x[i] - mu) * is;
        sum_dy += dy[i];
        sum_dy_xhat += dy[i] * xhat;
      }
      const T inv_n = T(1) / static_cast<T>(hw);
      const T g = gamma[c];
      for (int64_t i = 0; i < hw; ++i) {
        const T xhat = (x[i] - mu) * is;
        dx[i] = g * is *
                (dy[i] - sum_dy * inv_n - xhat * sum_dy_xhat * inv_n);
      }
    }
  }
  // parameter grads reduced per channel; batch loop stays inside one thread
#pragma omp parallel for schedule(static)
  for (int64_t c = 0; c < C; ++c) {
    T dg = T(0), db = T(0);
    for (int64_t b = 0; b < B; ++b) {
      const T* x = X.data() + (b * C + c) * hw;
      const T* dy = dY.data() + (b * C + c) * hw;
      const T mu = mean[b * C + c], is = invstd[b * C + c];
      for (int64_t i = 0; i < hw; ++i) {
        dg += dy[i] * (x[i] - mu) * is;
        db += dy[i];
      }
    }
    dgamma[c] += dg;
    dbeta[c] += db;
  }
}

// ---------------------------------------------------------------------------
// optimizer
// ---------------------------------------------------------------------------

template <class T>
void adam_step(T* theta, const T* grad, T* m, T* v, int64_t n, T lr, T beta1,
               T beta2, T eps, int64_t t) {
  const T bc1 = T(1) - std::pow(beta1, static_cast<T>(t));
  const T bc2 = T(1) - std::pow(beta2, static_cast<T>(t));
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (T(1) - beta1) * grad[i];
    v[i] = beta2 * v[i] + (T(1) - beta2) * grad[i] * grad[i];
    const T mhat = m[i] / bc1;
    const T vhat = v[i] / bc2;
    theta[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace matchgan::kernels

#endif  // MATCHGAN_KERNELS_HPP_
