#ifndef MATCHGAN_KERNELS_SERIAL_HPP_
#define MATCHGAN_KERNELS_SERIAL_HPP_

#include <cmath>
#include <cstdint>

#include "matchgan/tensor.hpp"

// Serial reference kernels: direct-loop implementations with no tiling, no
// im2col and no OpenMP. They define the semantics the kernels in
// matchgan/kernels.hpp are tested and benchmarked against.

namespace matchgan::serial {

template <class T>
void gemm_nn(int64_t M, int64_t N, int64_t K, const T* A, const T* B, T* C,
             bool accum) {
  for (int64_t m = 0; m < M; ++m)
    for (int64_t n = 0; n < N; ++n) {
      T acc = accum ? C[m * N + n] : T(0);
      for (int64_t k = 0; k < K; ++k) acc += A[m * K + k] * B[k * N + n];
      C[m * N + n] = acc;
    }
}

template <class T>
void conv2d_forward(const Tensor<T>& X, const Tensor<T>& W, const T* bias,
                    int64_t stride, int64_t pad, Tensor<T>& Y) {
  const int64_t B = X.shape[0], Ci = X.shape[1], H = X.shape[2],
                Wd = X.shape[3];
  const int64_t Co = W.shape[0], k = W.shape[2];
  const int64_t Ho = (H + 2 * pad - k) / stride + 1;
  const int64_t Wo = (Wd + 2 * pad - k) / stride + 1;
  Y = Tensor<T>({B, Co, Ho, Wo});
  for (int64_t b = 0; b < B; ++b)
    for (int64_t co = 0; co < Co; ++co)
      for (int64_t oh = 0; oh < Ho; ++oh)
        for (int64_t ow = 0; ow < Wo; ++ow) {
          T acc = bias ? bias[co] : T(0);
          for (int64_t ci = 0; ci < Ci; ++ci)
            for (int64_t kh = 0; kh < k; ++kh)
              for (int64_t kw = 0; kw < k; ++kw) {
                const int64_t ih = oh * stride - pad + kh;
                const int64_t iw = ow * stride - pad + kw;
                if (ih < 0 || ih >= H || iw < 0 || iw >= Wd) continue;
                acc += X.at(b, ci, ih, iw) * W.at(co, ci, kh, kw);
              }
          Y.at(b, co, oh, ow) = acc;
        }
}

template <class T>
void conv2d_dx(const Tensor<T>& dY, const Tensor<T>& W, int64_t stride,
               int64_t pad, int64_t H, int64_t Wd, Tensor<T>& dX) {
  const int64_t B = dY.shape[0], Co = dY.shape[1], Ho = dY.shape[2],
                Wo = dY.shape[3];
  const int64_t Ci = W.shape[1], k = W.shape[2];
  dX = Tensor<T>({B, Ci, H, Wd});
  for (int64_t b = 0; b < B; ++b)
    for (int64_t co = 0; co < Co; ++co)
      for (int64_t oh = 0; oh < Ho; ++oh)
        for (int64_t ow = 0; ow < Wo; ++ow) {
          const T g = dY.at(b, co, oh, ow);
          for (int64_t ci = 0; ci < Ci; ++ci)
            for (int64_t kh = 0; kh < k; ++kh)
              for (int64_t kw = 0; kw < k; ++kw) {
                const int64_t ih = oh * stride - pad + kh;
                const int64_t iw = ow * stride - pad + kw;
                if (ih < 0 || ih >= H || iw < 0 || iw >= Wd) continue;
                dX.at(b, ci, ih, iw) += g * W.at(co, ci, kh, kw);
              }
        }
}

template <class T>
void conv2d_dw(const Tensor<T>& X, const Tensor<T>& dY, int64_t stride,
               int64_t pad, Tensor<T>& dW, T* db) {
  const int64_t B = X.shape[0], Ci = X.shape[1], H = X.shape[2],
                Wd = X.shape[3];
  const int64_t Co = dY.shape[1], Ho = dY.shape[2], Wo = dY.shape[3];
  const int64_t k = dW.shape[2];
  for (int64_t b = 0; b < B; ++b)
    for (int64_t co = 0; co < Co; ++co)
      for (int64_t oh = 0; oh < Ho; ++oh)
        for (int64_t ow = 0; ow < Wo; ++ow) {
          const T g = dY.at(b, co, oh, ow);
          if (db) db[co] += g;
          for (int64_t ci = 0; ci < Ci; ++ci)
            for (int64_t kh = 0; kh < k; ++kh)
              for (int64_t kw = 0; kw < k; ++kw) {
                const int64_t ih = oh * stride - pad + kh;
                const int64_t iw = ow * stride - pad + kw;
                if (ih < 0 || ih >= H || iw < 0 || iw >= Wd) continue;
                dW.at(co, ci, kh, kw) += g * X.at(b, ci, ih, iw);
              }
        }
}

template <class T>
void convt2d_forward(const Tensor<T>& X, const Tensor<T>& W, const T* bias,
                     int64_t stride, int64_t pad, int64_t outpad,
                     Tensor<T>& Y) {
  const int64_t B = X.shape[0], Ci = X.shape[1], Hi = X.shape[2],
                Wi = X.shape[3];
  const int64_t Co = W.shape[1], k = W.shape[2];
  const int64_t Ho = (Hi - 1) * stride + k - 2 * pad + outpad;
  const int64_t Wo = (Wi - 1) * stride + k - 2 * pad + outpad;
  Y = Tensor<T>({B, Co, Ho, Wo});
  for (int64_t b = 0; b < B; ++b)
    for (int64_t ci = 0; ci < Ci; ++ci)
      for (int64_t ih = 0; ih < Hi; ++ih)
        for (int64_t iw = 0; iw < Wi; ++iw) {
          const T xv = X.at(b, ci, ih, iw);
          for (int64_t co = 0; co < Co; ++co)
            for (int64_t kh = 0; kh < k; ++kh)
              for (int64_t kw = 0; kw < k; ++kw) {
                const int64_t oh = ih * stride - pad + kh;
                const int64_t ow = iw * stride - pad + kw;
                if (oh < 0 || oh >= Ho || ow < 0 || ow >= Wo) continue;
                Y.at(b, co, oh, ow) += xv * W.at(ci, co, kh, kw);
              }
        }
  if (bias)
    for (int64_t b = 0; b < B; ++b)
      for (int64_t co = 0; co < Co; ++co)
        for (int64_t i = 0; i < Ho * Wo; ++i)
          Y.data()[(b * Co + co) * Ho * Wo + i] += bias[co];
}

template <class T>
void instance_norm_forward(const Tensor<T>& X, const T* gamma, const T* beta,
                           T eps, Tensor<T>& Y) {
  const int64_t B = X.shape[0], C = X.shape[1], hw = X.shape[2] * X.shape[3];
  Y = Tensor<T>(X.shape);
  for (int64_t b = 0; b < B; ++b)
    for (int64_t c = 0; c < C; ++c) {
      const T* src = X.data() + (b * C + c) * hw;
      T mu = T(0);
      for (int64_t i = 0; i < hw; ++i) mu += src[i];
      mu /= static_cast<T>(hw);
      T var = T(0);
      for (int64_t i = 0; i < hw; ++i) var += (src[i] - mu) * (src[i] - mu);
      var /= static_cast<T>(hw);
      const T is = T(1) / std::sqrt(var + eps);
      T* dst = Y.data() + (b * C + c) * hw;
      for (int64_t i = 0; i < hw; ++i)
        dst[i] = gamma[c] * (src[i] - mu) * is + beta[c];
    }
}

}  // namespace matchgan::serial

#endif  // MATCHGAN_KERNELS_SERIAL_HPP_
