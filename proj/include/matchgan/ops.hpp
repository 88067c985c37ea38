#ifndef MATCHGAN_OPS_HPP_
#define MATCHGAN_OPS_HPP_

#include <cmath>
#include <memory>
#include <vector>

#include "matchgan/graph.hpp"
#include "matchgan/kernels.hpp"

// Autodiff ops over Graph<T>. Forward math runs eagerly through the kernels;
// each op records a closure that pulls the node's gradient and pushes into its
// parents.

namespace matchgan::ops {

constexpr VarId kNoVar = -1;

template <class T>
VarId conv2d(Graph<T>& g, VarId x, VarId w, VarId b, int64_t stride,
             int64_t pad) {
  const Tensor<T>& X = g.val(x);
  const Tensor<T>& W = g.val(w);
  require(X.ndim() == 4 && W.ndim() == 4 && X.shape[1] == W.shape[1],
          ErrorKind::ShapeMismatch, "conv2d: bad input/weight shapes");
  Tensor<T> Y;
  kernels::conv2d_forward(X, W, b == kNoVar ? nullptr : g.val(b).data(),
                          stride, pad, Y);
  bool needs = g.needs(x) || g.needs(w) || (b != kNoVar && g.needs(b));
  const int64_t H = X.shape[2], Wd = X.shape[3];
  VarId out = g.add(std::move(Y), needs);
  g.set_back(out, [&g, out, x, w, b, stride, pad, H, Wd]() {
    const Tensor<T>& dY = g.grad(out);
    if (g.needs(x)) {
      Tensor<T> dX;
      kernels::conv2d_dx(dY, g.val(w), stride, pad, H, Wd, dX);
      g.accum(x, dX);
    }
    if (g.needs(w) || (b != kNoVar && g.needs(b))) {
      T* db = (b != kNoVar && g.needs(b)) ? g.grad(b).data() : nullptr;
      kernels::conv2d_dw(g.val(x), dY, stride, pad, g.grad(w), db);
    }
  });
  return out;
}

template <class T>
VarId convt2d(Graph<T>& g, VarId x, VarId w, VarId b, int64_t stride,
              int64_t pad, int64_t outpad) {
  const Tensor<T>& X = g.val(x);
  const Tensor<T>& W = g.val(w);
  require(X.ndim() == 4 && W.ndim() == 4 && X.shape[1] == W.shape[0],
          ErrorKind::ShapeMismatch, "convt2d: bad input/weight shapes");
  Tensor<T> Y;
  kernels::convt2d_forward(X, W, b == kNoVar ? nullptr : g.val(b).data(),
                           stride, pad, outpad, Y);
  bool needs = g.needs(x) || g.needs(w) || (b != kNoVar && g.needs(b));
  const int64_t Hi = X.shape[2], Wi = X.shape[3];
  VarId out = g.add(std::move(Y), needs);
  g.set_back(out, [&g, out, x, w, b, stride, pad, Hi, Wi]() {
    const Tensor<T>& dY = g.grad(out);
    if (g.needs(x)) {
      Tensor<T> dX;
      kernels::convt2d_dx(dY, g.val(w), stride, pad, Hi, Wi, dX);
      g.accum(x, dX);
    }
    if (g.needs(w) || (b != kNoVar && g.needs(b))) {
      T* db = (b != kNoVar && g.needs(b)) ? g.grad(b).data() : nullptr;
      kernels::convt2d_dw(g.val(x), dY, stride, pad, g.grad(w), db);
    }
  });
  return out;
}

/// Value: gradient of a conv w.r.t. its input, given the output gradient dy.
/// Used to spell out a discriminator backward pass as graph nodes so the
/// gradient-penalty term can itself be differentiated (the map is bilinear in
/// (dy, W): d/d(dy) is the forward conv, d/dW a weight-grad with swapped
/// roles).
template <class T>
VarId conv2d_input_grad(Graph<T>& g, VarId dy, VarId w, int64_t stride,
                        int64_t pad, int64_t Hin, int64_t Win) {
  Tensor<T> dX;
  kernels::conv2d_dx(g.val(dy), g.val(w), stride, pad, Hin, Win, dX);
  bool needs = g.needs(dy) || g.needs(w);
  VarId out = g.add(std::move(dX), needs);
  g.set_back(out, [&g, out, dy, w, stride, pad]() {
    const Tensor<T>& U = g.grad(out);
    if (g.needs(dy)) {
      Tensor<T> ddy;
      kernels::conv2d_forward(U, g.val(w), static_cast<const T*>(nullptr),
                              stride, pad, ddy);
      g.accum(dy, ddy);
    }
    if (g.needs(w)) {
      kernels::conv2d_dw(U, g.val(dy), stride, pad, g.grad(w),
                         static_cast<T*>(nullptr));
    }
  });
  return out;
}

template <class T>
VarId instance_norm(Graph<T>& g, VarId x, VarId gamma, VarId beta,
                    T eps = T(1e-5)) {
  Tensor<T> Y, mean, invstd;
  kernels::instance_norm_forward(g.val(x), g.val(gamma).data(),
                                 g.val(beta).data(), eps, Y, mean, invstd);
  bool needs = g.needs(x) || g.needs(gamma) || g.needs(beta);
  VarId out = g.add(std::move(Y), needs);
  auto saved = std::make_shared<std::pair<Tensor<T>, Tensor<T>>>(
      std::move(mean), std::move(invstd));
  g.set_back(out, [&g, out, x, gamma, beta, saved]() {
    Tensor<T> dX;
    kernels::instance_norm_backward(g.val(x), g.grad(out),
                                    g.val(gamma).data(), saved->first,
                                    saved->second, dX, g.grad(gamma).data(),
                                    g.grad(beta).data());
    if (g.needs(x)) g.accum(x, dX);
  });
  return out;
}

template <class T>
VarId leaky_relu(Graph<T>& g, VarId x, T slope) {
  const Tensor<T>& X = g.val(x);
  Tensor<T> Y(X.shape);
  const int64_t n = X.numel();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i)
    Y[i] = X[i] > T(0) ? X[i] : slope * X[i];
  VarId out = g.add(std::move(Y), g.needs(x));
  g.set_back(out, [&g, out, x, slope]() {
    const Tensor<T>& X2 = g.val(x);
    const Tensor<T>& dY = g.grad(out);
    Tensor<T> dX(X2.shape);
    const int64_t m = X2.numel();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i)
      dX[i] = X2[i] > T(0) ? dY[i] : slope * dY[i];
    g.accum(x, dX);
  });
  return out;
}

template <class T>
VarId relu(Graph<T>& g, VarId x) {
  return leaky_relu(g, x, T(0));
}

template <class T>
VarId tanh_(Graph<T>& g, VarId x) {
  const Tensor<T>& X = g.val(x);
  Tensor<T> Y(X.shape);
  const int64_t n = X.numel();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) Y[i] = std::tanh(X[i]);
  VarId out = g.add(std::move(Y), g.needs(x));
  g.set_back(out, [&g, out, x]() {
    const Tensor<T>& Y2 = g.val(out);
    const Tensor<T>& dY = g.grad(out);
    Tensor<T> dX(Y2.shape);
    const int64_t m = Y2.numel();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i) dX[i] = dY[i] * (T(1) - Y2[i] * Y2[i]);
    g.accum(x, dX);
  });
  return out;
}

/// Elementwise multiply by a constant tensor (e.g. a leaky-relu mask).
template <class T>
VarId mul_const(Graph<T>& g, VarId x, Tensor<T> mask) {
  const Tensor<T>& X = g.val(x);
  check_same_shape(X, mask, "mul_const");
  Tensor<T> Y(X.shape);
  const int64_t n = X.numel();
  for (int64_t i = 0; i < n; ++i) Y[i] = X[i] * mask[i];
  auto saved = std::make_shared<Tensor<T>>(std::move(mask));
  VarId out = g.add(std::move(Y), g.needs(x));
  g.set_back(out, [&g, out, x, saved]() {
    const Tensor<T>& dY = g.grad(out);
    Tensor<T> dX(dY.shape);
    const int64_t m = dY.numel();
    for (int64_t i = 0; i < m; ++i) dX[i] = dY[i] * (*saved)[i];
    g.accum(x, dX);
  });
  return out;
}

namespace detail {

template <class T, class FwdFn, class BwdFn>
VarId binary_ew(Graph<T>& g, VarId a, VarId b, FwdFn fwd, BwdFn bwd,
                const char* name) {
  const Tensor<T>& A = g.val(a);
  const Tensor<T>& B = g.val(b);
  check_same_shape(A, B, name);
  Tensor<T> Y(A.shape);
  const int64_t n = A.numel();
  for (int64_t i = 0; i < n; ++i) Y[i] = fwd(A[i], B[i]);
  VarId out = g.add(std::move(Y), g.needs(a) || g.needs(b));
  g.set_back(out, [&g, out, a, b, bwd]() {
    const Tensor<T>& dY = g.grad(out);
    const Tensor<T>& A2 = g.val(a);
    const Tensor<T>& B2 = g.val(b);
    Tensor<T> dA(A2.shape), dB(B2.shape);
    const int64_t m = dY.numel();
    for (int64_t i = 0; i < m; ++i) bwd(A2[i], B2[i], dY[i], dA[i], dB[i]);
    g.accum(a, dA);
    g.accum(b, dB);
  });
  return out;
}

}  // namespace detail

template <class T>
VarId add(Graph<T>& g, VarId a, VarId b) {
  return detail::binary_ew(
      g, a, b, [](T x, T y) { return x + y; },
      [](T, T, T dy, T& da, T& db) {
        da = dy;
        db = dy;
      },
      "add");
}

template <class T>
VarId sub(Graph<T>& g, VarId a, VarId b) {
  return detail::binary_ew(
      g, a, b, [](T x, T y) { return x - y; },
      [](T, T, T dy, T& da, T& db) {
        da = dy;
        db = -dy;
      },
      "sub");
}

template <class T>
VarId mul(Graph<T>& g, VarId a, VarId b) {
  return detail::binary_ew(
      g, a, b, [](T x, T y) { return x * y; },
      [](T x, T y, T dy, T& da, T& db) {
        da = dy * y;
        db = dy * x;
      },
      "mul");
}

namespace detail {

template <class T, class FwdFn, class BwdFn>
VarId unary_ew(Graph<T>& g, VarId x, FwdFn fwd, BwdFn bwd) {
  const Tensor<T>& X = g.val(x);
  Tensor<T> Y(X.shape);
  const int64_t n = X.numel();
  for (int64_t i = 0; i < n; ++i) Y[i] = fwd(X[i]);
  VarId out = g.add(std::move(Y), g.needs(x));
  g.set_back(out, [&g, out, x, bwd]() {
    const Tensor<T>& X2 = g.val(x);
    const Tensor<T>& dY = g.grad(out);
    Tensor<T> dX(X2.shape);
    const int64_t m = X2.numel();
    for (int64_t i = 0; i < m; ++i) dX[i] = bwd(X2[i], dY[i]);
    g.accum(x, dX);
  });
  return out;
}

}  // namespace detail

template <class T>
VarId scale(Graph<T>& g, VarId x, T c) {
  return detail::unary_ew(
      g, x, [c](T v) { return c * v; }, [c](T, T dy) { return c * dy; });
}

template <class T>
VarId add_scalar(Graph<T>& g, VarId x, T c) {
  return detail::unary_ew(
      g, x, [c](T v) { return v + c; }, [](T, T dy) { return dy; });
}

template <class T>
VarId square(Graph<T>& g, VarId x) {
  return detail::unary_ew(
      g, x, [](T v) { return v * v; },
      [](T v, T dy) { return T(2) * v * dy; });
}

template <class T>
VarId sqrt_(Graph<T>& g, VarId x) {
  return detail::unary_ew(
      g, x, [](T v) { return std::sqrt(v); },
      [](T v, T dy) { return dy / (T(2) * std::sqrt(v)); });
}

template <class T>
VarId log_(Graph<T>& g, VarId x) {
  return detail::unary_ew(
      g, x, [](T v) { return std::log(v); },
      [](T v, T dy) { return dy / v; });
}

template <class T>
VarId clamp(Graph<T>& g, VarId x, T lo, T hi) {
  return detail::unary_ew(
      g, x,
      [lo, hi](T v) { return v < lo ? lo : (v > hi ? hi : v); },
      [lo, hi](T v, T dy) { return (v >= lo && v <= hi) ? dy : T(0); });
}

template <class T>
VarId concat_ch(Graph<T>& g, VarId a, VarId b) {
  const Tensor<T>& A = g.val(a);
  const Tensor<T>& B = g.val(b);
  require(A.ndim() == 4 && B.ndim() == 4 && A.shape[0] == B.shape[0] &&
              A.shape[2] == B.shape[2] && A.shape[3] == B.shape[3],
          ErrorKind::ShapeMismatch, "concat_ch");
  const int64_t Bn = A.shape[0], Ca = A.shape[1], Cb = B.shape[1],
                hw = A.shape[2] * A.shape[3];
  Tensor<T> Y({Bn, Ca + Cb, A.shape[2], A.shape[3]});
  for (int64_t n = 0; n < Bn; ++n) {
    std::copy(A.data() + n * Ca * hw, A.data() + (n + 1) * Ca * hw,
              Y.data() + n * (Ca + Cb) * hw);
    std::copy(B.data() + n * Cb * hw, B.data() + (n + 1) * Cb * hw,
              Y.data() + n * (Ca + Cb) * hw + Ca * hw);
  }
  VarId out = g.add(std::move(Y), g.needs(a) || g.needs(b));
  g.set_back(out, [&g, out, a, b, Bn, Ca, Cb, hw]() {
    const Tensor<T>& dY = g.grad(out);
    Tensor<T> dA(g.val(a).shape), dB(g.val(b).shape);
    for (int64_t n = 0; n < Bn; ++n) {
      std::copy(dY.data() + n * (Ca + Cb) * hw,
                dY.data() + n * (Ca + Cb) * hw + Ca * hw,
                dA.data() + n * Ca * hw);
      std::copy(dY.data() + n * (Ca + Cb) * hw + Ca * hw,
                dY.data() + (n + 1) * (Ca + Cb) * hw,
                dB.data() + n * Cb * hw);
    }
    g.accum(a, dA);
    g.accum(b, dB);
  });
  return out;
}

/// Select rows along the batch axis; backward scatter-adds (an index may
/// repeat, e.g. an anchor reused across triplets).
template <class T>
VarId gather_batch(Graph<T>& g, VarId x, std::vector<int64_t> idx) {
  const Tensor<T>& X = g.val(x);
  const int64_t stride = X.numel() / X.shape[0];
  Shape yshape = X.shape;
  yshape[0] = static_cast<int64_t>(idx.size());
  Tensor<T> Y(yshape);
  for (size_t i = 0; i < idx.size(); ++i)
    std::copy(X.data() + idx[i] * stride, X.data() + (idx[i] + 1) * stride,
              Y.data() + static_cast<int64_t>(i) * stride);
  auto saved = std::make_shared<std::vector<int64_t>>(std::move(idx));
  VarId out = g.add(std::move(Y), g.needs(x));
  g.set_back(out, [&g, out, x, saved, stride]() {
    const Tensor<T>& dY = g.grad(out);
    Tensor<T> dX(g.val(x).shape);
    for (size_t i = 0; i < saved->size(); ++i) {
      const T* src = dY.data() + static_cast<int64_t>(i) * stride;
      T* dst = dX.data() + (*saved)[i] * stride;
      for (int64_t j = 0; j < stride; ++j) dst[j] += src[j];
    }
    g.accum(x, dX);
  });
  return out;
}

/// Replicates a tensor across a new leading batch axis.
template <class T>
VarId broadcast_batch(Graph<T>& g, VarId w, int64_t B) {
  const Tensor<T>& W = g.val(w);
  Shape yshape;
  yshape.push_back(B);
  for (auto d : W.shape) yshape.push_back(d);
  Tensor<T> Y(yshape);
  const int64_t stride = W.numel();
  for (int64_t b = 0; b < B; ++b)
    std::copy(W.data(), W.data() + stride, Y.data() + b * stride);
  VarId out = g.add(std::move(Y), g.needs(w));
  g.set_back(out, [&g, out, w, B, stride]() {
    const Tensor<T>& dY = g.grad(out);
    Tensor<T> dW(g.val(w).shape);
    for (int64_t b = 0; b < B; ++b) {
      const T* src = dY.data() + b * stride;
      for (int64_t j = 0; j < stride; ++j) dW[j] += src[j];
    }
    g.accum(w, dW);
  });
  return out;
}

template <class T>
VarId reshape(Graph<T>& g, VarId x, Shape s) {
  const Tensor<T>& X = g.val(x);
  require(shape_numel(s) == X.numel(), ErrorKind::ShapeMismatch, "reshape");
  Tensor<T> Y = X;
  Y.shape = s;
  VarId out = g.add(std::move(Y), g.needs(x));
  g.set_back(out, [&g, out, x]() {
    Tensor<T> dX = g.grad(out);
    dX.shape = g.val(x).shape;
    g.accum(x, dX);
  });
  return out;
}

/// Mean over all non-batch axes -> [B].
template <class T>
VarId mean_per_sample(Graph<T>& g, VarId x) {
  const Tensor<T>& X = g.val(x);
  const int64_t B = X.shape[0], stride = X.numel() / B;
  Tensor<T> Y({B});
  for (int64_t b = 0; b < B; ++b) {
    T acc = T(0);
    const T* src = X.data() + b * stride;
    for (int64_t i = 0; i < stride; ++i) acc += src[i];
    Y[b] = acc / static_cast<T>(stride);
  }
  VarId out = g.add(std::move(Y), g.needs(x));
  g.set_back(out, [&g, out, x, B, stride]() {
    const Tensor<T>& dY = g.grad(out);
    Tensor<T> dX(g.val(x).shape);
    for (int64_t b = 0; b < B; ++b) {
      const T gv = dY[b] / static_cast<T>(stride);
      T* dst = dX.data() + b * stride;
      for (int64_t i = 0; i < stride; ++i) dst[i] = gv;
    }
    g.accum(x, dX);
  });
  return out;
}

template <class T>
VarId sum_per_sample(Graph<T>& g, VarId x) {
  const Tensor<T>& X = g.val(x);
  const int64_t B = X.shape[0], stride = X.numel() / B;
  Tensor<T> Y({B});
  for (int64_t b = 0; b < B; ++b) {
    T acc = T(0);
    const T* src = X.data() + b * stride;
    for (int64_t i = 0; i < stride; ++i) acc += src[i];
    Y[b] = acc;
  }
  VarId out = g.add(std::move(Y), g.needs(x));
  g.set_back(out, [&g, out, x, B, stride]() {
    const Tensor<T>& dY = g.grad(out);
    Tensor<T> dX(g.val(x).shape);
    for (int64_t b = 0; b < B; ++b) {
      T* dst = dX.data() + b * stride;
      for (int64_t i = 0; i < stride; ++i) dst[i] = dY[b];
    }
    g.accum(x, dX);
  });
  return out;
}

/// Sum of squares per sample -> [B]; the building block of the
/// gradient-penalty norm.
template <class T>
VarId sumsq_per_sample(Graph<T>& g, VarId x) {
  const Tensor<T>& X = g.val(x);
  const int64_t B = X.shape[0], stride = X.numel() / B;
  Tensor<T> Y({B});
  for (int64_t b = 0; b < B; ++b) {
    T acc = T(0);
    const T* src = X.data() + b * stride;
    for (int64_t i = 0; i < stride; ++i) acc += src[i] * src[i];
    Y[b] = acc;
  }
  VarId out = g.add(std::move(Y), g.needs(x));
  g.set_back(out, [&g, out, x, B, stride]() {
    const Tensor<T>& dY = g.grad(out);
    const Tensor<T>& X2 = g.val(x);
    Tensor<T> dX(X2.shape);
    for (int64_t b = 0; b < B; ++b) {
      const T gv = T(2) * dY[b];
      const T* src = X2.data() + b * stride;
      T* dst = dX.data() + b * stride;
      for (int64_t i = 0; i < stride; ++i) dst[i] = gv * src[i];
    }
    g.accum(x, dX);
  });
  return out;
}

template <class T>
VarId mean_all(Graph<T>& g, VarId x) {
  const Tensor<T>& X = g.val(x);
  const int64_t n = X.numel();
  T acc = T(0);
  for (int64_t i = 0; i < n; ++i) acc += X[i];
  Tensor<T> Y = Tensor<T>::scalar(acc / static_cast<T>(n));
  VarId out = g.add(std::move(Y), g.needs(x));
  g.set_back(out, [&g, out, x, n]() {
    const T gv = g.grad(out)[0] / static_cast<T>(n);
    Tensor<T> dX(g.val(x).shape, gv);
    g.accum(x, dX);
  });
  return out;
}

/// Mean L1 distance between two tensors -> scalar.
template <class T>
VarId l1_mean(Graph<T>& g, VarId a, VarId b) {
  const Tensor<T>& A = g.val(a);
  const Tensor<T>& B = g.val(b);
  check_same_shape(A, B, "l1_mean");
  const int64_t n = A.numel();
  T acc = T(0);
  for (int64_t i = 0; i < n; ++i) acc += std::abs(A[i] - B[i]);
  VarId out =
      g.add(Tensor<T>::scalar(acc / static_cast<T>(n)), g.needs(a) || g.needs(b));
  g.set_back(out, [&g, out, a, b, n]() {
    const T gv = g.grad(out)[0] / static_cast<T>(n);
    const Tensor<T>& A2 = g.val(a);
    const Tensor<T>& B2 = g.val(b);
    Tensor<T> dA(A2.shape), dB(B2.shape);
    for (int64_t i = 0; i < n; ++i) {
      const T d = A2[i] - B2[i];
      const T s = d > T(0) ? gv : (d < T(0) ? -gv : T(0));
      dA[i] = s;
      dB[i] = -s;
    }
    g.accum(a, dA);
    g.accum(b, dB);
  });
  return out;
}

/// Mean over the spatial axes only: [B,C,h,w] -> [B,C,1,1].
template <class T>
VarId mean_hw(Graph<T>& g, VarId x) {
  const Tensor<T>& X = g.val(x);
  require(X.ndim() == 4, ErrorKind::ShapeMismatch, "mean_hw");
  const int64_t B = X.shape[0], C = X.shape[1], hw = X.shape[2] * X.shape[3];
  Tensor<T> Y({B, C, 1, 1});
  for (int64_t bc = 0; bc < B * C; ++bc) {
    T acc = T(0);
    const T* src = X.data() + bc * hw;
    for (int64_t i = 0; i < hw; ++i) acc += src[i];
    Y[bc] = acc / static_cast<T>(hw);
  }
  VarId out = g.add(std::move(Y), g.needs(x));
  g.set_back(out, [&g, out, x, B, C, hw]() {
    const Tensor<T>& dY = g.grad(out);
    Tensor<T> dX(g.val(x).shape);
    for (int64_t bc = 0; bc < B * C; ++bc) {
      const T gv = dY[bc] / static_cast<T>(hw);
      T* dst = dX.data() + bc * hw;
      for (int64_t i = 0; i < hw; ++i) dst[i] = gv;
    }
    g.accum(x, dX);
  });
  return out;
}

/// P(channel 0) of a 2-channel softmax, shape [N,2,1,1] or [N,2] -> [N].
template <class T>
VarId softmax2_p0(Graph<T>& g, VarId logits) {
  const Tensor<T>& Z = g.val(logits);
  const int64_t N = Z.shape[0];
  require(Z.numel() == 2 * N, ErrorKind::ShapeMismatch, "softmax2_p0");
  Tensor<T> Y({N});
  for (int64_t i = 0; i < N; ++i) {
    const T z0 = Z[2 * i], z1 = Z[2 * i + 1];
    const T m = std::max(z0, z1);
    const T e0 = std::exp(z0 - m), e1 = std::exp(z1 - m);
    Y[i] = e0 / (e0 + e1);
  }
  VarId out = g.add(std::move(Y), g.needs(logits));
  g.set_back(out, [&g, out, logits, N]() {
    const Tensor<T>& dY = g.grad(out);
    const Tensor<T>& P = g.val(out);
    Tensor<T> dZ(g.val(logits).shape);
    for (int64_t i = 0; i < N; ++i) {
      const T gv = dY[i] * P[i] * (T(1) - P[i]);
      dZ[2 * i] = gv;
      dZ[2 * i + 1] = -gv;
    }
    g.accum(logits, dZ);
  });
  return out;
}

/// Sigmoid cross-entropy with logits against constant {0,1} targets, summed
/// over attributes, averaged over the batch.
template <class T>
VarId bce_logits_mean(Graph<T>& g, VarId logits, Tensor<T> targets) {
  const Tensor<T>& Z = g.val(logits);
  check_same_shape(Z, targets, "bce_logits_mean");
  const int64_t B = Z.shape[0], n = Z.numel();
  auto softplus = [](T z) {
    return z > T(0) ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  };
  T acc = T(0);
  for (int64_t i = 0; i < n; ++i) acc += softplus(Z[i]) - targets[i] * Z[i];
  auto saved = std::make_shared<Tensor<T>>(std::move(targets));
  VarId out =
      g.add(Tensor<T>::scalar(acc / static_cast<T>(B)), g.needs(logits));
  g.set_back(out, [&g, out, logits, saved, B, n]() {
    const T gv = g.grad(out)[0] / static_cast<T>(B);
    const Tensor<T>& Z2 = g.val(logits);
    Tensor<T> dZ(Z2.shape);
    for (int64_t i = 0; i < n; ++i) {
      const T p = T(1) / (T(1) + std::exp(-Z2[i]));
      dZ[i] = gv * (p - (*saved)[i]);
    }
    g.accum(logits, dZ);
  });
  return out;
}

/// Softmax cross-entropy with logits against constant class indices, averaged
/// over the batch.
template <class T>
VarId softmax_ce_mean(Graph<T>& g, VarId logits,
                      std::vector<int64_t> labels) {
  const Tensor<T>& Z = g.val(logits);
  const int64_t B = Z.shape[0], C = Z.numel() / B;
  require(static_cast<int64_t>(labels.size()) == B, ErrorKind::ShapeMismatch,
          "softmax_ce_mean: label count");
  T acc = T(0);
  for (int64_t b = 0; b < B; ++b) {
    const T* z = Z.data() + b * C;
    T m = z[0];
    for (int64_t c = 1; c < C; ++c) m = std::max(m, z[c]);
    T lse = T(0);
    for (int64_t c = 0; c < C; ++c) lse += std::exp(z[c] - m);
    acc += m + std::log(lse) - z[labels[static_cast<size_t>(b)]];
  }
  auto saved = std::make_shared<std::vector<int64_t>>(std::move(labels));
  VarId out =
      g.add(Tensor<T>::scalar(acc / static_cast<T>(B)), g.needs(logits));
  g.set_back(out, [&g, out, logits, saved, B, C]() {
    const T gv = g.grad(out)[0] / static_cast<T>(B);
    const Tensor<T>& Z2 = g.val(logits);
    Tensor<T> dZ(Z2.shape);
    for (int64_t b = 0; b < B; ++b) {
      const T* z = Z2.data() + b * C;
      T m = z[0];
      for (int64_t c = 1; c < C; ++c) m = std::max(m, z[c]);
      T lse = T(0);
      for (int64_t c = 0; c < C; ++c) lse += std::exp(z[c] - m);
      T* dz = dZ.data() + b * C;
      for (int64_t c = 0; c < C; ++c)
        dz[c] = gv * (std::exp(z[c] - m) / lse -
                      (c == (*saved)[static_cast<size_t>(b)] ? T(1) : T(0)));
    }
    g.accum(logits, dZ);
  });
  return out;
}

}  // namespace matchgan::ops

#endif  // MATCHGAN_OPS_HPP_
