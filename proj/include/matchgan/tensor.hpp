#ifndef MATCHGAN_TENSOR_HPP_
#define MATCHGAN_TENSOR_HPP_

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <vector>

#include "matchgan/common.hpp"

namespace matchgan {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

/// Dense row-major tensor. Plain value type; all math lives in the kernels.
template <class T>
struct Tensor {
  Shape shape;
  std::vector<T> v;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(std::move(s)), v(shape_numel(shape), T(0)) {}
  Tensor(Shape s, T fill) : shape(std::move(s)), v(shape_numel(shape), fill) {}

  static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
  static Tensor full(Shape s, T x) { return Tensor(std::move(s), x); }
  static Tensor scalar(T x) { return Tensor(Shape{1}, x); }

  int64_t numel() const { return static_cast<int64_t>(v.size()); }
  int64_t dim(size_t i) const { return shape[i]; }
  size_t ndim() const { return shape.size(); }
  T* data() { return v.data(); }
  const T* data() const { return v.data(); }

  T& operator[](int64_t i) { return v[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return v[static_cast<size_t>(i)]; }

  // 4-d accessor for NCHW tensors.
  T& at(int64_t b, int64_t c, int64_t h, int64_t w) {
    return v[((b * shape[1] + c) * shape[2] + h) * shape[3] + w];
  }
  const T& at(int64_t b, int64_t c, int64_t h, int64_t w) const {
    return v[((b * shape[1] + c) * shape[2] + h) * shape[3] + w];
  }

  // 3-d accessor for CHW image tensors.
  T& at3(int64_t c, int64_t h, int64_t w) {
    return v[(c * shape[1] + h) * shape[2] + w];
  }
  const T& at3(int64_t c, int64_t h, int64_t w) const {
    return v[(c * shape[1] + h) * shape[2] + w];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.v.resize(v.size());
    for (size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
    return out;
  }
};

template <class T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b,
                      const char* where) {
  require(a.shape == b.shape, ErrorKind::ShapeMismatch,
          std::string(where) + ": " + shape_str(a.shape) + " vs " +
              shape_str(b.shape));
}

}  // namespace matchgan

#endif  // MATCHGAN_TENSOR_HPP_
