#ifndef MATCHGAN_OPTIM_HPP_
#define MATCHGAN_OPTIM_HPP_

#include <cstdint>
#include <vector>

#include "matchgan/graph.hpp"
#include "matchgan/kernels.hpp"

namespace matchgan {

template <class T>
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Param<T>*> params, T beta1, T beta2, T eps = T(1e-8))
      : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (auto* p : params_) {
      m_.emplace_back(p->value.shape);
      v_.emplace_back(p->value.shape);
    }
  }

  void step(T lr) {
    ++t_;
    for (size_t i = 0; i < params_.size(); ++i) {
      Param<T>& p = *params_[i];
      kernels::adam_step(p.value.data(), p.grad.data(), m_[i].data(),
                         v_[i].data(), p.numel(), lr, beta1_, beta2_, eps_,
                         t_);
    }
  }

  int64_t t() const { return t_; }
  void set_t(int64_t t) { t_ = t; }
  std::vector<Tensor<T>>& m() { return m_; }
  std::vector<Tensor<T>>& v() { return v_; }
  const std::vector<Param<T>*>& params() const { return params_; }

 private:
  std::vector<Param<T>*> params_;
  std::vector<Tensor<T>> m_, v_;
  T beta1_ = T(0.5), beta2_ = T(0.999), eps_ = T(1e-8);
  int64_t t_ = 0;
};

}  // namespace matchgan

#endif  // MATCHGAN_OPTIM_HPP_
