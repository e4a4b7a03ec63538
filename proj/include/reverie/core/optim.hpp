// Adam with global gradient-norm clipping.
#pragma once

#include "reverie/core/graph.hpp"

#include <cmath>
#include <vector>

namespace reverie {

template <class T>
class Adam {
 public:
  Adam() = default;
  Adam(ParamMap<T> params, double lr, double clip_norm = 100.0, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-7)
      : params_(std::move(params)),
        lr_(lr),
        clip_norm_(clip_norm),
        beta1_(beta1),
        beta2_(beta2),
        eps_(eps) {
    m_.reserve(params_.items.size());
    v_.reserve(params_.items.size());
    for (auto& [_, p] : params_.items) {
      m_.push_back(Mat<T>::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Mat<T>::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void zero_grad() {
    for (auto& [_, p] : params_.items) p->zero_grad();
  }

  // Applies one update from the accumulated gradients. `lr_scale` supports
  // warm-up schedules. Returns the pre-clip global gradient norm.
  double step(double lr_scale = 1.0) {
    double sq = 0;
    for (auto& [_, p] : params_.items) {
      if (p->grad.size() == 0) p->zero_grad();
      sq += static_cast<double>(p->grad.template cast<double>().squaredNorm());
    }
    const double norm = std::sqrt(sq);
    const double clip = (clip_norm_ > 0 && norm > clip_norm_) ? clip_norm_ / norm : 1.0;
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    const T alpha = static_cast<T>(lr_ * lr_scale * std::sqrt(bc2) / bc1);
    for (size_t i = 0; i < params_.items.size(); ++i) {
      Param<T>& p = *params_.items[i].second;
      Mat<T> grad = p.grad * static_cast<T>(clip);
      m_[i] = static_cast<T>(beta1_) * m_[i] + static_cast<T>(1 - beta1_) * grad;
      v_[i] = (static_cast<T>(beta2_) * v_[i].array() +
               static_cast<T>(1 - beta2_) * grad.array().square())
                  .matrix();
      p.value.array() -=
          alpha * m_[i].array() / (v_[i].array().sqrt() + static_cast<T>(eps_));
    }
    return norm;
  }

  const ParamMap<T>& params() const { return params_; }
  ParamMap<T>& params() { return params_; }
  long step_count() const { return t_; }
  void set_step_count(long t) { t_ = t; }
  double lr() const { return lr_; }

  // Moment buffers, exposed for checkpointing (parallel to params()).
  std::vector<Mat<T>>& first_moments() { return m_; }
  std::vector<Mat<T>>& second_moments() { return v_; }

 private:
  ParamMap<T> params_;
  std::vector<Mat<T>> m_, v_;
  double lr_ = 1e-3, clip_norm_ = 100.0, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-7;
  long t_ = 0;
};

// Linear ramp from 0 to 1 over `warmup` steps, then constant.
inline double warmup_scale(long step, long warmup) {
  if (warmup <= 0) return 1.0;
  if (step >= warmup) return 1.0;
  return static_cast<double>(step) / static_cast<double>(warmup);
}

}  // namespace reverie
