#pragma once

#include <cmath>
#include <functional>

#include "bandmix/tensor.hpp"

namespace bandmix {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const {
    require(learning_rate > 0, "learning rate must be positive, got ", learning_rate);
    require(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1, "Adam betas must be in [0, 1)");
    require(eps > 0, "Adam epsilon must be positive");
  }
};

/// Learning rate as a function of the 1-based update count.
using LrSchedule = std::function<double(std::size_t step, double base_lr)>;

inline LrSchedule constant_lr() {
  return [](std::size_t, double base) { return base; };
}

/// Adam with bias-corrected moment estimates.
template <typename T>
class Adam {
 public:
  Adam(const ParamSet<T>& like, AdamConfig cfg, LrSchedule schedule = constant_lr())
      : cfg_(cfg), schedule_(std::move(schedule)), m_(like.zeros_like()), v_(like.zeros_like()) {
    cfg_.validate();
  }

  std::size_t steps() const noexcept { return t_; }
  const AdamConfig& config() const noexcept { return cfg_; }

  void step(ParamSet<T>& params, const ParamSet<T>& grads) {
    require(grads.size() == params.size() && params.size() == m_.size(),
            "Adam: parameter layout changed");
    ++t_;
    const double lr = schedule_(t_, cfg_.learning_rate);
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i];
      auto& m = m_[i];
      auto& v = v_[i];
      const auto& g = grads[i];
      for (std::size_t k = 0; k < p.size(); ++k) {
        const double gk = static_cast<double>(g[k]);
        const double mk = cfg_.beta1 * static_cast<double>(m[k]) + (1 - cfg_.beta1) * gk;
        const double vk = cfg_.beta2 * static_cast<double>(v[k]) + (1 - cfg_.beta2) * gk * gk;
        m[k] = static_cast<T>(mk);
        v[k] = static_cast<T>(vk);
        p[k] -= static_cast<T>(lr * (mk / c1) / (std::sqrt(vk / c2) + cfg_.eps));
      }
    }
  }

 private:
  AdamConfig cfg_;
  LrSchedule schedule_;
  ParamSet<T> m_, v_;
  std::size_t t_ = 0;
};

/// Rescales `grads` so their global L2 norm is at most `max_norm`. Returns
/// the norm before clipping.
template <typename T>
double clip_grad_norm(ParamSet<T>& grads, double max_norm) {
  double sq = 0;
  for (std::size_t i = 0; i < grads.size(); ++i)
    for (const auto& v : grads[i].vec()) sq += static_cast<double>(v) * static_cast<double>(v);
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) grads *= static_cast<T>(max_norm / norm);
  return norm;
}

}  // namespace bandmix
