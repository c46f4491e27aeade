#pragma once

// NAdam with decoupled-style L2 regularization (weight_decay * param added
// to the gradient), EMA target update, and a reduce-on-plateau scheduler.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "litenext/model.hpp"

namespace litenext {

template <typename T>
class NadamOptimizer {
 public:
  NadamOptimizer(double lr = 1e-4, double weight_decay = 0.0,
                 double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr),
        wd_(weight_decay),
        beta1_(beta1),
        beta2_(beta2),
        eps_(eps) {}

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  int64_t step_count() const { return t_; }

  // Applies one update to every tensor in `params`. Each must have a
  // gradient populated by backward().
  void step(std::vector<std::pair<std::string, Tensor<T>>>& params) {
    ++t_;
    const double mu_t = momentum_schedule(t_);
    const double mu_next = momentum_schedule(t_ + 1);
    mu_product_ *= mu_t;
    const double mu_product_next = mu_product_ * mu_next;
    const double v_correction = 1.0 - std::pow(beta2_, (double)t_);

    for (auto& [name, p] : params) {
      if (!p.has_grad())
        throw GradError("NadamOptimizer: no gradient for parameter " + name);
      auto& slot = state_[p.id()];
      if (slot.m.empty()) {
        slot.m.assign(p.size(), 0.0);
        slot.v.assign(p.size(), 0.0);
      }
      T* w = p.data();
      const T* gr = p.grad();
      for (int64_t i = 0; i < p.size(); ++i) {
        const double g = (double)gr[i] + wd_ * (double)w[i];
        slot.m[i] = beta1_ * slot.m[i] + (1.0 - beta1_) * g;
        slot.v[i] = beta2_ * slot.v[i] + (1.0 - beta2_) * g * g;
        const double m_hat = mu_next * slot.m[i] / (1.0 - mu_product_next) +
                             (1.0 - mu_t) * g / (1.0 - mu_product_);
        const double v_hat = slot.v[i] / v_correction;
        w[i] = (T)((double)w[i] -
                   lr_ * m_hat / (std::sqrt(v_hat) + eps_));
      }
    }
  }

 private:
  // mu_t = beta1 * (1 - 0.5 * 0.96^(t * psi)), psi = 0.004.
  double momentum_schedule(int64_t t) const {
    return beta1_ * (1.0 - 0.5 * std::pow(0.96, (double)t * 0.004));
  }

  struct Slot {
    std::vector<double> m, v;
  };

  double lr_, wd_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
  double mu_product_ = 1.0;
  std::map<const void*, Slot> state_;
};

// phi <- alpha * phi + (1 - alpha) * theta for every theta.* parameter.
template <typename T>
void ema_update(ModelParams<T>& params, double alpha) {
  for (auto& [name, theta] : params.named) {
    if (name.rfind("theta.", 0) != 0) continue;
    Tensor<T>& phi = params.at("phi." + name.substr(6));
    T* pd = phi.data();
    const T* td = theta.data();
    for (int64_t i = 0; i < phi.size(); ++i)
      pd[i] = (T)(alpha * (double)pd[i] + (1.0 - alpha) * (double)td[i]);
  }
}

// Multiplies the learning rate by `factor` after `patience` epochs without
// the monitored validation loss improving by at least `threshold`.
class PlateauScheduler {
 public:
  PlateauScheduler(double initial_lr, int patience = 30, double factor = 0.75,
                   double threshold = 1e-6)
      : lr_(initial_lr),
        patience_(patience),
        factor_(factor),
        threshold_(threshold) {}

  double lr() const { return lr_; }

  // Call once per epoch with the validation loss; returns the lr to use
  // for the next epoch.
  double observe(double val_loss) {
    if (!has_best_ || val_loss < best_ - threshold_) {
      best_ = val_loss;
      has_best_ = true;
      since_ = 0;
    } else if (++since_ >= patience_) {
      lr_ *= factor_;
      since_ = 0;
    }
    return lr_;
  }

 private:
  double lr_;
  int patience_;
  double factor_, threshold_;
  double best_ = 0.0;
  bool has_best_ = false;
  int since_ = 0;
};

}  // namespace litenext
