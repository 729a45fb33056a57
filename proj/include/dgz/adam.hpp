#pragma once

#include <cmath>
#include <vector>

#include "dgz/matrix.hpp"

namespace dgz {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over a fixed parameter list. Moments are allocated on
// the first step; every subsequent step must present the same shapes.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {
    if (cfg_.lr <= 0) throw ContractError("Adam: lr must be positive");
    if (cfg_.beta1 < 0 || cfg_.beta1 >= 1 || cfg_.beta2 < 0 || cfg_.beta2 >= 1)
      throw ContractError("Adam: betas must lie in [0, 1)");
    if (cfg_.eps <= 0) throw ContractError("Adam: eps must be positive");
  }

  const AdamConfig& config() const { return cfg_; }
  long steps() const { return step_; }

  // Adjusts the step size mid-run (for schedules); moments are kept.
  void set_lr(double lr) {
    if (lr <= 0) throw ContractError("Adam: lr must be positive");
    cfg_.lr = lr;
  }

  void step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads) {
    if (params.size() != grads.size()) throw ContractError("Adam: param/grad count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!params[i]->same_shape(grads[i]))
        throw ShapeError("Adam: grad shape mismatch at parameter " + std::to_string(i));
      if (!grads[i].all_finite())
        throw TrainingError("Adam: poisoned gradient (non-finite) at parameter " + std::to_string(i) +
                            "; step aborted");
    }
    if (m_.empty()) {
      for (const auto& g : grads) {
        m_.emplace_back(g.rows(), g.cols());
        v_.emplace_back(g.rows(), g.cols());
      }
    } else if (m_.size() != params.size()) {
      throw ContractError("Adam: parameter list changed between steps");
    }

    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i]->data();
      auto& m = m_[i].data();
      auto& v = v_[i].data();
      const auto& g = grads[i].data();
      for (std::size_t k = 0; k < p.size(); ++k) {
        m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g[k];
        v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g[k] * g[k];
        const double mhat = m[k] / bc1;
        const double vhat = v[k] / bc2;
        p[k] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

 private:
  AdamConfig cfg_;
  long step_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

}  // namespace dgz
