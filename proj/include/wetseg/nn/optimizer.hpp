#pragma once

#include <cmath>
#include <vector>

#include "wetseg/nn/layers.hpp"

namespace wetseg::nn {

struct OptimizerSpec {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;

  void validate() const {
    require(lr > 0 && eps > 0 && weight_decay >= 0, "OptimizerSpec: non-positive field");
    require(beta1 > 0 && beta1 < 1 && beta2 > 0 && beta2 < 1,
            "OptimizerSpec: betas must lie in (0,1)");
  }
};

/// AdamW with decoupled weight decay over an explicit parameter list.
/// The union of all sub-model parameters is registered once; one step
/// updates everything jointly.
template <typename T>
class AdamW {
 public:
  AdamW(std::vector<ParamView<T>> params, OptimizerSpec spec)
      : params_(std::move(params)), spec_(spec) {
    spec_.validate();
    std::size_t total = 0;
    for (const auto& p : params_) total += p.size;
    m_.assign(total, 0.0);
    v_.assign(total, 0.0);
  }

  /// One update with the given (scheduled) learning rate.
  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(spec_.beta1, t_);
    const double bc2 = 1.0 - std::pow(spec_.beta2, t_);
    std::size_t off = 0;
    for (const auto& p : params_) {
      for (std::size_t i = 0; i < p.size; ++i) {
        const double g = static_cast<double>(p.grad[i]);
        double& m = m_[off + i];
        double& v = v_[off + i];
        m = spec_.beta1 * m + (1.0 - spec_.beta1) * g;
        v = spec_.beta2 * v + (1.0 - spec_.beta2) * g * g;
        const double mhat = m / bc1;
        const double vhat = v / bc2;
        double w = static_cast<double>(p.value[i]);
        w *= 1.0 - lr * spec_.weight_decay;
        w -= lr * mhat / (std::sqrt(vhat) + spec_.eps);
        p.value[i] = static_cast<T>(w);
      }
      off += p.size;
    }
  }

  void step() { step(spec_.lr); }

  long long steps_taken() const { return t_; }

 private:
  std::vector<ParamView<T>> params_;
  OptimizerSpec spec_;
  std::vector<double> m_, v_;
  long long t_ = 0;
};

}  // namespace wetseg::nn
