#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "hetgnn/autodiff/tape.hpp"
#include "hetgnn/error.hpp"
#include "hetgnn/rng.hpp"

namespace hetgnn::ad {

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Classic L2 form: weight_decay * value is added to the gradient.
  double weight_decay = 0.0;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {
    if (cfg_.lr < 0.0) throw ConfigError("Adam learning rate must be non-negative");
  }

  const AdamConfig& config() const noexcept { return cfg_; }
  std::size_t step_count() const noexcept { return step_; }
  const std::vector<Matrix>& first_moments() const noexcept { return m_; }
  const std::vector<Matrix>& second_moments() const noexcept { return v_; }

  void step(ParameterSet& params) {
    if (m_.empty()) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        m_.emplace_back(params[i].value.rows(), params[i].value.cols());
        v_.emplace_back(params[i].value.rows(), params[i].value.cols());
      }
    }
    if (m_.size() != params.size()) throw ShapeError("Adam state does not match parameter set");
    for (std::size_t i = 0; i < params.size(); ++i)
      if (!params[i].grad.all_finite()) throw NumericalError("non-finite gradient for parameter '" + params[i].name + "'");
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Parameter& p = params[i];
      if (!m_[i].same_shape(p.value)) throw ShapeError("Adam moment shape mismatch for '" + p.name + "'");
      auto& w = p.value.data();
      const auto& g = p.grad.data();
      auto& m = m_[i].data();
      auto& v = v_[i].data();
      for (std::size_t k = 0; k < w.size(); ++k) {
        const double gk = g[k] + cfg_.weight_decay * w[k];
        m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * gk;
        v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * gk * gk;
        const double mhat = m[k] / bc1;
        const double vhat = v[k] / bc2;
        w[k] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.epsilon);
      }
    }
  }

 private:
  AdamConfig cfg_;
  std::size_t step_ = 0;
  std::vector<Matrix> m_, v_;
};

/// Glorot-uniform initialization U(-a, a), a = sqrt(6 / (fan_in + fan_out)).
inline Matrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  Matrix w(fan_in, fan_out);
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : w.data()) v = rng.uniform(-a, a);
  return w;
}

}  // namespace hetgnn::ad
