// speechchain/optim.hpp
//
// Gradient-descent optimizers over a ModelParameters collection. Each step
// clips gradients by global norm, applies the update rule, and clears grads.

// Copyright 2026  speechchain authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SPEECHCHAIN_OPTIM_HPP
#define SPEECHCHAIN_OPTIM_HPP

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "speechchain/errors.hpp"
#include "speechchain/params.hpp"

namespace speechchain {

class Optimizer {
 public:
  // max_grad_norm <= 0 disables clipping.
  explicit Optimizer(double max_grad_norm = 5.0)
      : max_grad_norm_(max_grad_norm) {}
  virtual ~Optimizer() = default;

  // Applies one update. Every parameter must carry a gradient; afterwards all
  // gradients are cleared and the step counter advances.
  void step(ModelParameters& params) {
    std::string missing;
    for (const auto& [name, t] : params.entries())
      if (!t.has_grad()) missing += missing.empty() ? name : ", " + name;
    if (!missing.empty())
      throw NumericError("optimizer step with missing gradients for: " +
                         missing);

    double scale = 1.0;
    if (max_grad_norm_ > 0.0) {
      double sq = 0.0;
      for (const auto& [name, t] : params.entries())
        for (double g : t.grad()) sq += g * g;
      double norm = std::sqrt(sq);
      if (!std::isfinite(norm))
        throw NumericError("optimizer step with non-finite gradient norm");
      if (norm > max_grad_norm_) scale = max_grad_norm_ / norm;
    }

    ++step_count_;
    apply(params, scale);
    params.clear_grads();
  }

  int64_t step_count() const { return step_count_; }

 protected:
  virtual void apply(ModelParameters& params, double grad_scale) = 0;

  double max_grad_norm_;
  int64_t step_count_ = 0;
};

class SgdOptimizer : public Optimizer {
 public:
  SgdOptimizer(double lr, double momentum = 0.0, double max_grad_norm = 5.0)
      : Optimizer(max_grad_norm), lr_(lr), momentum_(momentum) {}

 protected:
  void apply(ModelParameters& params, double grad_scale) override {
    if (momentum_ != 0.0 && velocity_.empty()) {
      velocity_.resize(params.size());
      for (size_t i = 0; i < params.size(); ++i)
        velocity_[i].assign(params.entries()[i].second.values().size(), 0.0);
    }
    for (size_t i = 0; i < params.size(); ++i) {
      auto& t = params.entries()[i].second;
      auto& w = t.mutable_values();
      const auto& g = t.grad();
      if (momentum_ == 0.0) {
        for (size_t j = 0; j < w.size(); ++j)
          w[j] -= lr_ * grad_scale * g[j];
      } else {
        auto& v = velocity_[i];
        for (size_t j = 0; j < w.size(); ++j) {
          v[j] = momentum_ * v[j] + grad_scale * g[j];
          w[j] -= lr_ * v[j];
        }
      }
    }
  }

 private:
  double lr_;
  double momentum_;
  std::vector<std::vector<double>> velocity_;
};

class AdamOptimizer : public Optimizer {
 public:
  AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8, double max_grad_norm = 5.0)
      : Optimizer(max_grad_norm),
        lr_(lr),
        beta1_(beta1),
        beta2_(beta2),
        eps_(eps) {}

 protected:
  void apply(ModelParameters& params, double grad_scale) override {
    if (m_.empty()) {
      m_.resize(params.size());
      v_.resize(params.size());
      for (size_t i = 0; i < params.size(); ++i) {
        size_t n = params.entries()[i].second.values().size();
        m_[i].assign(n, 0.0);
        v_[i].assign(n, 0.0);
      }
    }
    double t = static_cast<double>(step_count_);
    double bc1 = 1.0 - std::pow(beta1_, t);
    double bc2 = 1.0 - std::pow(beta2_, t);
    for (size_t i = 0; i < params.size(); ++i) {
      auto& w = params.entries()[i].second.mutable_values();
      const auto& g = params.entries()[i].second.grad();
      for (size_t j = 0; j < w.size(); ++j) {
        double gj = grad_scale * g[j];
        m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * gj;
        v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * gj * gj;
        double m_hat = m_[i][j] / bc1;
        double v_hat = v_[i][j] / bc2;
        w[j] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
      }
    }
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::vector<std::vector<double>> m_, v_;
};

inline std::unique_ptr<Optimizer> make_optimizer(const std::string& kind,
                                                 double lr, double momentum,
                                                 double max_grad_norm) {
  if (kind == "sgd")
    return std::make_unique<SgdOptimizer>(lr, momentum, max_grad_norm);
  if (kind == "adam")
    return std::make_unique<AdamOptimizer>(lr, 0.9, 0.999, 1e-8,
                                           max_grad_norm);
  throw ConfigError("unknown optimizer '" + kind + "' (expected sgd or adam)");
}

}  // namespace speechchain

#endif  // SPEECHCHAIN_OPTIM_HPP
