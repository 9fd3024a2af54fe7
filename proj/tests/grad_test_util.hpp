// tests/grad_test_util.hpp
//
// Finite-difference gradient verification for whole models: run one backward
// pass through a scalar loss, then compare every parameter coordinate against
// a central difference of the loss.

// Copyright 2026  speechchain authors
// Licensed under the Apache License, Version 2.0. See LICENSE.

#ifndef SPEECHCHAIN_TESTS_GRAD_TEST_UTIL_HPP
#define SPEECHCHAIN_TESTS_GRAD_TEST_UTIL_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "speechchain/params.hpp"
#include "speechchain/tensor.hpp"

namespace speechchain {
namespace testutil {

struct ModelGradReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// loss_fn must rebuild the forward pass from the current parameter values on
// every call and return the scalar loss tensor.
inline ModelGradReport check_model_gradients(
    const std::function<ad::Tensor()>& loss_fn, ModelParameters& params,
    double step = 1e-5) {
  params.clear_grads();
  ad::Tensor loss = loss_fn();
  loss.backward();

  ModelGradReport report;
  for (const auto& [name, tensor] : params.entries()) {
    ad::Tensor param = tensor;
    const auto analytic =
        param.has_grad() ? param.grad()
                         : std::vector<double>(param.values().size(), 0.0);
    auto& v = param.mutable_values();
    for (size_t i = 0; i < v.size(); ++i) {
      double orig = v[i];
      double fp, fm;
      {
        ad::NoGradGuard guard;
        v[i] = orig + step;
        fp = loss_fn().item();
        v[i] = orig - step;
        fm = loss_fn().item();
        v[i] = orig;
      }
      double numeric = (fp - fm) / (2.0 * step);
      double denom = std::max({1e-3, std::abs(analytic[i]), std::abs(numeric)});
      double rel = std::abs(analytic[i] - numeric) / denom;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = name;
        report.worst_index = i;
        report.analytic = analytic[i];
        report.numeric = numeric;
      }
    }
  }
  params.clear_grads();
  return report;
}

}  // namespace testutil
}  // namespace speechchain

#endif  // SPEECHCHAIN_TESTS_GRAD_TEST_UTIL_HPP
