#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the replex authors

// Central-difference gradient checking shared by the engine and model tests.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <vector>

#include "replex/tensor.hpp"

namespace testutil {

/// Checks every parameter's tape gradient against central differences of the
/// scalar graph produced by `build`. `build` must reconstruct the same graph
/// from the current parameter values on every call (no hidden state).
inline void gradcheck(const std::vector<replex::autograd::Tensor>& params,
                      const std::function<replex::autograd::Tensor(replex::autograd::Tape&)>& build,
                      double tol = 1e-6, double h = 1e-6) {
  using replex::autograd::Tape;
  using replex::autograd::Tensor;
  Tape tape;
  for (const auto& p : params) p->zero_grad();
  Tensor loss = build(tape);
  REQUIRE(loss->rows == 1);
  REQUIRE(loss->cols == 1);
  tape.backward(loss);

  auto eval = [&build]() {
    Tape fresh;
    fresh.set_recording(false);
    return build(fresh)->value[0];
  };
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    const Tensor& p = params[pi];
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double orig = p->value[i];
      p->value[i] = orig + h;
      const double up = eval();
      p->value[i] = orig - h;
      const double down = eval();
      p->value[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p->grad[i];
      const double bound = tol * std::max({1.0, std::abs(analytic), std::abs(numeric)});
      INFO("param " << pi << " element " << i << ": analytic " << analytic << " numeric "
                    << numeric);
      REQUIRE(std::abs(analytic - numeric) <= bound);
    }
  }
}

}  // namespace testutil
