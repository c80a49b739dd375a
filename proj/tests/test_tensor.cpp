// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the replex authors

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <vector>

#include "gradcheck.hpp"
#include "replex/rng.hpp"
#include "replex/tensor.hpp"

using Catch::Matchers::WithinAbs;
using testutil::gradcheck;
using namespace replex::autograd;

namespace {

Tensor random_const(int r, int c, replex::Rng& rng) {
  Tensor t = make_tensor(r, c);
  for (auto& v : t->value) v = rng.uniform(-1.0, 1.0);
  return t;
}

/// Reduces a matrix-valued node to a scalar through a fixed random weighting
/// so gradcheck exercises distinct per-element paths.
Tensor scalarize(Tape& tape, const Tensor& t, const Tensor& weights) {
  return sum(tape, mul(tape, t, weights));
}

}  // namespace

TEST_CASE("matmul with identity leaves the operand unchanged") {
  Tape tape;
  Tensor eye = make_tensor(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  replex::Rng rng(1);
  Tensor x = random_const(3, 5, rng);
  Tensor y = matmul(tape, eye, x);
  CHECK(y->value == x->value);
}

TEST_CASE("sigmoid at zero is one half with local slope one quarter") {
  Tape tape;
  Tensor x = make_tensor(1, 1, {0.0}, true);
  Tensor y = sigmoid(tape, x);
  CHECK_THAT(y->value[0], WithinAbs(0.5, 1e-15));
  tape.backward(sum(tape, y));
  CHECK_THAT(x->grad[0], WithinAbs(0.25, 1e-12));
}

TEST_CASE("log-softmax NLL on a uniform two-way split") {
  Tape tape;
  Tensor logits = make_tensor(1, 2, {0.0, 0.0}, true);
  NllResult r = log_softmax_nll(tape, logits, {0});
  CHECK_THAT(r.loss->value[0], WithinAbs(std::log(2.0), 1e-12));
  CHECK_THAT(r.probs[0], WithinAbs(0.5, 1e-12));
}

TEST_CASE("softmax rows sum to one and NLL probabilities invert the loss") {
  replex::Rng rng(2);
  Tape tape;
  Tensor x = random_const(6, 8, rng);
  for (auto& v : x->value) v *= 5.0;
  Tensor sm = softmax_rows(tape, x);
  for (int i = 0; i < sm->rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < sm->cols; ++j) s += sm->at(i, j);
    CHECK_THAT(s, WithinAbs(1.0, 1e-12));
  }

  std::vector<int> targets = {1, 7, 0, 3, 3, 5};
  NllResult r = log_softmax_nll(tape, x, targets);
  for (int i = 0; i < 6; ++i)
    CHECK_THAT(r.probs[static_cast<std::size_t>(i)],
               WithinAbs(std::exp(-r.loss->value[i]), 1e-12));
}

TEST_CASE("backward of a plain sum is all ones") {
  Tape tape;
  replex::Rng rng(3);
  Tensor x = make_param(4, 3, rng, -1.0, 1.0);
  tape.backward(sum(tape, x));
  for (double g : x->grad) CHECK(g == 1.0);
}

TEST_CASE("backward of sum of squares is twice the input") {
  Tape tape;
  replex::Rng rng(4);
  Tensor x = make_param(2, 5, rng, -1.0, 1.0);
  tape.backward(sum(tape, mul(tape, x, x)));
  for (int i = 0; i < x->size(); ++i) CHECK_THAT(x->grad[i], WithinAbs(2.0 * x->value[i], 1e-12));
}

TEST_CASE("backward rejects non-scalar losses") {
  Tape tape;
  Tensor x = make_tensor(2, 2, true);
  CHECK_THROWS_AS(tape.backward(x), std::invalid_argument);
}

TEST_CASE("gradcheck: matmul") {
  replex::Rng rng(10);
  Tensor a = make_param(3, 4, rng, -0.9, 0.9);
  Tensor b = make_param(4, 2, rng, -0.9, 0.9);
  Tensor k = random_const(3, 2, rng);
  gradcheck({a, b}, [&](Tape& t) { return scalarize(t, matmul(t, a, b), k); });
}

TEST_CASE("gradcheck: matmul against a transposed right operand") {
  replex::Rng rng(11);
  Tensor a = make_param(3, 4, rng, -0.9, 0.9);
  Tensor b = make_param(5, 4, rng, -0.9, 0.9);
  Tensor k = random_const(3, 5, rng);
  gradcheck({a, b}, [&](Tape& t) { return scalarize(t, matmul_nt(t, a, b), k); });
}

TEST_CASE("gradcheck: add, broadcast add, mul, affine") {
  replex::Rng rng(12);
  Tensor a = make_param(4, 3, rng, -0.9, 0.9);
  Tensor b = make_param(4, 3, rng, -0.9, 0.9);
  Tensor bias = make_param(1, 3, rng, -0.9, 0.9);
  Tensor k = random_const(4, 3, rng);
  gradcheck({a, b}, [&](Tape& t) { return scalarize(t, add(t, a, b), k); });
  gradcheck({a, bias}, [&](Tape& t) { return scalarize(t, add(t, a, bias), k); });
  gradcheck({a, b}, [&](Tape& t) { return scalarize(t, mul(t, a, b), k); });
  gradcheck({a}, [&](Tape& t) { return scalarize(t, affine(t, a, -1.0, 1.0), k); });
}

TEST_CASE("gradcheck: sigmoid and tanh") {
  replex::Rng rng(13);
  Tensor x = make_param(2, 6, rng, -2.0, 2.0);
  Tensor k = random_const(2, 6, rng);
  gradcheck({x}, [&](Tape& t) { return scalarize(t, sigmoid(t, x), k); });
  gradcheck({x}, [&](Tape& t) { return scalarize(t, replex::autograd::tanh(t, x), k); });
}

TEST_CASE("gradcheck: concat and stack") {
  replex::Rng rng(14);
  Tensor a = make_param(3, 2, rng, -0.9, 0.9);
  Tensor b = make_param(3, 4, rng, -0.9, 0.9);
  Tensor k = random_const(3, 6, rng);
  gradcheck({a, b}, [&](Tape& t) { return scalarize(t, concat_cols(t, a, b), k); });

  std::vector<Tensor> rows;
  for (int i = 0; i < 4; ++i) rows.push_back(make_param(1, 5, rng, -0.9, 0.9));
  Tensor k2 = random_const(4, 5, rng);
  gradcheck(rows, [&](Tape& t) { return scalarize(t, stack_rows(t, rows), k2); });
}

TEST_CASE("gradcheck: softmax rows") {
  replex::Rng rng(15);
  Tensor x = make_param(3, 5, rng, -1.5, 1.5);
  Tensor k = random_const(3, 5, rng);
  gradcheck({x}, [&](Tape& t) { return scalarize(t, softmax_rows(t, x), k); });
}

TEST_CASE("gradcheck: embedding lookup with repeated ids") {
  replex::Rng rng(16);
  Tensor table = make_param(6, 3, rng, -0.9, 0.9);
  std::vector<int> ids = {0, 3, 3, 5};
  Tensor k = random_const(4, 3, rng);
  gradcheck({table}, [&](Tape& t) { return scalarize(t, embedding_lookup(t, table, ids), k); });
}

TEST_CASE("gradcheck: dropout mask is constant for a fixed seed") {
  replex::Rng rng(17);
  Tensor x = make_param(4, 4, rng, -0.9, 0.9);
  Tensor k = random_const(4, 4, rng);
  gradcheck({x}, [&](Tape& t) {
    return scalarize(t, dropout(t, x, 0.4, true, 777), k);
  });
}

TEST_CASE("gradcheck: fused log-softmax NLL under a weighted reduction") {
  replex::Rng rng(18);
  Tensor logits = make_param(4, 6, rng, -1.5, 1.5);
  std::vector<int> targets = {1, 0, 5, 2};
  std::vector<double> weights = {0.3, 1.2, 0.7, 1.0};
  gradcheck({logits}, [&](Tape& t) {
    return weighted_sum(t, log_softmax_nll(t, logits, targets).loss, weights);
  });
}

TEST_CASE("gradcheck: five-parameter composite network") {
  replex::Rng rng(19);
  Tensor table = make_param(7, 4, rng, -0.9, 0.9);
  Tensor w1 = make_param(4, 5, rng, -0.9, 0.9);
  Tensor b1 = make_param(1, 5, rng, -0.9, 0.9);
  Tensor w2 = make_param(5, 6, rng, -0.9, 0.9);
  Tensor b2 = make_param(1, 6, rng, -0.9, 0.9);
  std::vector<int> ids = {2, 6, 2};
  std::vector<int> targets = {0, 4, 1};
  std::vector<double> weights = {1.0, 0.5, 1.5};
  gradcheck({table, w1, b1, w2, b2}, [&](Tape& t) {
    Tensor x = embedding_lookup(t, table, ids);
    Tensor h = replex::autograd::tanh(t, add(t, matmul(t, x, w1), b1));
    Tensor logits = add(t, matmul(t, h, w2), b2);
    return weighted_sum(t, log_softmax_nll(t, logits, targets).loss, weights);
  });
}

TEST_CASE("identical seeds give bit-identical values and gradients") {
  auto run = [](std::vector<double>* grads) {
    replex::Rng rng(20260814);
    Tape tape;
    Tensor w = make_param(5, 5, rng, -0.5, 0.5);
    Tensor x = random_const(3, 5, rng);
    Tensor h = dropout(tape, replex::autograd::tanh(tape, matmul(tape, x, w)), 0.3, true, 99);
    Tensor loss = sum(tape, mul(tape, h, h));
    tape.backward(loss);
    *grads = w->grad;
    return loss->value[0];
  };
  std::vector<double> g1, g2;
  const double l1 = run(&g1);
  const double l2 = run(&g2);
  CHECK(l1 == l2);
  CHECK(g1 == g2);
}

TEST_CASE("dropout is the identity in evaluation mode") {
  Tape tape;
  replex::Rng rng(21);
  Tensor x = random_const(3, 3, rng);
  Tensor eval_out = dropout(tape, x, 0.5, false, 1);
  CHECK(eval_out.get() == x.get());

  Tensor train_out = dropout(tape, x, 0.5, true, 1);
  const double scale = 1.0 / 0.5;
  for (int i = 0; i < x->size(); ++i) {
    const bool zeroed = train_out->value[i] == 0.0;
    const bool scaled = std::abs(train_out->value[i] - scale * x->value[i]) < 1e-15;
    CHECK((zeroed || scaled));
  }
}

TEST_CASE("recording can be paused for generation") {
  Tape tape;
  replex::Rng rng(22);
  Tensor w = make_param(3, 3, rng);
  Tensor x = random_const(2, 3, rng);
  {
    NoGradGuard pause(tape);
    Tensor y = matmul(tape, x, w);
    CHECK_FALSE(y->requires_grad);
  }
  CHECK(tape.size() == 0);
  CHECK(tape.recording());
  Tensor y = matmul(tape, x, w);
  CHECK(y->requires_grad);
  CHECK(tape.size() == 1);
}

TEST_CASE("shape mismatches are rejected with diagnostics") {
  Tape tape;
  Tensor a = make_tensor(2, 3);
  Tensor b = make_tensor(2, 3);
  Tensor c = make_tensor(3, 2);
  CHECK_THROWS_AS(matmul(tape, a, b), std::invalid_argument);
  CHECK_THROWS_AS(matmul_nt(tape, a, c), std::invalid_argument);
  CHECK_THROWS_AS(add(tape, a, c), std::invalid_argument);
  CHECK_THROWS_AS(mul(tape, a, c), std::invalid_argument);
  CHECK_THROWS_AS(concat_cols(tape, a, c), std::invalid_argument);
  CHECK_THROWS_AS(weighted_sum(tape, a, {1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(embedding_lookup(tape, a, {5}), std::invalid_argument);
  CHECK_THROWS_AS(log_softmax_nll(tape, a, {0}), std::invalid_argument);
  CHECK_THROWS_AS(dropout(tape, a, 1.0, true, 1), std::invalid_argument);
  try {
    matmul(tape, a, b);
    FAIL("expected matmul to throw");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("[2x3]") != std::string::npos);
  }
}
