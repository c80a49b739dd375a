// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the replex authors

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "replex/loss_weighting.hpp"
#include "replex/rng.hpp"

using Catch::Matchers::WithinAbs;
using namespace replex::loss;

namespace {

double central_diff(const std::function<double(double)>& f, double p, double h = 1e-7) {
  return (f(p + h) - f(p - h)) / (2.0 * h);
}

void check_grad_on_grid(const std::function<double(double)>& f,
                        const std::function<double(double)>& grad) {
  for (int i = 1; i <= 99; ++i) {
    const double p = i * 0.01;
    const double analytic = grad(p);
    const double numeric = central_diff(f, p);
    const double tol = 1e-6 * std::max(1.0, std::abs(analytic));
    INFO("p = " << p << " analytic = " << analytic << " numeric = " << numeric);
    CHECK(std::abs(analytic - numeric) <= tol);
  }
}

}  // namespace

TEST_CASE("cross-entropy loss hits its anchor points") {
  CHECK(ce(1.0) == 0.0);
  CHECK_THAT(ce(0.5), WithinAbs(0.6931471805599453, 1e-15));
  CHECK_THAT(ce(std::exp(-1.0)), WithinAbs(1.0, 1e-9));
  // p = 0 is clamped, so the loss stays finite.
  CHECK(std::isfinite(ce(0.0)));
  CHECK(ce(0.0) > 20.0);
}

TEST_CASE("cosine weight spans [0,2] and decreases strictly") {
  CHECK_THAT(cosw(0.0), WithinAbs(2.0, 1e-12));
  CHECK_THAT(cosw(0.5), WithinAbs(1.0, 1e-12));
  CHECK_THAT(cosw(1.0), WithinAbs(0.0, 1e-12));
  for (int i = 0; i < 1000; ++i) {
    const double p = i / 1000.0;
    CHECK(cosw(p) > cosw(p + 1e-3));
    CHECK(cosw(p) >= 0.0);
    CHECK(cosw(p) <= 2.0);
  }
}

TEST_CASE("sequence easiness is the mean token probability") {
  CHECK(sequence_easiness({1.0, 1.0, 1.0}) == 1.0);
  CHECK_THAT(sequence_easiness({0.2, 0.4, 0.6}), WithinAbs(0.4, 1e-12));
  CHECK(sequence_easiness({0.13}) == 0.13);
  CHECK_THROWS_AS(sequence_easiness({}), std::invalid_argument);
}

TEST_CASE("sequence loss mean averages per-token cross-entropy") {
  CHECK(sequence_loss_mean({1.0, 1.0}) == 0.0);
  CHECK_THAT(sequence_loss_mean({0.5, 0.5}), WithinAbs(0.6931471805599453, 1e-15));
  CHECK_THAT(sequence_loss_mean({1.0, std::exp(-2.0)}), WithinAbs(1.0, 1e-9));
  CHECK_THROWS_AS(sequence_loss_mean({}), std::invalid_argument);
}

TEST_CASE("example-level focal loss") {
  CHECK(fl_example({1.0, 1.0}, 2.0) == 0.0);
  std::vector<double> probs = {0.3, 0.7, 0.9};
  CHECK(fl_example(probs, 0.0) == sequence_loss_mean(probs));
  CHECK_THAT(fl_example({0.5, 0.5}, 2.0), WithinAbs(0.17328679513998632, 1e-12));
}

TEST_CASE("example-level cosine reweighting") {
  CHECK(ldr_example({1.0, 1.0}) == 0.0);
  // Easiness exactly 0.5 gives weight 1.
  std::vector<double> balanced = {0.4, 0.6};
  CHECK_THAT(ldr_example(balanced), WithinAbs(sequence_loss_mean(balanced), 1e-12));
  CHECK_THAT(ldr_example({0.2, 0.2}), WithinAbs(2.911500534984626, 1e-12));
}

TEST_CASE("token focal loss") {
  CHECK(tfl_token(1.0, 2.0) == 0.0);
  CHECK(tfl_token(0.37, 0.0) == ce(0.37));
  CHECK_THAT(tfl_token(0.5, 2.0), WithinAbs(0.17328679513998632, 1e-12));
  // The focal weight never exceeds 1: TFL only down-weights.
  for (int i = 1; i <= 99; ++i) {
    const double p = i * 0.01;
    CHECK(tfl_token(p, 2.0) <= ce(p));
  }
}

TEST_CASE("token cosine reweighting up-weights hard and suppresses easy tokens") {
  CHECK(tldr_token(1.0) == 0.0);
  CHECK_THAT(tldr_token(0.5), WithinAbs(0.6931471805599453, 1e-12));
  CHECK_THAT(tldr_token(0.25), WithinAbs(2.3665525045884377, 1e-12));
  for (int i = 1; i <= 49; ++i) {
    const double p = i * 0.01;
    CHECK(tldr_token(p) > ce(p));
    CHECK(tldr_token(1.0 - p) < ce(1.0 - p));
  }
}

TEST_CASE("uniform weighting scales cross-entropy") {
  CHECK(uniform_token(1.0, 2.0) == 0.0);
  CHECK(uniform_token(0.42, 1.0) == ce(0.42));
  CHECK_THAT(uniform_token(0.5, 2.0), WithinAbs(1.3862943611198906, 1e-12));
}

TEST_CASE("analytic gradients on anchor points") {
  CHECK_THAT(grad_ce(0.5), WithinAbs(-2.0, 1e-12));
  CHECK_THAT(grad_ce(1.0), WithinAbs(-1.0, 1e-12));
  CHECK_THAT(grad_ce(0.1), WithinAbs(-10.0, 1e-12));

  CHECK_THAT(grad_tfl(0.5, 2.0), WithinAbs(-1.1931471805599454, 1e-12));
  CHECK(grad_tfl(0.73, 0.0) == grad_ce(0.73));
  CHECK_THAT(grad_tfl(1.0, 2.0), WithinAbs(0.0, 1e-12));
  CHECK_THAT(grad_tfl(1.0, 0.5), WithinAbs(0.0, 1e-12));

  CHECK_THAT(grad_tldr(0.5), WithinAbs(-4.177586090303603, 1e-12));
  CHECK_THAT(grad_tldr(1.0), WithinAbs(0.0, 1e-12));
  CHECK_THAT(grad_tldr(0.9), WithinAbs(-0.15666621868446198, 1e-12));
  CHECK(std::abs(grad_tldr(0.9)) < std::abs(grad_ce(0.9)));
}

TEST_CASE("analytic gradients match central finite differences") {
  check_grad_on_grid([](double p) { return ce(p); }, [](double p) { return grad_ce(p); });
  for (double gamma : {0.0, 1.0, 2.0}) {
    check_grad_on_grid([gamma](double p) { return tfl_token(p, gamma); },
                       [gamma](double p) { return grad_tfl(p, gamma); });
  }
  check_grad_on_grid([](double p) { return tldr_token(p); },
                     [](double p) { return grad_tldr(p); });
}

TEST_CASE("cosine reweighting amplifies hard-token gradients and damps easy ones") {
  // The magnitude crossover sits near p = 0.7075: below 0.5 the cosine
  // gradient always dominates plain cross-entropy, above ~0.708 it is
  // always smaller.
  for (int i = 1; i <= 99; ++i) {
    const double p = i * 0.005;
    CHECK(std::abs(grad_tldr(p)) > std::abs(grad_ce(p)));
  }
  for (int i = 142; i <= 199; ++i) {
    const double p = i * 0.005;
    CHECK(std::abs(grad_tldr(p)) < std::abs(grad_ce(p)));
  }
}

TEST_CASE("batch loss dispatch and reduction") {
  std::vector<std::vector<double>> perfect = {{1.0, 1.0}, {1.0}};
  for (Scheme s : {Scheme::CE, Scheme::FL, Scheme::LDR, Scheme::TFL, Scheme::TLDR,
                   Scheme::Uniform}) {
    WeightingScheme ws{s, 2.0, 2.0};
    CHECK(weighted_batch_loss(perfect, ws) == 0.0);
  }

  std::vector<double> seq = {0.3, 0.8, 0.6};
  CHECK(weighted_batch_loss({seq}, {Scheme::CE, 2.0, 2.0}) == sequence_loss_mean(seq));
  CHECK_THAT(weighted_batch_loss({{0.5, 0.5}}, {Scheme::TLDR, 2.0, 2.0}),
             WithinAbs(0.6931471805599453, 1e-12));

  CHECK_THROWS_AS(weighted_batch_loss({}, WeightingScheme{}), std::invalid_argument);
  CHECK_THROWS_AS(weighted_batch_loss({{}}, WeightingScheme{}), std::invalid_argument);
  CHECK_THROWS_AS((WeightingScheme{Scheme::TFL, -1.0, 2.0}.validate()),
                  std::invalid_argument);
  CHECK_THROWS_AS((WeightingScheme{Scheme::Uniform, 2.0, 0.0}.validate()),
                  std::invalid_argument);
}

TEST_CASE("uniform batch loss is an exact scalar multiple of cross-entropy") {
  replex::Rng rng(42);
  for (double w : {2.0, 3.7}) {
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<std::vector<double>> batch(1 + rng.next_below(4));
      for (auto& seq : batch) {
        seq.resize(1 + rng.next_below(6));
        for (auto& p : seq) p = 0.05 + 0.9 * rng.next_double();
      }
      const double uniform = weighted_batch_loss(batch, {Scheme::Uniform, 2.0, w});
      const double plain = weighted_batch_loss(batch, {Scheme::CE, 2.0, w});
      CHECK_THAT(uniform, WithinAbs(w * plain, 1e-12));
    }
  }
}

TEST_CASE("focal schemes with gamma 0 reduce to their unweighted bases") {
  replex::Rng rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> batch(1 + rng.next_below(4));
    for (auto& seq : batch) {
      seq.resize(1 + rng.next_below(6));
      for (auto& p : seq) p = 0.05 + 0.9 * rng.next_double();
    }
    CHECK(weighted_batch_loss(batch, {Scheme::TFL, 0.0, 2.0}) ==
          weighted_batch_loss(batch, {Scheme::CE, 0.0, 2.0}));
    double example_mean = 0.0;
    for (const auto& seq : batch) example_mean += sequence_loss_mean(seq);
    example_mean /= static_cast<double>(batch.size());
    CHECK(weighted_batch_loss(batch, {Scheme::FL, 0.0, 2.0}) == example_mean);
  }
}

TEST_CASE("scheme names round-trip") {
  for (Scheme s : {Scheme::CE, Scheme::FL, Scheme::LDR, Scheme::TFL, Scheme::TLDR,
                   Scheme::Uniform}) {
    CHECK(scheme_from_name(scheme_name(s)) == s);
  }
  CHECK_THROWS_AS(scheme_from_name("huber"), std::invalid_argument);
  CHECK(is_token_level(Scheme::TLDR));
  CHECK(is_token_level(Scheme::Uniform));
  CHECK_FALSE(is_token_level(Scheme::FL));
  CHECK_FALSE(is_token_level(Scheme::LDR));
}

TEST_CASE("weight dispatch rejects the wrong level") {
  CHECK_THROWS_AS(token_weight({Scheme::FL, 2.0, 2.0}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(example_weight({Scheme::TLDR, 2.0, 2.0}, {0.5}), std::invalid_argument);
  CHECK(token_weight({Scheme::CE, 2.0, 2.0}, 0.3) == 1.0);
  CHECK_THAT(token_weight({Scheme::TLDR, 2.0, 2.0}, 0.25), WithinAbs(cosw(0.25), 1e-15));
  CHECK_THAT(example_weight({Scheme::LDR, 2.0, 2.0}, {0.2, 0.2}),
             WithinAbs(cosw(0.2), 1e-15));
}

TEST_CASE("gradcurve export covers the documented grid") {
  std::ostringstream out;
  write_gradcurve(out);
  std::istringstream in(out.str());
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "p,ce,tfl,tldr,grad_ce,grad_tfl,grad_tldr");

  int rows = 0;
  std::string first, last, middle;
  while (std::getline(in, line)) {
    if (rows == 0) first = line;
    if (line.rfind("0.500,", 0) == 0) middle = line;
    last = line;
    ++rows;
  }
  CHECK(rows == 199);
  CHECK(first.rfind("0.005,", 0) == 0);
  CHECK(last.rfind("0.995,", 0) == 0);

  REQUIRE(!middle.empty());
  std::vector<double> cols;
  std::istringstream row(middle);
  std::string cell;
  while (std::getline(row, cell, ',')) cols.push_back(std::stod(cell));
  REQUIRE(cols.size() == 7);
  CHECK_THAT(cols[1], WithinAbs(ce(0.5), 1e-9));
  CHECK_THAT(cols[2], WithinAbs(tfl_token(0.5, 2.0), 1e-9));
  CHECK_THAT(cols[3], WithinAbs(tldr_token(0.5), 1e-9));
  CHECK_THAT(cols[4], WithinAbs(grad_ce(0.5), 1e-9));
  CHECK_THAT(cols[5], WithinAbs(grad_tfl(0.5, 2.0), 1e-9));
  CHECK_THAT(cols[6], WithinAbs(grad_tldr(0.5), 1e-9));
}
