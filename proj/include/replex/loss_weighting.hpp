#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the replex authors

/**
 * @file loss_weighting.hpp
 * @brief Weighted cross-entropy losses with dynamic per-token reweighting.
 *
 * Implements six weighting schemes over token probabilities p = p(y_t | y_<t, x):
 *
 *  - CE       plain cross-entropy, weight 1
 *  - TFL      token focal loss, weight (1-p)^gamma, only ever down-weights
 *  - TLDR     cosine reweighting, weight cos(p*pi)+1 in [0,2]; up-weights
 *             hard tokens (p < 0.5), suppresses easy ones (p > 0.5)
 *  - Uniform  constant weight w (ablation baseline)
 *  - FL, LDR  example-level variants of TFL/TLDR driven by the mean token
 *             probability of the whole sequence
 *
 * Analytic d/dp gradients of the token losses are provided for curve export
 * and for validating the autodiff engine; they are finite-difference checked
 * in the test suite. Weights are treated as constants when training (no
 * gradient flows through the weight factor).
 */

#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace replex::loss {

/// Probabilities are clamped to [kProbEps, 1] before any log so that early
/// training steps with collapsed softmax mass stay finite.
inline constexpr double kProbEps = 1e-12;

inline double clamp_prob(double p) {
  if (p < kProbEps) return kProbEps;
  if (p > 1.0) return 1.0;
  return p;
}

enum class Scheme { CE, FL, LDR, TFL, TLDR, Uniform };

/// Scheme selector plus the parameters the schemes consume. gamma feeds
/// FL/TFL, uniform_w feeds Uniform; the rest ignore both.
struct WeightingScheme {
  Scheme kind = Scheme::CE;
  double gamma = 2.0;
  double uniform_w = 2.0;

  void validate() const {
    if (gamma < 0.0) throw std::invalid_argument("WeightingScheme: gamma must be >= 0");
    if (uniform_w <= 0.0)
      throw std::invalid_argument("WeightingScheme: uniform_w must be > 0");
  }
};

/// Token-level schemes weight each token loss independently; example-level
/// schemes (FL, LDR) weight the mean loss of a whole sequence.
inline bool is_token_level(Scheme s) {
  return s == Scheme::CE || s == Scheme::TFL || s == Scheme::TLDR || s == Scheme::Uniform;
}

inline const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::CE: return "ce";
    case Scheme::FL: return "fl";
    case Scheme::LDR: return "ldr";
    case Scheme::TFL: return "tfl";
    case Scheme::TLDR: return "tldr";
    case Scheme::Uniform: return "uniform";
  }
  return "ce";
}

inline Scheme scheme_from_name(const std::string& name) {
  if (name == "ce") return Scheme::CE;
  if (name == "fl") return Scheme::FL;
  if (name == "ldr") return Scheme::LDR;
  if (name == "tfl") return Scheme::TFL;
  if (name == "tldr") return Scheme::TLDR;
  if (name == "uniform") return Scheme::Uniform;
  throw std::invalid_argument("unknown weighting scheme: " + name);
}

// ============================================================================
// Token-level losses
// ============================================================================

inline double ce(double p) { return -std::log(clamp_prob(p)); }

/// Cosine weight cos(p*pi) + 1: strictly decreasing from 2 at p=0 to 0 at
/// p=1, crossing 1 exactly at p=0.5.
inline double cosw(double p) { return std::cos(p * std::numbers::pi) + 1.0; }

inline double tfl_token(double p, double gamma) {
  p = clamp_prob(p);
  return std::pow(1.0 - p, gamma) * ce(p);
}

inline double tldr_token(double p) {
  p = clamp_prob(p);
  return cosw(p) * ce(p);
}

inline double uniform_token(double p, double w) { return w * ce(p); }

// ============================================================================
// Example-level losses
// ============================================================================

/// Mean token probability of the sequence; low mean = hard example. This is
/// the quantity the cosine weight consumes at the example level, keeping the
/// convention aligned with the token-level weight cosw(p_t).
inline double sequence_easiness(const std::vector<double>& probs) {
  if (probs.empty()) throw std::invalid_argument("sequence_easiness: empty sequence");
  double sum = 0.0;
  for (double p : probs) sum += clamp_prob(p);
  return sum / static_cast<double>(probs.size());
}

inline double sequence_loss_mean(const std::vector<double>& probs) {
  if (probs.empty()) throw std::invalid_argument("sequence_loss_mean: empty sequence");
  double sum = 0.0;
  for (double p : probs) sum += ce(p);
  return sum / static_cast<double>(probs.size());
}

inline double fl_example(const std::vector<double>& probs, double gamma) {
  return std::pow(1.0 - sequence_easiness(probs), gamma) * sequence_loss_mean(probs);
}

inline double ldr_example(const std::vector<double>& probs) {
  return cosw(sequence_easiness(probs)) * sequence_loss_mean(probs);
}

// ============================================================================
// Analytic d/dp gradients of the token losses
// ============================================================================

inline double grad_ce(double p) { return -1.0 / clamp_prob(p); }

inline double grad_tfl(double p, double gamma) {
  p = clamp_prob(p);
  if (gamma == 0.0) return grad_ce(p);
  const double q = 1.0 - p;
  // At p = 1 the weight and its slope both vanish for every gamma > 0, but
  // pow(0, gamma-1) blows up for gamma < 1; return the limit directly.
  if (q <= 0.0) return 0.0;
  return gamma * std::pow(q, gamma - 1.0) * std::log(p) - std::pow(q, gamma) / p;
}

inline double grad_tldr(double p) {
  p = clamp_prob(p);
  const double pi = std::numbers::pi;
  return pi * std::sin(p * pi) * std::log(p) - (std::cos(p * pi) + 1.0) / p;
}

// ============================================================================
// Scheme dispatch
// ============================================================================

/// Multiplier applied to one token's CE loss. Rejects example-level schemes.
inline double token_weight(const WeightingScheme& ws, double p) {
  p = clamp_prob(p);
  switch (ws.kind) {
    case Scheme::CE: return 1.0;
    case Scheme::TFL: return std::pow(1.0 - p, ws.gamma);
    case Scheme::TLDR: return cosw(p);
    case Scheme::Uniform: return ws.uniform_w;
    default: throw std::invalid_argument("token_weight: scheme is example-level");
  }
}

/// Multiplier applied to one sequence's mean CE loss. Rejects token-level
/// schemes.
inline double example_weight(const WeightingScheme& ws, const std::vector<double>& probs) {
  switch (ws.kind) {
    case Scheme::FL: return std::pow(1.0 - sequence_easiness(probs), ws.gamma);
    case Scheme::LDR: return cosw(sequence_easiness(probs));
    default: throw std::invalid_argument("example_weight: scheme is token-level");
  }
}

inline double token_loss(const WeightingScheme& ws, double p) {
  return token_weight(ws, p) * ce(p);
}

inline double example_loss(const WeightingScheme& ws, const std::vector<double>& probs) {
  return example_weight(ws, probs) * sequence_loss_mean(probs);
}

/// Batch reduction: token-level schemes average the weighted loss over every
/// token in the batch; example-level schemes average per-sequence losses over
/// sequences.
inline double weighted_batch_loss(const std::vector<std::vector<double>>& batch,
                                  const WeightingScheme& ws) {
  ws.validate();
  if (batch.empty()) throw std::invalid_argument("weighted_batch_loss: empty batch");
  for (const auto& seq : batch)
    if (seq.empty()) throw std::invalid_argument("weighted_batch_loss: empty sequence");
  if (is_token_level(ws.kind)) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& seq : batch) {
      for (double p : seq) sum += token_loss(ws, p);
      count += seq.size();
    }
    return sum / static_cast<double>(count);
  }
  double sum = 0.0;
  for (const auto& seq : batch) sum += example_loss(ws, seq);
  return sum / static_cast<double>(batch.size());
}

// ============================================================================
// Curve export
// ============================================================================

/// Writes the loss and gradient curves as CSV sampled at p = 0.005 .. 0.995
/// in steps of 0.005 (199 rows plus header). The tfl columns use the given
/// gamma.
inline void write_gradcurve(std::ostream& os, double gamma = 2.0) {
  os << "p,ce,tfl,tldr,grad_ce,grad_tfl,grad_tldr\n";
  char line[256];
  for (int i = 1; i <= 199; ++i) {
    const double p = static_cast<double>(i) * 0.005;
    std::snprintf(line, sizeof(line), "%.3f,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n", p,
                  ce(p), tfl_token(p, gamma), tldr_token(p), grad_ce(p), grad_tfl(p, gamma),
                  grad_tldr(p));
    os << line;
  }
}

}  // namespace replex::loss
