#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the replex authors

/**
 * @file text_metrics.hpp
 * @brief N-gram repetition and quality metrics over token sequences.
 *
 * Provides distinct-k, the DIMEN diversity family (per-utterance u_dimen,
 * pooled corpus l_dimen), u_dimen score histograms with a weighted L2 norm
 * (wl2, lower = less repetitive corpus), and corpus BLEU-4.
 *
 * All functions are templated on the token type; tokens only need operator==
 * and operator< (strings at the surface layer, integer ids inside the
 * training loop). Everything here is a pure function, safe to call from
 * multiple threads.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace replex::metrics {

// ============================================================================
// Configuration
// ============================================================================

/// Weights for combining distinct-k scores of orders 1..n into one DIMEN
/// score. Defaults follow the common setup: orders 1..4, equally weighted.
struct DimenConfig {
  int n = 4;
  std::vector<double> alpha = {0.25, 0.25, 0.25, 0.25};

  void validate() const {
    if (n < 1) throw std::invalid_argument("DimenConfig: n must be >= 1");
    if (static_cast<int>(alpha.size()) != n)
      throw std::invalid_argument("DimenConfig: alpha length must equal n");
    double sum = 0.0;
    for (double a : alpha) {
      if (a < 0.0) throw std::invalid_argument("DimenConfig: alpha must be non-negative");
      sum += a;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("DimenConfig: alpha must sum to 1");
  }
};

/// Histogram binning and bin weights for the weighted L2 norm over u_dimen
/// scores. [0,1] is split into m equal-width bins, left-closed right-open,
/// except the last bin which also contains 1.0. Defaults: 10 bins with
/// weights decreasing from 0.9 (most repetitive bin) to 0.0 (most diverse).
struct Wl2Config {
  int m = 10;
  std::vector<double> beta = {0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.0};

  void validate() const {
    if (m < 1) throw std::invalid_argument("Wl2Config: m must be >= 1");
    if (static_cast<int>(beta.size()) != m)
      throw std::invalid_argument("Wl2Config: beta length must equal m");
    for (double b : beta)
      if (b < 0.0) throw std::invalid_argument("Wl2Config: beta must be non-negative");
  }
};

using Histogram = std::vector<long long>;

// ============================================================================
// N-gram primitives
// ============================================================================

/// All contiguous k-grams of seq, in order, duplicates preserved.
/// Returns max(len-k+1, 0) grams. k = 0 is rejected.
template <class Token>
std::vector<std::vector<Token>> ngrams(const std::vector<Token>& seq, int k) {
  if (k < 1) throw std::invalid_argument("ngrams: k must be >= 1");
  std::vector<std::vector<Token>> out;
  if (seq.size() < static_cast<std::size_t>(k)) return out;
  const std::size_t count = seq.size() - static_cast<std::size_t>(k) + 1;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    out.emplace_back(seq.begin() + i, seq.begin() + i + k);
  return out;
}

/// distinct-k: |unique k-grams| / max(len - k, 1), clamped to [0,1].
/// Sequences shorter than k score exactly 1.0 (nothing repeats).
template <class Token>
double distinct(const std::vector<Token>& seq, int k) {
  if (k < 1) throw std::invalid_argument("distinct: k must be >= 1");
  if (seq.size() < static_cast<std::size_t>(k)) return 1.0;
  std::set<std::vector<Token>> seen;
  for (auto& g : ngrams(seq, k)) seen.insert(std::move(g));
  const double denom =
      static_cast<double>(std::max<std::size_t>(seq.size() - static_cast<std::size_t>(k), 1));
  return std::min(1.0, static_cast<double>(seen.size()) / denom);
}

/// Utterance-level DIMEN: alpha-weighted sum of distinct-k for k = 1..n.
template <class Token>
double u_dimen(const std::vector<Token>& seq, const DimenConfig& cfg = {}) {
  cfg.validate();
  double score = 0.0;
  for (int k = 1; k <= cfg.n; ++k) score += cfg.alpha[k - 1] * distinct(seq, k);
  return score;
}

/// Corpus-level DIMEN: k-grams are pooled across utterances (never spanning
/// an utterance boundary) and the denominator is the pooled unigram count
/// minus k. Degenerates to u_dimen for a single utterance; an empty list
/// scores 1.0.
template <class Token>
double l_dimen(const std::vector<std::vector<Token>>& utterances, const DimenConfig& cfg = {}) {
  cfg.validate();
  std::size_t total_unigrams = 0;
  for (const auto& u : utterances) total_unigrams += u.size();
  double score = 0.0;
  for (int k = 1; k <= cfg.n; ++k) {
    double ratio;
    if (total_unigrams < static_cast<std::size_t>(k)) {
      ratio = 1.0;
    } else {
      std::set<std::vector<Token>> seen;
      for (const auto& u : utterances)
        for (auto& g : ngrams(u, k)) seen.insert(std::move(g));
      const double denom = static_cast<double>(
          std::max<std::size_t>(total_unigrams - static_cast<std::size_t>(k), 1));
      ratio = std::min(1.0, static_cast<double>(seen.size()) / denom);
    }
    score += cfg.alpha[k - 1] * ratio;
  }
  return score;
}

// ============================================================================
// Histogram + weighted L2
// ============================================================================

/// Bin u_dimen scores into cfg.m equal-width bins over [0,1].
/// Scores outside [0,1] are rejected.
inline Histogram histogram(const std::vector<double>& scores, const Wl2Config& cfg = {}) {
  cfg.validate();
  Histogram counts(static_cast<std::size_t>(cfg.m), 0);
  for (double s : scores) {
    if (!(s >= 0.0 && s <= 1.0))
      throw std::invalid_argument("histogram: score outside [0,1]");
    auto bin = static_cast<long long>(s * cfg.m);
    if (bin >= cfg.m) bin = cfg.m - 1;  // s == 1.0 goes into the last bin
    ++counts[static_cast<std::size_t>(bin)];
  }
  return counts;
}

/// Weighted L2 norm of a histogram: sqrt(sum_i beta_i * counts_i^2).
/// With beta decreasing toward the diverse bins, lower wl2 means fewer
/// utterances piled up in the repetitive end of the histogram.
inline double wl2(const Histogram& hist, const Wl2Config& cfg = {}) {
  cfg.validate();
  if (hist.size() != static_cast<std::size_t>(cfg.m))
    throw std::invalid_argument("wl2: histogram length must equal m");
  double acc = 0.0;
  for (std::size_t i = 0; i < hist.size(); ++i) {
    const auto c = static_cast<double>(hist[i]);
    acc += cfg.beta[i] * c * c;
  }
  return std::sqrt(acc);
}

// ============================================================================
// Corpus BLEU-4
// ============================================================================

namespace detail {

template <class Token>
std::map<std::vector<Token>, long long> ngram_counts(const std::vector<Token>& seq, int k) {
  std::map<std::vector<Token>, long long> counts;
  for (auto& g : ngrams(seq, k)) ++counts[std::move(g)];
  return counts;
}

}  // namespace detail

/// Corpus-level BLEU with orders 1..4, uniform weights, clipped counts and
/// brevity penalty. One reference per hypothesis. Zero match counts are
/// smoothed with 1e-9 so a single empty order does not zero the corpus
/// score; orders with no hypothesis n-grams at all count as precision 1.
template <class Token>
double bleu4(const std::vector<std::vector<Token>>& hypotheses,
             const std::vector<std::vector<Token>>& references) {
  if (hypotheses.size() != references.size())
    throw std::invalid_argument("bleu4: hypothesis/reference count mismatch");

  constexpr int kMaxOrder = 4;
  constexpr double kEps = 1e-9;
  long long matched[kMaxOrder] = {0, 0, 0, 0};
  long long total[kMaxOrder] = {0, 0, 0, 0};
  long long hyp_len = 0;
  long long ref_len = 0;

  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const auto& hyp = hypotheses[i];
    const auto& ref = references[i];
    hyp_len += static_cast<long long>(hyp.size());
    ref_len += static_cast<long long>(ref.size());
    for (int k = 1; k <= kMaxOrder; ++k) {
      auto hyp_counts = detail::ngram_counts(hyp, k);
      auto ref_counts = detail::ngram_counts(ref, k);
      for (const auto& [gram, count] : hyp_counts) {
        total[k - 1] += count;
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) matched[k - 1] += std::min(count, it->second);
      }
    }
  }

  double log_precision_sum = 0.0;
  for (int k = 0; k < kMaxOrder; ++k) {
    double p;
    if (total[k] == 0) {
      p = 1.0;
    } else if (matched[k] == 0) {
      p = kEps / static_cast<double>(total[k]);
    } else {
      p = static_cast<double>(matched[k]) / static_cast<double>(total[k]);
    }
    log_precision_sum += 0.25 * std::log(p);
  }

  double brevity = 1.0;
  if (hyp_len == 0) return ref_len == 0 ? 1.0 : 0.0;
  if (hyp_len < ref_len)
    brevity = std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  return brevity * std::exp(log_precision_sum);
}

}  // namespace replex::metrics
