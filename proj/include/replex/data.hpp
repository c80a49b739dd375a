// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the replex authors

#pragma once

/// @file data.hpp
/// @brief Corpus ingestion for dialogue training: a rule tokenizer, a
///   blank-line-delimited corpus format with a TSV converter, frequency-ranked
///   vocabulary construction, message/response pair extraction with history
///   windows, and a synthetic corpus generator with controllable hard tokens.
///
/// The synthetic generator is the test bed for the reweighting experiments.
/// Every message ends with a trigger token; all triggers share one zipf rank
/// distribution, and each rank maps to one of three response shapes:
///   - loop triggers r_m: the response repeats a fixed two-token opener, sized
///     so that training truncation cuts the end-of-sequence target. A model
///     that has learned nothing else produces this loop at full generation
///     length, and no other response token is anywhere near as frequent, so
///     the loop is the default continuation at every decoding step.
///   - phrase triggers q_j (spread evenly across the rank order, down to
///     ranks with a few dozen occurrences): the response is `opener h_j`.
///     Predicting h_j requires carrying the specific trigger across the
///     encoder; until a link resolves, the opener continues into the loop.
///     The rank spread is steep, so the rare links separate training schemes:
///     a scheme that concentrates gradient on low-probability targets flips
///     them off the loop within the epoch budget, one that spreads gradient
///     evenly does not.
///   - list triggers e_k (a handful of common ranks): the response is a run
///     of fixed tokens owned by that trigger. Every scheme masters the lists
///     early, and their token spread keeps pooled generation diversity well
///     above the degenerate-checkpoint level without touching the
///     repetition-weighted counts.
///   - ambiguous triggers a_t (mid-frequency ranks): the response is drawn
///     per dialogue, the loop with probability from a per-trigger ladder
///     around one half, otherwise `opener h_{n+t}` with a payload owned by
///     the trigger. Both continuations stay valid forever, so greedy
///     decoding settles on whichever side the training scheme's residual
///     preference for already-confident tokens favors; the ladder spreads
///     the triggers across that threshold. These messages separate schemes
///     at convergence, not just during training.
/// Interleaving loop and phrase triggers across the whole rank order matters:
/// no global feature separates the shapes, so an under-trained trigger
/// regresses to the concentrated majority loop instead of to the most common
/// phrase. The repetition metrics then count exactly the unresolved links.
/// Filler tokens are common by construction (each above 5% of the corpus) and
/// hard tokens rare (each below 1%), keeping the split measurable.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "replex/rng.hpp"

namespace replex::data {

// ==== reserved token ids ====

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kEosId = 2;
inline constexpr int kSepId = 3;
inline constexpr int kReservedTokens = 4;

inline const char* reserved_surface(int id) {
  switch (id) {
    case kPadId: return "<pad>";
    case kUnkId: return "<unk>";
    case kEosId: return "<eos>";
    case kSepId: return "<sep>";
    default: throw std::invalid_argument("reserved_surface: id out of range");
  }
}

// ==== tokenizer ====

/// Lowercases and splits on whitespace, then splits the punctuation marks
/// . , ! ? ' " into separate tokens. An apostrophe flanked by alphanumerics
/// stays inside its word, so contractions like "i've" survive as one token.
inline std::vector<std::string> tokenize(const std::string& utterance) {
  auto is_split_punct = [](char c) {
    return c == '.' || c == ',' || c == '!' || c == '?' || c == '\'' || c == '"';
  };
  auto is_alnum = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
  };

  std::vector<std::string> tokens;
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    std::string current;
    for (size_t i = 0; i < word.size(); ++i) {
      const char c = word[i];
      const bool keep_apostrophe = c == '\'' && i > 0 && i + 1 < word.size() &&
                                   is_alnum(word[i - 1]) && is_alnum(word[i + 1]);
      if (is_split_punct(c) && !keep_apostrophe) {
        if (!current.empty()) tokens.push_back(std::move(current));
        current.clear();
        tokens.push_back(std::string(1, c));
      } else {
        current.push_back(c);
      }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    word.clear();
  };

  for (char raw : utterance) {
    const auto uc = static_cast<unsigned char>(raw);
    if (std::isspace(uc) != 0) {
      flush();
    } else {
      word.push_back(static_cast<char>(std::tolower(uc)));
    }
  }
  flush();
  return tokens;
}

// ==== corpus ====

using Dialogue = std::vector<std::string>;

struct Corpus {
  std::vector<Dialogue> dialogues;
};

namespace detail {

inline bool blank_line(const std::string& line) {
  for (char c : line)
    if (std::isspace(static_cast<unsigned char>(c)) == 0) return false;
  return true;
}

inline std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace detail

/// Reads blank-line-separated dialogue blocks, one turn per line. Blocks with
/// fewer than two turns carry no message/response pair and are dropped.
inline Corpus read_corpus(std::istream& in) {
  Corpus corpus;
  Dialogue current;
  auto flush = [&] {
    if (current.size() >= 2) corpus.dialogues.push_back(current);
    current.clear();
  };
  std::string line;
  while (std::getline(in, line)) {
    line = detail::strip_cr(std::move(line));
    if (detail::blank_line(line)) {
      flush();
    } else {
      current.push_back(line);
    }
  }
  flush();
  return corpus;
}

inline void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (size_t d = 0; d < corpus.dialogues.size(); ++d) {
    if (d > 0) out << '\n';
    for (const std::string& turn : corpus.dialogues[d]) out << turn << '\n';
  }
}

/// Converts `message<TAB>response` lines into 2-turn dialogues.
inline Corpus read_tsv_corpus(std::istream& in) {
  Corpus corpus;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::strip_cr(std::move(line));
    if (detail::blank_line(line)) continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("tsv line " + std::to_string(line_no) +
                               ": expected message<TAB>response");
    std::string message = line.substr(0, tab);
    std::string response = line.substr(tab + 1);
    if (detail::blank_line(message) || detail::blank_line(response))
      throw std::runtime_error("tsv line " + std::to_string(line_no) +
                               ": empty message or response");
    corpus.dialogues.push_back({std::move(message), std::move(response)});
  }
  return corpus;
}

// ==== vocabulary ====

/// Token-to-id map with dense ids. Ids 0..3 are reserved for padding, unknown,
/// end-of-sequence, and the turn separator. Surface tokens rank by descending
/// frequency with lexicographic tie-break, so rebuilding from the same corpus
/// reproduces the same map.
class Vocabulary {
 public:
  Vocabulary() {
    for (int id = 0; id < kReservedTokens; ++id) add(reserved_surface(id));
  }

  static Vocabulary build(const Corpus& corpus, int max_size) {
    if (max_size < kReservedTokens)
      throw std::invalid_argument("Vocabulary::build: max_size below reserved count");
    std::map<std::string, long long> counts;
    for (const Dialogue& dialogue : corpus.dialogues)
      for (const std::string& turn : dialogue)
        for (std::string& token : tokenize(turn)) ++counts[std::move(token)];

    std::vector<std::pair<std::string, long long>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });

    Vocabulary vocab;
    for (const auto& [token, count] : ranked) {
      if (vocab.size() >= max_size) break;
      if (vocab.token_to_id_.count(token) > 0) continue;  // reserved surface in corpus
      vocab.add(token);
    }
    return vocab;
  }

  /// Rebuilds a vocabulary from an explicit id-ordered token list, as stored
  /// in checkpoints. The list must start with the four reserved surfaces.
  static Vocabulary from_ordered_tokens(const std::vector<std::string>& tokens) {
    if (tokens.size() < kReservedTokens)
      throw std::invalid_argument("vocabulary list shorter than reserved prefix");
    for (int id = 0; id < kReservedTokens; ++id)
      if (tokens[id] != reserved_surface(id))
        throw std::invalid_argument("vocabulary list has wrong reserved prefix at id " +
                                    std::to_string(id));
    Vocabulary vocab;
    for (size_t id = kReservedTokens; id < tokens.size(); ++id) {
      if (vocab.token_to_id_.count(tokens[id]) > 0)
        throw std::invalid_argument("duplicate vocabulary token: " + tokens[id]);
      vocab.add(tokens[id]);
    }
    return vocab;
  }

  int id(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnkId : it->second;
  }

  const std::string& token(int id) const {
    if (id < 0 || id >= size()) throw std::out_of_range("Vocabulary::token: bad id");
    return id_to_token_[static_cast<size_t>(id)];
  }

  int size() const { return static_cast<int>(id_to_token_.size()); }

  const std::vector<std::string>& id_order() const { return id_to_token_; }

  std::vector<int> encode(const std::vector<std::string>& tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const std::string& token : tokens) ids.push_back(id(token));
    return ids;
  }

  std::vector<std::string> decode(const std::vector<int>& ids) const {
    std::vector<std::string> tokens;
    tokens.reserve(ids.size());
    for (int one : ids) tokens.push_back(token(one));
    return tokens;
  }

 private:
  void add(const std::string& token) {
    token_to_id_.emplace(token, size());
    id_to_token_.push_back(token);
  }

  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

// ==== message/response pair extraction ====

using Pair = std::pair<std::vector<int>, std::vector<int>>;

/// Builds one pair per turn t >= 2 of each dialogue: the message concatenates
/// up to `history_turns` preceding turns joined by the separator id and keeps
/// its most recent `message_truncation` ids; the response is turn t cut to its
/// first `response_truncation` ids. Out-of-vocabulary tokens map to unknown.
inline std::vector<Pair> build_pairs(const Corpus& corpus, const Vocabulary& vocab,
                                     int history_turns, int message_truncation,
                                     int response_truncation) {
  if (history_turns < 1) throw std::invalid_argument("build_pairs: history_turns < 1");
  if (message_truncation < 1 || response_truncation < 1)
    throw std::invalid_argument("build_pairs: truncations must be positive");

  std::vector<Pair> pairs;
  for (const Dialogue& dialogue : corpus.dialogues) {
    if (dialogue.size() < 2) continue;
    std::vector<std::vector<int>> turn_ids;
    turn_ids.reserve(dialogue.size());
    for (const std::string& turn : dialogue) turn_ids.push_back(vocab.encode(tokenize(turn)));

    for (size_t t = 1; t < dialogue.size(); ++t) {
      const size_t first = t > static_cast<size_t>(history_turns)
                               ? t - static_cast<size_t>(history_turns)
                               : 0;
      std::vector<int> message;
      for (size_t u = first; u < t; ++u) {
        if (u > first) message.push_back(kSepId);
        message.insert(message.end(), turn_ids[u].begin(), turn_ids[u].end());
      }
      if (message.size() > static_cast<size_t>(message_truncation))
        message.erase(message.begin(),
                      message.end() - static_cast<size_t>(message_truncation));

      std::vector<int> response = turn_ids[t];
      if (response.size() > static_cast<size_t>(response_truncation))
        response.resize(static_cast<size_t>(response_truncation));

      if (message.empty() || response.empty()) continue;
      pairs.emplace_back(std::move(message), std::move(response));
    }
  }
  return pairs;
}

/// Deterministic suffix split at dialogue granularity, so vocabularies can be
/// built from the training split alone before any pair extraction.
inline void split_corpus(const Corpus& corpus, double valid_fraction, Corpus& train_out,
                         Corpus& valid_out) {
  if (corpus.dialogues.size() < 2)
    throw std::invalid_argument("split_corpus: need at least 2 dialogues");
  if (valid_fraction <= 0.0 || valid_fraction >= 1.0)
    throw std::invalid_argument("split_corpus: valid_fraction outside (0,1)");
  size_t valid_count = static_cast<size_t>(
      std::llround(valid_fraction * static_cast<double>(corpus.dialogues.size())));
  valid_count = std::max<size_t>(1, std::min(valid_count, corpus.dialogues.size() - 1));
  const size_t cut = corpus.dialogues.size() - valid_count;
  train_out.dialogues.assign(corpus.dialogues.begin(),
                             corpus.dialogues.begin() + static_cast<long>(cut));
  valid_out.dialogues.assign(corpus.dialogues.begin() + static_cast<long>(cut),
                             corpus.dialogues.end());
}

// ==== synthetic corpus ====

/// Knobs for the synthetic hard-token corpus. `hard_tokens` counts the phrase
/// triggers q_j and their bound response tokens h_j; the remaining zipf ranks
/// map to loop triggers, except for a handful of common ranks reserved for
/// list triggers, so that roughly `easy_fraction` of the rank positions map
/// to a non-phrase response. Setting `hard_tokens` to 0 degenerates into
/// plain frequency-sampled text with no dialogue structure.
struct SyntheticCorpusSpec {
  int dialogues = 3000;
  int background_tokens = 40;    // b0..b{n-1}, zipf-distributed message mass
  int hard_tokens = 16;          // phrase triggers q_j with h_j in the response
  double zipf_exponent = 0.75;   // background frequency decay
  double trigger_exponent = 1.3; // trigger frequency decay; rarest links train slowest
  double easy_fraction = 0.6;    // share of trigger ranks not mapping to a phrase
  int min_repeats = 6;           // opener repetitions in loop responses
  int max_repeats = 6;
  int min_message_tokens = 4;    // message length range, trigger included
  int max_message_tokens = 7;
  double filler_prob = 0.6;      // chance a message slot draws f2..f4
  int tail_tokens = 0;           // trigger-specific tail tokens after h_j
  uint64_t seed = 7;

  void validate() const {
    if (dialogues < 1) throw std::invalid_argument("synthetic: dialogues < 1");
    if (background_tokens < 1) throw std::invalid_argument("synthetic: background_tokens < 1");
    if (hard_tokens < 0) throw std::invalid_argument("synthetic: hard_tokens < 0");
    if (zipf_exponent < 0.0) throw std::invalid_argument("synthetic: zipf_exponent < 0");
    if (trigger_exponent < 0.0) throw std::invalid_argument("synthetic: trigger_exponent < 0");
    if (easy_fraction < 0.0 || easy_fraction >= 1.0)
      throw std::invalid_argument("synthetic: easy_fraction outside [0,1)");
    if (min_repeats < 2 || max_repeats < min_repeats)
      throw std::invalid_argument("synthetic: bad repeat range");
    if (min_message_tokens < 2 || max_message_tokens < min_message_tokens)
      throw std::invalid_argument("synthetic: bad message length range");
    if (filler_prob < 0.0 || filler_prob > 1.0)
      throw std::invalid_argument("synthetic: filler_prob outside [0,1]");
    if (tail_tokens < 0) throw std::invalid_argument("synthetic: tail_tokens < 0");
  }
};

inline Corpus generate_synthetic_corpus(const SyntheticCorpusSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  std::vector<double> zipf(static_cast<size_t>(spec.background_tokens));
  for (int i = 0; i < spec.background_tokens; ++i)
    zipf[static_cast<size_t>(i)] = std::pow(static_cast<double>(i + 1), -spec.zipf_exponent);

  // One zipf over all trigger ranks. Phrase triggers spread evenly across the
  // rank order (Bresenham). The non-phrase ranks assign in rank order: the
  // top rank anchors the loop, the next few go to lists (keeping every list
  // common), the few after that to ambiguous triggers (mid-frequency, enough
  // occurrences to pin their loop/phrase ratios), and the long tail of ranks
  // to more loop triggers.
  const long long phrase_count = spec.hard_tokens;
  const long long total_triggers =
      std::max<long long>(phrase_count,
                          std::llround(static_cast<double>(phrase_count) /
                                       std::max(1.0 - spec.easy_fraction, 1e-9)));
  std::vector<double> trigger_zipf(static_cast<size_t>(std::max<long long>(total_triggers, 1)));
  for (size_t i = 0; i < trigger_zipf.size(); ++i)
    trigger_zipf[i] = std::pow(static_cast<double>(i + 1), -spec.trigger_exponent);
  enum class Shape { kLoop, kPhrase, kList, kAmbiguous };
  constexpr int kListTriggers = 3;
  constexpr int kListItems = 8;
  constexpr double kAmbiguousLoopProb[] = {0.35, 0.45, 0.50, 0.55, 0.65};
  constexpr int kAmbiguousTriggers =
      static_cast<int>(sizeof(kAmbiguousLoopProb) / sizeof(kAmbiguousLoopProb[0]));
  std::vector<Shape> shape(trigger_zipf.size(), Shape::kLoop);
  std::vector<std::string> trigger_surface(trigger_zipf.size());
  std::vector<int> shape_index(trigger_zipf.size(), -1);
  for (long long r = 0, loops = 0, lists = 0, ambiguous = 0, others = 0; r < total_triggers;
       ++r) {
    const long long before = r * phrase_count / total_triggers;
    const long long after = (r + 1) * phrase_count / total_triggers;
    if (after > before) {
      shape[static_cast<size_t>(r)] = Shape::kPhrase;
      shape_index[static_cast<size_t>(r)] = static_cast<int>(after - 1);
      trigger_surface[static_cast<size_t>(r)] = "q" + std::to_string(after - 1);
    } else if (others++ < 1) {
      trigger_surface[static_cast<size_t>(r)] = "r" + std::to_string(loops++);
    } else if (lists < kListTriggers) {
      shape[static_cast<size_t>(r)] = Shape::kList;
      shape_index[static_cast<size_t>(r)] = static_cast<int>(lists);
      trigger_surface[static_cast<size_t>(r)] = "e" + std::to_string(lists++);
    } else if (ambiguous < kAmbiguousTriggers) {
      shape[static_cast<size_t>(r)] = Shape::kAmbiguous;
      shape_index[static_cast<size_t>(r)] = static_cast<int>(ambiguous);
      trigger_surface[static_cast<size_t>(r)] = "a" + std::to_string(ambiguous++);
    } else {
      trigger_surface[static_cast<size_t>(r)] = "r" + std::to_string(loops++);
    }
  }

  auto background = [&] { return "b" + std::to_string(rng.sample_weighted(zipf)); };
  auto message_slot = [&]() -> std::string {
    if (spec.filler_prob > 0.0 && rng.next_double() < spec.filler_prob)
      return "f" + std::to_string(2 + static_cast<int>(rng.next_below(3)));
    return background();
  };
  auto join = [](const std::vector<std::string>& tokens) {
    std::string line;
    for (size_t i = 0; i < tokens.size(); ++i) {
      if (i > 0) line += ' ';
      line += tokens[i];
    }
    return line;
  };

  Corpus corpus;
  corpus.dialogues.reserve(static_cast<size_t>(spec.dialogues));
  const int message_span = spec.max_message_tokens - spec.min_message_tokens + 1;

  for (int d = 0; d < spec.dialogues; ++d) {
    if (spec.hard_tokens == 0) {
      // Degenerate spec: two turns of plain frequency-sampled text.
      std::vector<std::string> message, response;
      const int mlen = spec.min_message_tokens + static_cast<int>(rng.next_below(
                                                     static_cast<uint64_t>(message_span)));
      const int rlen = spec.min_message_tokens + static_cast<int>(rng.next_below(
                                                     static_cast<uint64_t>(message_span)));
      for (int i = 0; i < mlen; ++i) message.push_back(message_slot());
      for (int i = 0; i < rlen; ++i) response.push_back(message_slot());
      corpus.dialogues.push_back({join(message), join(response)});
      continue;
    }

    const size_t rank = rng.sample_weighted(trigger_zipf);
    const int mlen = spec.min_message_tokens + static_cast<int>(rng.next_below(
                                                   static_cast<uint64_t>(message_span)));
    std::vector<std::string> message, response;
    for (int i = 0; i + 1 < mlen; ++i) message.push_back(message_slot());
    message.push_back(trigger_surface[rank]);

    auto loop_response = [&] {
      const int repeats =
          spec.min_repeats +
          static_cast<int>(rng.next_below(
              static_cast<uint64_t>(spec.max_repeats - spec.min_repeats + 1)));
      for (int r = 0; r < repeats; ++r) {
        response.push_back("f0");
        response.push_back("f1");
      }
    };
    switch (shape[rank]) {
      case Shape::kPhrase:
        response.push_back("f0");
        response.push_back("f1");
        response.push_back("h" + std::to_string(shape_index[rank]));
        for (int i = 0; i < spec.tail_tokens; ++i)
          response.push_back("u" + std::to_string(shape_index[rank] * spec.tail_tokens + i));
        break;
      case Shape::kList:
        for (int i = 0; i < kListItems; ++i)
          response.push_back("d" + std::to_string(shape_index[rank] * kListItems + i));
        break;
      case Shape::kAmbiguous:
        if (rng.next_double() < kAmbiguousLoopProb[shape_index[rank]]) {
          loop_response();
        } else {
          // Payload owned by the trigger, indexed past the phrase payloads.
          // A shared payload would couple the triggers into one collective
          // loop-or-phrase mode that flips whole epochs at a time.
          response.push_back("f0");
          response.push_back("f1");
          response.push_back("h" + std::to_string(spec.hard_tokens + shape_index[rank]));
        }
        break;
      case Shape::kLoop:
        loop_response();
        break;
    }
    corpus.dialogues.push_back({join(message), join(response)});
  }
  return corpus;
}

}  // namespace replex::data
