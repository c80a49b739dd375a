// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the replex authors

#pragma once

/// @file config.hpp
/// @brief Training hyperparameters, flat `key = value` config file parsing,
///   and the two named experiment profiles (desk and paper scale).
///
/// Config files hold one `key = value` per line; `#` starts a comment and
/// blank lines are skipped. Unknown keys are rejected so typos fail loudly.

#include <cstdint>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "replex/data.hpp"
#include "replex/loss_weighting.hpp"
#include "replex/seq2seq.hpp"

namespace replex::config {

// ==== training hyperparameters ====

struct TrainConfig {
  loss::WeightingScheme scheme;
  double learning_rate = 0.001;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double clip_norm = 5.0;
  double dropout = 0.1;
  int batch_size = 256;
  int epochs = 5;
  double validation_interval_epochs = 0.5;
  int message_truncation = 128;
  int response_truncation = 32;
  int history_turns = 3;
  uint64_t seed = 7;

  void validate() const {
    scheme.validate();
    if (learning_rate <= 0.0) throw std::invalid_argument("train: learning_rate <= 0");
    if (adam_beta1 < 0.0 || adam_beta1 >= 1.0)
      throw std::invalid_argument("train: adam_beta1 outside [0,1)");
    if (adam_beta2 < 0.0 || adam_beta2 >= 1.0)
      throw std::invalid_argument("train: adam_beta2 outside [0,1)");
    if (clip_norm <= 0.0) throw std::invalid_argument("train: clip_norm <= 0");
    if (dropout < 0.0 || dropout >= 1.0)
      throw std::invalid_argument("train: dropout outside [0,1)");
    if (batch_size < 1) throw std::invalid_argument("train: batch_size < 1");
    if (epochs < 1) throw std::invalid_argument("train: epochs < 1");
    if (validation_interval_epochs <= 0.0 || validation_interval_epochs > 1.0)
      throw std::invalid_argument("train: validation_interval_epochs outside (0,1]");
    if (message_truncation < 1) throw std::invalid_argument("train: message_truncation < 1");
    if (response_truncation < 1) throw std::invalid_argument("train: response_truncation < 1");
    if (history_turns < 1) throw std::invalid_argument("train: history_turns < 1");
  }
};

// ==== named profiles ====

/// A profile bundles the model size, training hyperparameters, and the
/// synthetic corpus spec used when no corpus file is supplied.
struct Profile {
  seq2seq::ModelConfig model;
  TrainConfig train;
  data::SyntheticCorpusSpec synth;
};

/// Laptop-scale profile: small model, short turns, a corpus of about 3000
/// message/response pairs, and a few epochs. Sized so a full run finishes in
/// roughly a minute of single-core CPU.
inline Profile desk_profile() {
  Profile p;
  p.model.attention = seq2seq::Attention::PreConcat;
  p.model.hidden_size = 64;
  p.model.embedding_size = 32;
  p.model.vocab_size = 200;
  p.train.batch_size = 32;
  p.train.epochs = 3;
  p.train.message_truncation = 24;
  p.train.response_truncation = 12;
  p.train.history_turns = 1;
  return p;
}

/// Full-scale profile matching the reference experiment sizes. Needs real
/// dialogue corpora; the bundled synthetic generator is far too small for it.
inline Profile paper_profile() {
  Profile p;
  p.model.attention = seq2seq::Attention::PreConcat;
  p.model.hidden_size = 512;
  p.model.embedding_size = 200;
  p.model.vocab_size = 30000;
  p.train.batch_size = 256;
  p.train.epochs = 20;
  p.train.message_truncation = 128;
  p.train.response_truncation = 32;
  p.train.history_turns = 3;
  p.synth.dialogues = 100000;
  p.synth.background_tokens = 400;
  return p;
}

inline Profile profile_from_name(const std::string& name) {
  if (name == "desk") return desk_profile();
  if (name == "paper") return paper_profile();
  throw std::invalid_argument("unknown profile: " + name + " (expected desk or paper)");
}

// ==== config file parsing ====

namespace detail {

inline std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b])) != 0) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1])) != 0) --e;
  return s.substr(b, e - b);
}

inline double parse_double(const std::string& key, const std::string& value) {
  size_t used = 0;
  double parsed = 0.0;
  try {
    parsed = std::stod(value, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("config key " + key + ": not a number: " + value);
  }
  if (used != value.size())
    throw std::invalid_argument("config key " + key + ": trailing junk in " + value);
  return parsed;
}

inline long long parse_int(const std::string& key, const std::string& value) {
  size_t used = 0;
  long long parsed = 0;
  try {
    parsed = std::stoll(value, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("config key " + key + ": not an integer: " + value);
  }
  if (used != value.size())
    throw std::invalid_argument("config key " + key + ": trailing junk in " + value);
  return parsed;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw std::invalid_argument("config key " + key + ": expected true/false: " + value);
}

}  // namespace detail

/// Parses `key = value` lines into an ordered map. Later duplicates override
/// earlier ones, mirroring how flags later override file values.
inline std::map<std::string, std::string> parse_config_stream(std::istream& in) {
  std::map<std::string, std::string> entries;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty key");
    if (value.empty())
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty value");
    entries[key] = value;
  }
  return entries;
}

/// Applies parsed entries onto a profile in place. Unknown keys throw.
inline void apply_config(const std::map<std::string, std::string>& entries, Profile& profile) {
  using detail::parse_bool;
  using detail::parse_double;
  using detail::parse_int;
  for (const auto& [key, value] : entries) {
    if (key == "scheme") {
      profile.train.scheme.kind = loss::scheme_from_name(value);
    } else if (key == "gamma") {
      profile.train.scheme.gamma = parse_double(key, value);
    } else if (key == "uniform_w") {
      profile.train.scheme.uniform_w = parse_double(key, value);
    } else if (key == "attention") {
      profile.model.attention = seq2seq::attention_from_name(value);
    } else if (key == "encoder_layers") {
      profile.model.encoder_layers = static_cast<int>(parse_int(key, value));
    } else if (key == "decoder_layers") {
      profile.model.decoder_layers = static_cast<int>(parse_int(key, value));
    } else if (key == "hidden_size") {
      profile.model.hidden_size = static_cast<int>(parse_int(key, value));
    } else if (key == "embedding_size") {
      profile.model.embedding_size = static_cast<int>(parse_int(key, value));
    } else if (key == "vocab_size") {
      profile.model.vocab_size = static_cast<int>(parse_int(key, value));
    } else if (key == "tie_embeddings") {
      profile.model.tie_embeddings = parse_bool(key, value);
    } else if (key == "learning_rate") {
      profile.train.learning_rate = parse_double(key, value);
    } else if (key == "adam_beta1") {
      profile.train.adam_beta1 = parse_double(key, value);
    } else if (key == "adam_beta2") {
      profile.train.adam_beta2 = parse_double(key, value);
    } else if (key == "clip_norm") {
      profile.train.clip_norm = parse_double(key, value);
    } else if (key == "dropout") {
      profile.train.dropout = parse_double(key, value);
      profile.model.dropout = profile.train.dropout;
    } else if (key == "batch_size") {
      profile.train.batch_size = static_cast<int>(parse_int(key, value));
    } else if (key == "epochs") {
      profile.train.epochs = static_cast<int>(parse_int(key, value));
    } else if (key == "validation_interval_epochs") {
      profile.train.validation_interval_epochs = parse_double(key, value);
    } else if (key == "message_truncation") {
      profile.train.message_truncation = static_cast<int>(parse_int(key, value));
    } else if (key == "response_truncation") {
      profile.train.response_truncation = static_cast<int>(parse_int(key, value));
    } else if (key == "history_turns") {
      profile.train.history_turns = static_cast<int>(parse_int(key, value));
    } else if (key == "seed") {
      profile.train.seed = static_cast<uint64_t>(parse_int(key, value));
    } else if (key == "synthetic_dialogues") {
      profile.synth.dialogues = static_cast<int>(parse_int(key, value));
    } else if (key == "synthetic_background_tokens") {
      profile.synth.background_tokens = static_cast<int>(parse_int(key, value));
    } else if (key == "synthetic_hard_tokens") {
      profile.synth.hard_tokens = static_cast<int>(parse_int(key, value));
    } else if (key == "synthetic_zipf_exponent") {
      profile.synth.zipf_exponent = parse_double(key, value);
    } else if (key == "synthetic_easy_fraction") {
      profile.synth.easy_fraction = parse_double(key, value);
    } else {
      throw std::invalid_argument("unknown config key: " + key);
    }
  }
}

}  // namespace replex::config
