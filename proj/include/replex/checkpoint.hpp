// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the replex authors

#pragma once

/// @file checkpoint.hpp
/// @brief Text checkpoint format for trained models. Parameters serialize as
///   base-16 64-bit patterns, so save/load round-trips are bit-exact and a
///   reloaded model evaluates to exactly the same metrics.
///
/// Layout, in order:
///   replex-checkpoint v1
///   seed <u64> / epoch <int> / validation_wl2 <hex double>
///   model <attention> <enc> <dec> <hidden> <embed> <vocab> <dropout hex> <tied>
///   vocab <n> followed by n tokens in id order (reserved prefix included)
///   tensor <name> <rows> <cols> followed by rows*cols hex doubles
///   end

#include <bit>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "replex/data.hpp"
#include "replex/seq2seq.hpp"

namespace replex::checkpoint {

inline constexpr const char* kMagic = "replex-checkpoint";
inline constexpr const char* kVersion = "v1";

// ==== bit-exact double encoding ====

inline std::string double_to_hex(double v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(std::bit_cast<uint64_t>(v)));
  return std::string(buf);
}

inline double hex_to_double(const std::string& s) {
  if (s.size() != 16) throw std::runtime_error("checkpoint: bad hex double: " + s);
  size_t used = 0;
  uint64_t bits = 0;
  try {
    bits = std::stoull(s, &used, 16);
  } catch (const std::exception&) {
    throw std::runtime_error("checkpoint: bad hex double: " + s);
  }
  if (used != s.size()) throw std::runtime_error("checkpoint: bad hex double: " + s);
  return std::bit_cast<double>(bits);
}

// ==== save ====

inline void save_checkpoint(std::ostream& out, const seq2seq::Model& model,
                            const data::Vocabulary& vocab, uint64_t seed, int epoch,
                            double validation_wl2) {
  const seq2seq::ModelConfig& cfg = model.config();
  out << kMagic << ' ' << kVersion << '\n';
  out << "seed " << seed << '\n';
  out << "epoch " << epoch << '\n';
  out << "validation_wl2 " << double_to_hex(validation_wl2) << '\n';
  out << "model " << seq2seq::attention_name(cfg.attention) << ' ' << cfg.encoder_layers << ' '
      << cfg.decoder_layers << ' ' << cfg.hidden_size << ' ' << cfg.embedding_size << ' '
      << cfg.vocab_size << ' ' << double_to_hex(cfg.dropout) << ' '
      << (cfg.tie_embeddings ? 1 : 0) << '\n';
  out << "vocab " << vocab.size() << '\n';
  for (const std::string& token : vocab.id_order()) out << token << '\n';
  for (const auto& [name, tensor] : model.parameters()) {
    out << "tensor " << name << ' ' << tensor->rows << ' ' << tensor->cols << '\n';
    for (int i = 0; i < tensor->size(); ++i) {
      out << double_to_hex(tensor->value[static_cast<size_t>(i)]);
      out << ((i + 1) % 8 == 0 || i + 1 == tensor->size() ? '\n' : ' ');
    }
  }
  out << "end\n";
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

// ==== load ====

struct LoadedCheckpoint {
  seq2seq::ModelConfig config;
  std::shared_ptr<seq2seq::Model> model;
  data::Vocabulary vocab;
  uint64_t seed = 0;
  int epoch = 0;
  double validation_wl2 = 0.0;
};

namespace detail {

inline std::string expect_word(std::istream& in, const char* what) {
  std::string word;
  if (!(in >> word)) throw std::runtime_error(std::string("checkpoint: missing ") + what);
  return word;
}

inline void expect_keyword(std::istream& in, const std::string& keyword) {
  const std::string got = expect_word(in, keyword.c_str());
  if (got != keyword)
    throw std::runtime_error("checkpoint: expected " + keyword + ", got " + got);
}

}  // namespace detail

inline LoadedCheckpoint load_checkpoint(std::istream& in) {
  using detail::expect_keyword;
  using detail::expect_word;

  expect_keyword(in, kMagic);
  expect_keyword(in, kVersion);

  LoadedCheckpoint loaded;
  expect_keyword(in, "seed");
  loaded.seed = std::stoull(expect_word(in, "seed value"));
  expect_keyword(in, "epoch");
  loaded.epoch = std::stoi(expect_word(in, "epoch value"));
  expect_keyword(in, "validation_wl2");
  loaded.validation_wl2 = hex_to_double(expect_word(in, "validation_wl2 value"));

  expect_keyword(in, "model");
  loaded.config.attention = seq2seq::attention_from_name(expect_word(in, "attention"));
  loaded.config.encoder_layers = std::stoi(expect_word(in, "encoder_layers"));
  loaded.config.decoder_layers = std::stoi(expect_word(in, "decoder_layers"));
  loaded.config.hidden_size = std::stoi(expect_word(in, "hidden_size"));
  loaded.config.embedding_size = std::stoi(expect_word(in, "embedding_size"));
  loaded.config.vocab_size = std::stoi(expect_word(in, "vocab_size"));
  loaded.config.dropout = hex_to_double(expect_word(in, "dropout"));
  loaded.config.tie_embeddings = std::stoi(expect_word(in, "tie_embeddings")) != 0;
  loaded.config.validate();

  expect_keyword(in, "vocab");
  const int vocab_size = std::stoi(expect_word(in, "vocab size"));
  if (vocab_size < data::kReservedTokens)
    throw std::runtime_error("checkpoint: vocab smaller than reserved prefix");
  std::vector<std::string> tokens;
  tokens.reserve(static_cast<size_t>(vocab_size));
  for (int i = 0; i < vocab_size; ++i) tokens.push_back(expect_word(in, "vocab token"));
  loaded.vocab = data::Vocabulary::from_ordered_tokens(tokens);

  loaded.model = std::make_shared<seq2seq::Model>(loaded.config, loaded.seed);
  size_t assigned = 0;
  for (std::string word = expect_word(in, "tensor or end"); word != "end";
       word = expect_word(in, "tensor or end")) {
    if (word != "tensor") throw std::runtime_error("checkpoint: unexpected token " + word);
    const std::string name = expect_word(in, "tensor name");
    const int rows = std::stoi(expect_word(in, "tensor rows"));
    const int cols = std::stoi(expect_word(in, "tensor cols"));
    autograd::Tensor tensor = loaded.model->parameter(name);
    if (tensor->rows != rows || tensor->cols != cols)
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    for (int i = 0; i < tensor->size(); ++i)
      tensor->value[static_cast<size_t>(i)] = hex_to_double(expect_word(in, "tensor value"));
    ++assigned;
  }
  if (assigned != loaded.model->parameters().size())
    throw std::runtime_error("checkpoint: parameter count mismatch");
  return loaded;
}

}  // namespace replex::checkpoint
