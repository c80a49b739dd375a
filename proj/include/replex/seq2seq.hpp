#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the replex authors

/**
 * @file seq2seq.hpp
 * @brief LSTM encoder-decoder with four attention wirings and greedy decoding.
 *
 * The encoder is a stacked unidirectional LSTM over source token embeddings.
 * The decoder is a stacked LSTM whose coupling to the attention module is
 * selected by ModelConfig::attention:
 *
 *  - Post:        RNN consumes y_{t-1}; attention queries the new state s_t;
 *                 the output layer reads the combiner g'(c_t, s_t).
 *  - InputFeeding RNN consumes [y_{t-1}; s~_{t-1}] where s~ is the previous
 *                 combiner output; output layer reads s~_t = g'(c_t, s_t).
 *  - PreConcat:   the *input* is transformed instead: RNN consumes
 *                 g'(c_{t-1}, y_{t-1}) projected to embedding size; the
 *                 output layer reads s_t directly.
 *  - PreHighway:  like PreConcat but the input transform is a highway gate
 *                 z.c' + (1-z).y over the projected previous context c' and
 *                 the embedding, z = sigmoid(W_z [c'; y] + b_z).
 *
 * Attention scores use the bilinear ("general") form score(s, h) = s^T W h.
 * The combiner g' is concatenation followed by a linear layer. The context
 * before the first step (and the first input-feeding vector) is zero.
 *
 * Weights initialize uniform(-0.08, 0.08), biases zero except the forget
 * gate's, which starts at 1.
 */

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "replex/loss_weighting.hpp"
#include "replex/rng.hpp"
#include "replex/tensor.hpp"

namespace replex::seq2seq {

using autograd::Tape;
using autograd::Tensor;

enum class Attention { Post, InputFeeding, PreConcat, PreHighway };

inline const char* attention_name(Attention a) {
  switch (a) {
    case Attention::Post: return "post";
    case Attention::InputFeeding: return "if";
    case Attention::PreConcat: return "pre";
    case Attention::PreHighway: return "pre-highway";
  }
  return "post";
}

inline Attention attention_from_name(const std::string& name) {
  if (name == "post") return Attention::Post;
  if (name == "if") return Attention::InputFeeding;
  if (name == "pre") return Attention::PreConcat;
  if (name == "pre-highway") return Attention::PreHighway;
  throw std::invalid_argument("unknown attention variant: " + name);
}

struct ModelConfig {
  Attention attention = Attention::Post;
  int encoder_layers = 2;
  int decoder_layers = 2;
  int hidden_size = 512;
  int embedding_size = 200;
  int vocab_size = 0;
  double dropout = 0.1;
  bool tie_embeddings = false;

  void validate() const {
    if (encoder_layers < 1 || decoder_layers < 1)
      throw std::invalid_argument("ModelConfig: layer counts must be >= 1");
    if (hidden_size < 1 || embedding_size < 1)
      throw std::invalid_argument("ModelConfig: sizes must be >= 1");
    if (vocab_size < 1) throw std::invalid_argument("ModelConfig: vocab_size must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0))
      throw std::invalid_argument("ModelConfig: dropout must be in [0, 1)");
  }
};

struct LayerState {
  Tensor h;
  Tensor c;
};

struct Encoded {
  Tensor outputs;  // [src_len, hidden]
  std::vector<LayerState> final_state;
};

struct DecoderState {
  std::vector<LayerState> layers;
  Tensor prev_context;      // c_{t-1}, zero before the first step
  Tensor prev_attentional;  // s~_{t-1}, input feeding only
};

struct AttendResult {
  Tensor context;  // [1, hidden]
  Tensor weights;  // [1, src_len], sums to 1
};

struct StepResult {
  Tensor logits;     // [1, vocab]
  Tensor probs;      // [1, vocab], softmax of logits
  Tensor attention;  // [1, src_len]
};

struct SequenceLoss {
  Tensor token_losses;        // [T, 1] per-token NLL under teacher forcing
  std::vector<double> probs;  // target-token probabilities p_t
};

using Pair = std::pair<std::vector<int>, std::vector<int>>;

class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg), dropout_seeds_(0) {
    cfg_.validate();
    Rng init(seed);
    const int h = cfg_.hidden_size, e = cfg_.embedding_size, v = cfg_.vocab_size;

    enc_embed_ = reg("encoder.embedding", autograd::make_param(v, e, init));
    dec_embed_ = cfg_.tie_embeddings
                     ? enc_embed_
                     : reg("decoder.embedding", autograd::make_param(v, e, init));

    for (int l = 0; l < cfg_.encoder_layers; ++l)
      enc_layers_.push_back(make_lstm("encoder.lstm" + std::to_string(l),
                                      l == 0 ? e : h, init));
    const int dec_in = e + (cfg_.attention == Attention::InputFeeding ? h : 0);
    for (int l = 0; l < cfg_.decoder_layers; ++l)
      dec_layers_.push_back(make_lstm("decoder.lstm" + std::to_string(l),
                                      l == 0 ? dec_in : h, init));

    w_att_ = reg("attention.w", autograd::make_param(h, h, init));

    switch (cfg_.attention) {
      case Attention::Post:
      case Attention::InputFeeding:
        w_read_ = reg("readout.w", autograd::make_param(2 * h, h, init));
        b_read_ = reg("readout.b", autograd::make_tensor(1, h, true));
        break;
      case Attention::PreConcat:
        w_pre_ = reg("input_transform.w", autograd::make_param(h + e, e, init));
        b_pre_ = reg("input_transform.b", autograd::make_tensor(1, e, true));
        break;
      case Attention::PreHighway:
        w_cproj_ = reg("context_proj.w", autograd::make_param(h, e, init));
        b_cproj_ = reg("context_proj.b", autograd::make_tensor(1, e, true));
        w_gate_ = reg("highway_gate.w", autograd::make_param(2 * e, e, init));
        b_gate_ = reg("highway_gate.b", autograd::make_tensor(1, e, true));
        break;
    }

    w_out_ = reg("output.w", autograd::make_param(h, v, init));
    b_out_ = reg("output.b", autograd::make_tensor(1, v, true));

    dropout_seeds_ = init.split();
  }

  const ModelConfig& config() const { return cfg_; }

  std::vector<std::pair<std::string, Tensor>>& parameters() { return params_; }
  const std::vector<std::pair<std::string, Tensor>>& parameters() const { return params_; }

  Tensor parameter(const std::string& name) const {
    for (const auto& [n, t] : params_)
      if (n == name) return t;
    throw std::invalid_argument("no parameter named " + name);
  }

  /// Number of scalar parameters implied by a config:
  ///   embeddings: vocab*embed, twice unless tied
  ///   lstm layer: 4*(in*hidden + hidden*hidden + hidden)
  ///     encoder first-layer in = embed; decoder first-layer in = embed
  ///     (+hidden for input feeding); deeper layers in = hidden
  ///   attention: hidden*hidden
  ///   combiner (Post/InputFeeding): 2*hidden*hidden + hidden
  ///   input transform (PreConcat): (hidden+embed)*embed + embed
  ///   context proj + gate (PreHighway): hidden*embed + embed
  ///                                     + 2*embed*embed + embed
  ///   output: hidden*vocab + vocab
  static long long parameter_count(const ModelConfig& cfg) {
    const long long h = cfg.hidden_size, e = cfg.embedding_size, v = cfg.vocab_size;
    auto lstm = [h](long long in) { return 4 * (in * h + h * h + h); };
    long long total = v * e * (cfg.tie_embeddings ? 1 : 2);
    total += lstm(e) + (cfg.encoder_layers - 1) * lstm(h);
    const long long dec_in = e + (cfg.attention == Attention::InputFeeding ? h : 0);
    total += lstm(dec_in) + (cfg.decoder_layers - 1) * lstm(h);
    total += h * h;
    switch (cfg.attention) {
      case Attention::Post:
      case Attention::InputFeeding: total += 2 * h * h + h; break;
      case Attention::PreConcat: total += (h + e) * e + e; break;
      case Attention::PreHighway: total += h * e + e + 2 * e * e + e; break;
    }
    total += h * v + v;
    return total;
  }

  // --------------------------------------------------------------------
  // Forward pieces
  // --------------------------------------------------------------------

  Encoded encode(Tape& tape, const std::vector<int>& message, bool training) {
    if (message.empty()) throw std::invalid_argument("encode: empty message");
    std::vector<LayerState> states = zero_states(cfg_.encoder_layers);
    std::vector<Tensor> tops;
    tops.reserve(message.size());
    for (int id : message) {
      Tensor x = autograd::embedding_lookup(tape, enc_embed_, {id});
      x = maybe_dropout(tape, x, training);
      tops.push_back(rnn_stack(tape, enc_layers_, x, states, training));
    }
    return {autograd::stack_rows(tape, tops), std::move(states)};
  }

  DecoderState initial_state(const Encoded& encoded) const {
    DecoderState st;
    for (int l = 0; l < cfg_.decoder_layers; ++l) {
      if (l < static_cast<int>(encoded.final_state.size()))
        st.layers.push_back(encoded.final_state[static_cast<std::size_t>(l)]);
      else
        st.layers.push_back({autograd::make_tensor(1, cfg_.hidden_size),
                             autograd::make_tensor(1, cfg_.hidden_size)});
    }
    st.prev_context = autograd::make_tensor(1, cfg_.hidden_size);
    st.prev_attentional = autograd::make_tensor(1, cfg_.hidden_size);
    return st;
  }

  /// Bilinear attention: softmax_i(q W h_i) over source positions, plus the
  /// weighted context sum.
  AttendResult attend(Tape& tape, const Tensor& query, const Tensor& enc_outputs) {
    Tensor q = autograd::matmul(tape, query, w_att_);
    Tensor scores = autograd::matmul_nt(tape, q, enc_outputs);
    Tensor weights = autograd::softmax_rows(tape, scores);
    Tensor context = autograd::matmul(tape, weights, enc_outputs);
    return {context, weights};
  }

  /// Gated combination z.c + (1-z).y of an embedding-sized context and a
  /// token embedding; z = sigmoid(W_z [c; y] + b_z) lies strictly in (0,1).
  Tensor highway(Tape& tape, const Tensor& context, const Tensor& y) {
    Tensor z = autograd::sigmoid(
        tape, autograd::add(tape, autograd::matmul(tape, autograd::concat_cols(tape, context, y),
                                                   w_gate_),
                            b_gate_));
    Tensor keep = autograd::affine(tape, z, -1.0, 1.0);
    return autograd::add(tape, autograd::mul(tape, z, context), autograd::mul(tape, keep, y));
  }

  StepResult decode_step(Tape& tape, DecoderState& state, int prev_token,
                         const Tensor& enc_outputs, bool training) {
    CoreStep core = decode_core(tape, state, prev_token, enc_outputs, training);
    Tensor logits = project_out(tape, core.readout, training);
    Tensor probs = autograd::softmax_rows(tape, logits);
    return {logits, probs, core.attention};
  }

  /// Teacher-forced decoder pass over one (message, response) pair. The
  /// decoder starts from the end-of-sequence token and the target sequence is
  /// the response with end-of-sequence appended, so eos timing is trained.
  SequenceLoss teacher_forced_losses(Tape& tape, const std::vector<int>& message,
                                     const std::vector<int>& response, int eos_id,
                                     bool training) {
    if (response.empty())
      throw std::invalid_argument("teacher_forced_losses: empty response");
    Encoded enc = encode(tape, message, training);
    DecoderState state = initial_state(enc);
    const int steps = static_cast<int>(response.size()) + 1;
    std::vector<Tensor> readouts;
    std::vector<int> targets;
    readouts.reserve(static_cast<std::size_t>(steps));
    targets.reserve(static_cast<std::size_t>(steps));
    for (int t = 0; t < steps; ++t) {
      const int prev = t == 0 ? eos_id : response[static_cast<std::size_t>(t - 1)];
      readouts.push_back(decode_core(tape, state, prev, enc.outputs, training).readout);
      targets.push_back(t < steps - 1 ? response[static_cast<std::size_t>(t)] : eos_id);
    }
    Tensor logits = project_out(tape, autograd::stack_rows(tape, readouts), training);
    autograd::NllResult nll = autograd::log_softmax_nll(tape, logits, targets);
    return {nll.loss, std::move(nll.probs)};
  }

  /// Differentiable batch loss under the given weighting scheme. Token-level
  /// schemes average the weighted per-token losses over all tokens in the
  /// batch; example-level schemes average weighted per-sequence means over
  /// sequences. Weights are computed from the forward p_t and applied as
  /// constants.
  Tensor forward_loss(Tape& tape, const std::vector<Pair>& batch,
                      const loss::WeightingScheme& scheme, int eos_id, bool training) {
    scheme.validate();
    if (batch.empty()) throw std::invalid_argument("forward_loss: empty batch");
    Tensor total;
    long long total_tokens = 0;
    for (const Pair& pair : batch) {
      SequenceLoss sl = teacher_forced_losses(tape, pair.first, pair.second, eos_id, training);
      const std::size_t n = sl.probs.size();
      std::vector<double> weights(n);
      if (loss::is_token_level(scheme.kind)) {
        for (std::size_t t = 0; t < n; ++t)
          weights[t] = loss::token_weight(scheme, sl.probs[t]);
      } else {
        const double w = loss::example_weight(scheme, sl.probs);
        std::fill(weights.begin(), weights.end(), w / static_cast<double>(n));
      }
      Tensor node = autograd::weighted_sum(tape, sl.token_losses, weights);
      total = total ? autograd::add(tape, total, node) : node;
      total_tokens += static_cast<long long>(n);
    }
    const double denom = loss::is_token_level(scheme.kind)
                             ? static_cast<double>(total_tokens)
                             : static_cast<double>(batch.size());
    return autograd::affine(tape, total, 1.0 / denom, 0.0);
  }

  /// Greedy argmax decoding, deterministic given parameters. Stops at eos or
  /// max_len; eos is suppressed on the first step so the response is never
  /// empty. The returned sequence excludes the terminating eos.
  std::vector<int> generate(const std::vector<int>& message, int max_len, int eos_id) {
    if (max_len < 1) throw std::invalid_argument("generate: max_len must be >= 1");
    Tape tape;
    tape.set_recording(false);
    Encoded enc = encode(tape, message, false);
    DecoderState state = initial_state(enc);
    std::vector<int> out;
    int prev = eos_id;
    for (int t = 0; t < max_len; ++t) {
      StepResult step = decode_step(tape, state, prev, enc.outputs, false);
      const std::vector<double>& row = step.logits->value;
      int best = -1;
      for (int j = 0; j < cfg_.vocab_size; ++j) {
        if (t == 0 && j == eos_id) continue;
        if (best < 0 || row[static_cast<std::size_t>(j)] > row[static_cast<std::size_t>(best)])
          best = j;
      }
      if (best == eos_id) break;
      out.push_back(best);
      prev = best;
    }
    return out;
  }

 private:
  struct LstmLayer {
    Tensor wxi, whi, bi;
    Tensor wxf, whf, bf;
    Tensor wxg, whg, bg;
    Tensor wxo, who, bo;
  };

  struct CoreStep {
    Tensor readout;
    Tensor attention;
  };

  Tensor reg(const std::string& name, Tensor t) {
    t->requires_grad = true;
    params_.emplace_back(name, t);
    return t;
  }

  LstmLayer make_lstm(const std::string& prefix, int in, Rng& init) {
    const int h = cfg_.hidden_size;
    LstmLayer l;
    l.wxi = reg(prefix + ".wxi", autograd::make_param(in, h, init));
    l.whi = reg(prefix + ".whi", autograd::make_param(h, h, init));
    l.bi = reg(prefix + ".bi", autograd::make_tensor(1, h, true));
    l.wxf = reg(prefix + ".wxf", autograd::make_param(in, h, init));
    l.whf = reg(prefix + ".whf", autograd::make_param(h, h, init));
    l.bf = reg(prefix + ".bf", autograd::make_tensor(1, h, true));
    // Forget gate starts open so early gradients flow through time.
    std::fill(l.bf->value.begin(), l.bf->value.end(), 1.0);
    l.wxg = reg(prefix + ".wxg", autograd::make_param(in, h, init));
    l.whg = reg(prefix + ".whg", autograd::make_param(h, h, init));
    l.bg = reg(prefix + ".bg", autograd::make_tensor(1, h, true));
    l.wxo = reg(prefix + ".wxo", autograd::make_param(in, h, init));
    l.who = reg(prefix + ".who", autograd::make_param(h, h, init));
    l.bo = reg(prefix + ".bo", autograd::make_tensor(1, h, true));
    return l;
  }

  std::vector<LayerState> zero_states(int layers) const {
    std::vector<LayerState> states;
    states.reserve(static_cast<std::size_t>(layers));
    for (int l = 0; l < layers; ++l)
      states.push_back({autograd::make_tensor(1, cfg_.hidden_size),
                        autograd::make_tensor(1, cfg_.hidden_size)});
    return states;
  }

  Tensor maybe_dropout(Tape& tape, const Tensor& x, bool training) {
    if (!training || cfg_.dropout == 0.0) return x;
    return autograd::dropout(tape, x, cfg_.dropout, true, dropout_seeds_.next_u64());
  }

  LayerState lstm_step(Tape& tape, const LstmLayer& l, const Tensor& x,
                       const LayerState& prev) {
    auto gate = [&](const Tensor& wx, const Tensor& wh, const Tensor& b) {
      return autograd::add(
          tape, autograd::add(tape, autograd::matmul(tape, x, wx), autograd::matmul(tape, prev.h, wh)),
          b);
    };
    Tensor i = autograd::sigmoid(tape, gate(l.wxi, l.whi, l.bi));
    Tensor f = autograd::sigmoid(tape, gate(l.wxf, l.whf, l.bf));
    Tensor g = autograd::tanh(tape, gate(l.wxg, l.whg, l.bg));
    Tensor o = autograd::sigmoid(tape, gate(l.wxo, l.who, l.bo));
    Tensor c = autograd::add(tape, autograd::mul(tape, f, prev.c), autograd::mul(tape, i, g));
    Tensor h = autograd::mul(tape, o, autograd::tanh(tape, c));
    return {h, c};
  }

  /// Runs the layer stack for one time step, updating states in place, with
  /// dropout between layers. Returns the top layer's hidden state.
  Tensor rnn_stack(Tape& tape, const std::vector<LstmLayer>& layers, const Tensor& input,
                   std::vector<LayerState>& states, bool training) {
    Tensor x = input;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      states[l] = lstm_step(tape, layers[l], x, states[l]);
      x = states[l].h;
      if (l + 1 < layers.size()) x = maybe_dropout(tape, x, training);
    }
    return x;
  }

  CoreStep decode_core(Tape& tape, DecoderState& state, int prev_token,
                       const Tensor& enc_outputs, bool training) {
    Tensor y = autograd::embedding_lookup(tape, dec_embed_, {prev_token});
    y = maybe_dropout(tape, y, training);
    switch (cfg_.attention) {
      case Attention::Post: {
        Tensor s = rnn_stack(tape, dec_layers_, y, state.layers, training);
        AttendResult att = attend(tape, s, enc_outputs);
        Tensor readout = combiner(tape, att.context, s);
        return {readout, att.weights};
      }
      case Attention::InputFeeding: {
        Tensor x = autograd::concat_cols(tape, y, state.prev_attentional);
        Tensor s = rnn_stack(tape, dec_layers_, x, state.layers, training);
        AttendResult att = attend(tape, s, enc_outputs);
        Tensor readout = combiner(tape, att.context, s);
        state.prev_attentional = readout;
        return {readout, att.weights};
      }
      case Attention::PreConcat: {
        Tensor x = autograd::add(
            tape,
            autograd::matmul(tape, autograd::concat_cols(tape, state.prev_context, y), w_pre_),
            b_pre_);
        Tensor s = rnn_stack(tape, dec_layers_, x, state.layers, training);
        AttendResult att = attend(tape, s, enc_outputs);
        state.prev_context = att.context;
        return {s, att.weights};
      }
      case Attention::PreHighway: {
        Tensor cproj = autograd::add(
            tape, autograd::matmul(tape, state.prev_context, w_cproj_), b_cproj_);
        Tensor x = highway(tape, cproj, y);
        Tensor s = rnn_stack(tape, dec_layers_, x, state.layers, training);
        AttendResult att = attend(tape, s, enc_outputs);
        state.prev_context = att.context;
        return {s, att.weights};
      }
    }
    throw std::invalid_argument("decode_core: unknown attention variant");
  }

  /// g'(c, s): concatenation followed by a linear projection.
  Tensor combiner(Tape& tape, const Tensor& context, const Tensor& s) {
    return autograd::add(
        tape, autograd::matmul(tape, autograd::concat_cols(tape, context, s), w_read_), b_read_);
  }

  Tensor project_out(Tape& tape, const Tensor& readout, bool training) {
    Tensor r = maybe_dropout(tape, readout, training);
    return autograd::add(tape, autograd::matmul(tape, r, w_out_), b_out_);
  }

  ModelConfig cfg_;
  Rng dropout_seeds_;
  Tensor enc_embed_, dec_embed_;
  std::vector<LstmLayer> enc_layers_, dec_layers_;
  Tensor w_att_;
  Tensor w_read_, b_read_;
  Tensor w_pre_, b_pre_;
  Tensor w_cproj_, b_cproj_, w_gate_, b_gate_;
  Tensor w_out_, b_out_;
  std::vector<std::pair<std::string, Tensor>> params_;
};

}  // namespace replex::seq2seq
