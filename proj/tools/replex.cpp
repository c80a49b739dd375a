// SPDX-License-Identifier: Apache-2.0
//
// replex command line tool.
//
// Subcommands:
//   train      train a model on a dialogue corpus (or the synthetic one)
//   eval       score a checkpoint against a corpus
//   metrics    score a file of generated utterances (one per line)
//   gencorpus  write the synthetic corpus, or convert a TSV dialogue dump
//   gradcurve  export the loss/gradient curves of the weighting schemes
//
// Exit codes: 0 success, 1 training aborted, 2 bad flags or config,
// 3 unreadable or malformed data.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "replex/checkpoint.hpp"
#include "replex/config.hpp"
#include "replex/data.hpp"
#include "replex/loss_weighting.hpp"
#include "replex/training.hpp"

using namespace replex;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitTrainAbort = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flag values shared by the subcommands. Empty string means "not given";
// CLI11's ->count() distinguishes explicit flags from defaults.
struct Options {
  std::string profile = "desk";
  std::string config_path;
  std::string corpus_path;
  std::string checkpoint_path;
  std::string out;
  std::string scheme;
  std::string attention;
  double gamma = 2.0;
  double uniform_w = 2.0;
  uint64_t seed = 0;
  int epochs = 0;
  double valid_interval = 0.0;
  // gencorpus
  std::string from_tsv;
  int dialogues = 0;
  int hard_tokens = -1;
  double easy_fraction = -1.0;
};

/// True when the subcommand defines `name` and the user passed it.
bool has_flag(const CLI::App& cmd, const std::string& name) {
  const CLI::Option* option = cmd.get_option_no_throw(name);
  return option != nullptr && option->count() > 0;
}

data::Corpus load_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file: " + path);
  try {
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".tsv") == 0)
      return data::read_tsv_corpus(in);
    return data::read_corpus(in);
  } catch (const std::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

/// Applies profile, REPLEX_SEED, config file, then explicit flags, in that
/// order, so later sources win.
config::Profile resolve_profile(const CLI::App& cmd, const Options& opt) {
  config::Profile profile = config::profile_from_name(opt.profile);

  if (const char* env = std::getenv("REPLEX_SEED")) {
    const long long value = config::detail::parse_int("REPLEX_SEED", env);
    if (value < 0) throw UsageError("REPLEX_SEED: must be non-negative");
    profile.train.seed = static_cast<uint64_t>(value);
  }

  if (!opt.config_path.empty()) {
    std::ifstream in(opt.config_path);
    if (!in) throw DataError("cannot open config file: " + opt.config_path);
    config::apply_config(config::parse_config_stream(in), profile);
  }

  if (has_flag(cmd, "--scheme")) profile.train.scheme.kind = loss::scheme_from_name(opt.scheme);
  if (has_flag(cmd, "--gamma")) profile.train.scheme.gamma = opt.gamma;
  if (has_flag(cmd, "--uniform-w")) profile.train.scheme.uniform_w = opt.uniform_w;
  if (has_flag(cmd, "--attention"))
    profile.model.attention = seq2seq::attention_from_name(opt.attention);
  if (has_flag(cmd, "--seed")) profile.train.seed = opt.seed;
  if (has_flag(cmd, "--epochs")) profile.train.epochs = opt.epochs;
  if (has_flag(cmd, "--valid-interval"))
    profile.train.validation_interval_epochs = opt.valid_interval;

  profile.model.validate();
  profile.train.validate();
  profile.synth.validate();
  return profile;
}

void print_report(const training::MetricReport& report, bool with_bleu) {
  std::printf("wl2=%.17g\n", report.wl2);
  std::printf("l_dimen=%.17g\n", report.l_dimen);
  if (with_bleu) std::printf("bleu4=%.17g\n", report.bleu4);
  std::printf("mean_u_dimen=%.17g\n", report.mean_u_dimen);
  std::printf("hist=[");
  for (size_t i = 0; i < report.hist.size(); ++i)
    std::printf("%s%lld", i ? "," : "", report.hist[i]);
  std::printf("]\n");
}

int run_train(const CLI::App& cmd, const Options& opt) {
  config::Profile profile = resolve_profile(cmd, opt);

  data::Corpus corpus = opt.corpus_path.empty()
                            ? data::generate_synthetic_corpus(profile.synth)
                            : load_corpus_file(opt.corpus_path);
  data::Corpus train_corpus, valid_corpus;
  try {
    data::split_corpus(corpus, 0.1, train_corpus, valid_corpus);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }

  data::Vocabulary vocab = data::Vocabulary::build(train_corpus, profile.model.vocab_size);
  const config::TrainConfig& tc = profile.train;
  auto train_pairs = data::build_pairs(train_corpus, vocab, tc.history_turns,
                                       tc.message_truncation, tc.response_truncation);
  auto valid_pairs = data::build_pairs(valid_corpus, vocab, tc.history_turns,
                                       tc.message_truncation, tc.response_truncation);
  if (train_pairs.empty() || valid_pairs.empty())
    throw DataError("corpus too small: a split produced no message/response pairs");

  seq2seq::ModelConfig mc = profile.model;
  mc.vocab_size = vocab.size();
  seq2seq::Model model(mc, tc.seed);

  std::fprintf(stderr, "train: %zu train pairs, %zu valid pairs, vocab %d, scheme %s\n",
               train_pairs.size(), valid_pairs.size(), vocab.size(),
               loss::scheme_name(tc.scheme.kind));

  training::TrainResult result;
  try {
    result = training::train(model, train_pairs, valid_pairs, tc);
  } catch (const std::invalid_argument&) {
    throw;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kExitTrainAbort;
  }

  for (const auto& row : result.log)
    std::printf("epoch %d step %lld wl2 %.6g l_dimen %.6g\n", row.epoch, row.step,
                row.report.wl2, row.report.l_dimen);
  std::printf("best: epoch %d step %lld wl2 %.6g\n", result.best.epoch, result.best.step,
              result.best.report.wl2);

  std::filesystem::path out_dir(opt.out);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  auto write_file = [&](const std::filesystem::path& path, auto&& body) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    body(out);
    if (!out) throw DataError("write failed: " + path.string());
  };
  write_file(out_dir / "metrics.csv",
             [&](std::ostream& os) { os << training::format_metric_log(result.log); });
  write_file(out_dir / "last.ckpt", [&](std::ostream& os) {
    checkpoint::save_checkpoint(os, model, vocab, tc.seed, result.last.epoch,
                                result.last.report.wl2);
  });
  training::restore_snapshot(model, result.best);
  write_file(out_dir / "best.ckpt", [&](std::ostream& os) {
    checkpoint::save_checkpoint(os, model, vocab, tc.seed, result.best.epoch,
                                result.best.report.wl2);
  });
  std::printf("wrote %s\n", (out_dir / "metrics.csv").c_str());
  std::printf("wrote %s\n", (out_dir / "best.ckpt").c_str());
  std::printf("wrote %s\n", (out_dir / "last.ckpt").c_str());
  return kExitOk;
}

int run_eval(const CLI::App& cmd, const Options& opt) {
  config::Profile profile = resolve_profile(cmd, opt);

  std::ifstream ck(opt.checkpoint_path);
  if (!ck) throw DataError("cannot open checkpoint: " + opt.checkpoint_path);
  checkpoint::LoadedCheckpoint loaded;
  try {
    loaded = checkpoint::load_checkpoint(ck);
  } catch (const std::exception& e) {
    throw DataError(opt.checkpoint_path + ": " + e.what());
  }

  data::Corpus corpus = load_corpus_file(opt.corpus_path);
  const config::TrainConfig& tc = profile.train;
  auto pairs = data::build_pairs(corpus, loaded.vocab, tc.history_turns, tc.message_truncation,
                                 tc.response_truncation);
  if (pairs.empty()) throw DataError("corpus produced no message/response pairs");

  auto report =
      training::evaluate(*loaded.model, pairs, tc.response_truncation, data::kEosId);
  print_report(report, true);
  return kExitOk;
}

int run_metrics(const Options& opt) {
  std::ifstream in(opt.corpus_path);
  if (!in) throw DataError("cannot open utterance file: " + opt.corpus_path);

  // One pre-tokenized utterance per line; blank lines are skipped.
  std::vector<std::vector<std::string>> utterances;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream words(line);
    std::vector<std::string> tokens;
    std::string word;
    while (words >> word) tokens.push_back(word);
    if (!tokens.empty()) utterances.push_back(std::move(tokens));
  }
  if (utterances.empty()) throw DataError("no utterances in " + opt.corpus_path);

  metrics::DimenConfig dimen_cfg;
  metrics::Wl2Config wl2_cfg;
  training::MetricReport report;
  std::vector<double> scores;
  scores.reserve(utterances.size());
  for (const auto& u : utterances) scores.push_back(metrics::u_dimen(u, dimen_cfg));
  report.hist = metrics::histogram(scores, wl2_cfg);
  report.wl2 = metrics::wl2(report.hist, wl2_cfg);
  report.l_dimen = metrics::l_dimen(utterances, dimen_cfg);
  for (double s : scores) report.mean_u_dimen += s;
  report.mean_u_dimen /= static_cast<double>(scores.size());
  print_report(report, false);
  return kExitOk;
}

int run_gencorpus(const CLI::App& cmd, const Options& opt) {
  data::Corpus corpus;
  if (!opt.from_tsv.empty()) {
    corpus = load_corpus_file(opt.from_tsv);
  } else {
    config::Profile profile = resolve_profile(cmd, opt);
    data::SyntheticCorpusSpec spec = profile.synth;
    if (has_flag(cmd, "--dialogues")) spec.dialogues = opt.dialogues;
    if (has_flag(cmd, "--hard-tokens")) spec.hard_tokens = opt.hard_tokens;
    if (has_flag(cmd, "--easy-fraction")) spec.easy_fraction = opt.easy_fraction;
    if (has_flag(cmd, "--seed")) spec.seed = opt.seed;
    spec.validate();
    corpus = data::generate_synthetic_corpus(spec);
  }
  std::ofstream out(opt.out);
  if (!out) throw DataError("cannot write " + opt.out);
  data::write_corpus(out, corpus);
  if (!out) throw DataError("write failed: " + opt.out);
  std::fprintf(stderr, "wrote %zu dialogues to %s\n", corpus.dialogues.size(),
               opt.out.c_str());
  return kExitOk;
}

int run_gradcurve(const Options& opt) {
  if (opt.out.empty() || opt.out == "-") {
    loss::write_gradcurve(std::cout, opt.gamma);
    return kExitOk;
  }
  std::ofstream out(opt.out);
  if (!out) throw DataError("cannot write " + opt.out);
  loss::write_gradcurve(out, opt.gamma);
  if (!out) throw DataError("write failed: " + opt.out);
  return kExitOk;
}

void add_profile_flags(CLI::App* cmd, Options& opt) {
  cmd->add_option("--profile", opt.profile, "size profile: desk or paper")
      ->capture_default_str();
  cmd->add_option("--config", opt.config_path, "config file of key = value lines");
  cmd->add_option("--seed", opt.seed, "rng seed (beats config file and REPLEX_SEED)");
}

void add_scheme_flags(CLI::App* cmd, Options& opt) {
  cmd->add_option("--scheme", opt.scheme, "loss weighting: ce fl ldr tfl tldr uniform");
  cmd->add_option("--gamma", opt.gamma, "focal exponent for fl/tfl")->capture_default_str();
  cmd->add_option("--uniform-w", opt.uniform_w, "constant weight for the uniform scheme")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dialogue seq2seq with dynamically reweighted token losses"};
  app.require_subcommand(1);
  Options opt;

  CLI::App* train = app.add_subcommand("train", "train a model, write checkpoints + metrics");
  add_profile_flags(train, opt);
  add_scheme_flags(train, opt);
  train->add_option("--attention", opt.attention,
                    "attention variant: post, if, pre, pre-highway");
  train->add_option("--corpus", opt.corpus_path,
                    "dialogue corpus (.tsv or blank-line blocks); default: synthetic");
  train->add_option("--epochs", opt.epochs, "training epochs");
  train->add_option("--valid-interval", opt.valid_interval,
                    "validation interval in epoch fractions, in (0,1]");
  train->add_option("--out", opt.out, "output directory")->capture_default_str()
      ->default_val("runs/latest");

  CLI::App* eval = app.add_subcommand("eval", "score a checkpoint against a corpus");
  add_profile_flags(eval, opt);
  eval->add_option("--checkpoint", opt.checkpoint_path, "checkpoint file")->required();
  eval->add_option("--corpus", opt.corpus_path, "dialogue corpus to score against")
      ->required();

  CLI::App* metrics_cmd =
      app.add_subcommand("metrics", "diversity metrics for pre-tokenized utterance lines");
  metrics_cmd->add_option("--utterances", opt.corpus_path,
                          "file with one whitespace-tokenized utterance per line")
      ->required();

  CLI::App* gencorpus =
      app.add_subcommand("gencorpus", "write the synthetic corpus or convert a TSV dump");
  add_profile_flags(gencorpus, opt);
  gencorpus->add_option("--out", opt.out, "output corpus file")->required();
  gencorpus->add_option("--from-tsv", opt.from_tsv,
                        "convert this TSV file instead of synthesizing");
  gencorpus->add_option("--dialogues", opt.dialogues, "synthetic dialogue count");
  gencorpus->add_option("--hard-tokens", opt.hard_tokens, "trigger/hard token pair count");
  gencorpus->add_option("--easy-fraction", opt.easy_fraction,
                        "share of opener-repetition dialogues");

  CLI::App* gradcurve =
      app.add_subcommand("gradcurve", "CSV of loss and gradient curves over p in (0,1)");
  gradcurve->add_option("--out", opt.out, "output file, - for stdout")
      ->capture_default_str()
      ->default_val("-");
  gradcurve->add_option("--gamma", opt.gamma, "focal exponent for the tfl columns")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (train->parsed()) return run_train(*train, opt);
    if (eval->parsed()) return run_eval(*eval, opt);
    if (metrics_cmd->parsed()) return run_metrics(opt);
    if (gencorpus->parsed()) return run_gencorpus(*gencorpus, opt);
    if (gradcurve->parsed()) return run_gradcurve(opt);
  } catch (const DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return kExitOk;
}
