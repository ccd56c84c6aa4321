#pragma once

// Attentional encoder-decoder agent: stacked bidirectional LSTM encoder,
// stacked LSTM decoder with global bilinear attention, teacher-forced
// training and greedy decoding.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mast/bleu.hpp"
#include "mast/corpus.hpp"
#include "mast/numerics.hpp"

namespace mast {

struct ModelDims {
  int embed = 64;
  int hidden = 64;
  int layers = 2;
  double dropout = 0.2;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

struct EncoderParams {
  Parameter embedding;            // [V × E]
  std::vector<LstmParams> fwd;    // per layer
  std::vector<LstmParams> bwd;
  std::vector<Parameter> bridge_w;  // per layer, [4H × 2H]
  std::vector<Parameter> bridge_b;  // per layer, [1 × 2H]

  EncoderParams() = default;
  EncoderParams(std::size_t vocab_size, const ModelDims& dims);

  template <class F>
  void for_each(F&& f) {
    f(embedding);
    for (std::size_t l = 0; l < fwd.size(); ++l) {
      fwd[l].for_each(f);
      bwd[l].for_each(f);
      f(bridge_w[l]);
      f(bridge_b[l]);
    }
  }
  template <class F>
  void for_each(F&& f) const {
    const_cast<EncoderParams*>(this)->for_each([&](Parameter& p) { f(static_cast<const Parameter&>(p)); });
  }
};

struct DecoderParams {
  Parameter embedding;           // [V × E]
  std::vector<LstmParams> layers;
  Parameter attention;           // [2H × H]: key = annotation · attention
  Parameter combine_w;           // [3H × H]
  Parameter combine_b;           // [1 × H]
  Parameter out_w;               // [H × V]
  Parameter out_b;               // [1 × V]

  DecoderParams() = default;
  DecoderParams(std::size_t vocab_size, const ModelDims& dims);
  std::size_t vocab_size() const { return static_cast<std::size_t>(out_w.value.cols()); }

  template <class F>
  void for_each(F&& f) {
    f(embedding);
    for (auto& l : layers) l.for_each(f);
    f(attention);
    f(combine_w);
    f(combine_b);
    f(out_w);
    f(out_b);
  }
  template <class F>
  void for_each(F&& f) const {
    const_cast<DecoderParams*>(this)->for_each([&](Parameter& p) { f(static_cast<const Parameter&>(p)); });
  }
};

void init_encoder(EncoderParams& enc, std::uint64_t seed);
void init_decoder(DecoderParams& dec, std::uint64_t seed);

/// One transfer direction source -> target.
struct AgentModel {
  StyleId source;
  StyleId target;
  Vocabulary source_vocab;
  Vocabulary target_vocab;
  ModelDims dims;
  EncoderParams encoder;
  DecoderParams decoder;

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
};

/// Encoder seeded from derive_seed(seed, "encoder"), decoder from
/// derive_seed(seed, "decoder").
AgentModel make_agent(StyleId source, StyleId target, Vocabulary source_vocab,
                      Vocabulary target_vocab, const ModelDims& dims, std::uint64_t seed);

/// Time-major padded batch.
struct PaddedBatch {
  std::size_t batch = 0;
  std::vector<std::vector<int>> ids;  // [t][row], PAD beyond a row's length
  std::vector<Mat> masks;             // [t] column of 0/1
  std::vector<std::size_t> lengths;

  std::size_t steps() const { return ids.size(); }
};

PaddedBatch pad_batch(std::span<const TokenIds> sequences);

struct DecoderState {
  std::vector<LstmState> layers;
};

struct Encoded {
  std::vector<Var> annotations;  // [t] of [B × 2H]
  Mat score_mask;                // [B × T], 0 on real tokens, -inf on padding
  DecoderState initial;
};

Encoded encode(Graph& g, const EncoderParams& enc, const ModelDims& dims,
               const PaddedBatch& src, bool training, Rng* rng);

struct AttentionMemory {
  std::vector<Var> keys;
  std::vector<Var> values;
  Mat score_mask;
};

AttentionMemory attention_memory(Graph& g, const DecoderParams& dec, const Encoded& encoded);

struct StepResult {
  Var logits;     // [B × V]
  Var attention;  // [B × T]
  DecoderState state;
};

StepResult decode_step(Graph& g, const DecoderParams& dec, const ModelDims& dims,
                       const DecoderState& state, std::span<const int> prev_tokens,
                       const AttentionMemory& memory, bool training, Rng* rng);

/// Mean per-token cross-entropy of tgt (+EOS) given src, teacher forced on
/// BOS + tgt. PAD positions do not count.
Var teacher_forced_loss(Graph& g, const EncoderParams& enc, const DecoderParams& dec,
                        const ModelDims& dims, std::span<const TokenIds> src,
                        std::span<const TokenIds> tgt, bool training, Rng* rng);

double teacher_forced_loss(const AgentModel& agent, const TokenIds& src, const TokenIds& tgt);

/// Argmax decoding (ties to the lowest id) until EOS or max_len; EOS is not
/// part of the output.
std::vector<TokenIds> greedy_decode(const EncoderParams& enc, const DecoderParams& dec,
                                    const ModelDims& dims, std::span<const TokenIds> src,
                                    std::size_t max_len);

TokenIds greedy_decode(const AgentModel& agent, const TokenIds& src, std::size_t max_len);
std::vector<TokenIds> greedy_decode(const AgentModel& agent, std::span<const TokenIds> src,
                                    std::size_t max_len);

std::size_t argmax_lowest(std::span<const double> values);

// ---------------------------------------------------------------------------
// Training

struct TrainSchedule {
  int epochs = 20;
  std::size_t batch_size = 32;
  SgdConfig sgd;
  int patience = 5;          // epochs without dev improvement before stopping; <= 0 disables
  std::size_t max_len = 60;  // decoding cap
  std::size_t eval_batch = 64;
  /// The SGD objective is the summed token loss divided by the number of
  /// sentences when true, the per-token mean otherwise.
  bool per_sentence_loss = true;
};

/// Multiplier turning a per-token mean loss into the schedule's objective.
double objective_scale(const TrainSchedule& schedule, std::span<const TokenIds> targets);

struct ParallelData {
  std::vector<TokenIds> src;
  std::vector<TokenIds> tgt;
};

/// Sources plus untokenized-id references for BLEU.
struct DevSet {
  std::vector<TokenIds> src;
  std::vector<Sentence> refs;
};

struct TrainResult {
  AgentModel best;
  std::vector<double> dev_bleu;    // one entry per completed epoch
  std::vector<double> train_loss;  // mean batch loss per epoch
  int best_epoch = -1;
};

/// Cycles through a dataset in shuffled mini-batches, reshuffling at the
/// start of every pass. Given item lengths, each pass sorts windows of
/// kBucketBatches batches by length before cutting them, which keeps
/// padding low, and then shuffles the batch order.
class BatchCursor {
 public:
  static constexpr std::size_t kBucketBatches = 32;

  BatchCursor(std::size_t size, std::size_t batch_size, Rng rng);
  BatchCursor(std::vector<std::size_t> lengths, std::size_t batch_size, Rng rng);
  std::vector<std::size_t> next();
  std::size_t batches_per_pass() const;

 private:
  void start_pass();

  std::size_t size_;
  std::size_t batch_size_;
  Rng rng_;
  std::vector<std::size_t> lengths_;
  std::vector<std::vector<std::size_t>> batches_;
  std::size_t pos_ = 0;
};

std::vector<std::size_t> sequence_lengths(std::span<const TokenIds> seqs);

double evaluate_bleu(const EncoderParams& enc, const DecoderParams& dec, const ModelDims& dims,
                     const Vocabulary& target_vocab, const DevSet& dev, const TrainSchedule& schedule);

/// Mini-batch SGD on teacher_forced_loss with per-epoch dev BLEU; returns
/// the best-dev snapshot.
TrainResult train_atts2s(AgentModel agent, const ParallelData& train, const DevSet& dev,
                         const TrainSchedule& schedule, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Checkpoints

std::string serialize_agent(const AgentModel& agent);
AgentModel parse_agent(std::string_view text);
void save_agent(const AgentModel& agent, const std::filesystem::path& path);
AgentModel load_agent(const std::filesystem::path& path);

// Shared text helpers for checkpoint formats.
std::string serialize_vocab(const std::string& key, const Vocabulary& vocab);
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace mast
