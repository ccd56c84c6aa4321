#pragma once

// Multi-agent decoding: a controller predicts per-step weights over k+1
// frozen agents whose distributions are mixed in a shared action space.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mast/seq2seq.hpp"

namespace mast {

/// Union of the agents' target vocabularies. Reserved tokens keep ids 0-3,
/// the remaining strings follow in sorted order.
struct GlobalVocab {
  Vocabulary tokens;
  std::vector<std::vector<int>> to_global;       // [agent][local id]
  std::vector<std::vector<int>> to_local;        // [agent][global id], -1 when absent
  std::vector<std::vector<unsigned char>> mask;  // [agent][global id]

  std::size_t size() const { return tokens.size(); }
  std::size_t agents() const { return to_global.size(); }
};

GlobalVocab build_global_vocab(std::span<const Vocabulary* const> vocabs);
GlobalVocab build_global_vocab(std::span<const AgentModel* const> agents);

/// Scatters local distributions [B × |A_j|] into [B × |global|].
Mat map_local_to_global(const GlobalVocab& gv, std::size_t agent, const Mat& local);

/// p = sum_j w[:, j] * M_j(p_j), rows independent.
Mat mixture_step(const GlobalVocab& gv, std::span<const Mat> local, const Mat& weights);

/// Masked argmax per agent, ties to the lowest global index, mapped back to
/// local ids. An all-zero slice yields the agent's UNK.
std::vector<int> per_agent_feedback(const GlobalVocab& gv, std::span<const double> p);

struct ControllerConfig {
  int embed = 32;
  int hidden = 32;
};

struct ControllerParams {
  std::size_t k = 0;  // neighbors; the softmax has k+1 outputs
  ControllerConfig config;
  EncoderParams encoder;  // single-layer bidirectional
  Parameter embedding;    // [|A_0| × E], previous prediction of agent 0
  LstmParams lstm;
  Parameter attention;    // [2H × H]
  Parameter proj_w;       // [3H × (k+1)]
  Parameter proj_b;       // [1 × (k+1)]

  ControllerParams() = default;
  ControllerParams(std::size_t source_vocab, std::size_t agent0_vocab, std::size_t k,
                   const ControllerConfig& config);

  ModelDims encoder_dims() const { return {config.embed, config.hidden, 1, 0.0}; }
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
};

void init_controller(ControllerParams& c, std::uint64_t seed);

/// The agent being improved first, then its neighbors.
struct MatSystem {
  std::vector<const AgentModel*> agents;
  GlobalVocab global;
};

MatSystem make_system(std::vector<const AgentModel*> agents);

/// Controller state for one batch of sources: encoder memory plus the
/// recurrent state advanced by each previous prediction.
struct ControllerRun {
  AttentionMemory memory;
  LstmState state;
};

ControllerRun controller_start(Graph& g, const ControllerParams& c,
                               std::span<const TokenIds> src);

/// Advances the controller by embedding(prev_agent0) and returns w [B × (k+1)].
Var controller_step(Graph& g, const ControllerParams& c, ControllerRun& run,
                    std::span<const int> prev_agent0);

struct MatSchedule {
  int epochs = 10;
  std::size_t batch_size = 16;
  SgdConfig sgd{1.0, 5.0};
  int patience = 3;
  std::size_t max_len = 100;
  std::size_t eval_batch = 64;
};

struct MatDecodeOptions {
  std::size_t max_len = 100;
  /// Replaces the controller with constant weights (length k+1).
  std::optional<std::vector<double>> fixed_weights;
  /// Emit the argmax over the whole global vocabulary instead of agent 0's slice.
  bool global_argmax = false;
};

/// Decodes a batch of source sentences in the source style; returns token
/// strings in the target style of agent 0.
std::vector<Sentence> mat_decode(const ControllerParams& c, const MatSystem& sys,
                                 std::span<const Sentence> src, const MatDecodeOptions& opts);

struct MatPairs {
  std::vector<Sentence> src;
  std::vector<Sentence> tgt;
};

struct MatResult {
  ControllerParams best;
  std::vector<double> dev_bleu;
  std::vector<double> train_loss;
  std::size_t unk_references = 0;  // reference tokens outside the global vocabulary
  int best_epoch = -1;
};

/// Mean over sentences of the summed -log p(y_t) / |Y| loss of one batch.
Var mat_batch_loss(Graph& g, const ControllerParams& c, const MatSystem& sys,
                   std::span<const Sentence> src, std::span<const Sentence> tgt,
                   std::size_t* unk_references = nullptr);

MatResult mat_train(ControllerParams controller, const MatSystem& sys, const MatPairs& train,
                    const MatPairs& dev, const MatSchedule& schedule, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Checkpoint

struct AgentRef {
  std::string source;
  std::string target;
  std::string digest;
};

struct ControllerCheckpoint {
  std::vector<AgentRef> agents;
  std::vector<std::string> global_tokens;
  ControllerParams controller;
};

std::string serialize_controller(const ControllerParams& c, const MatSystem& sys);
ControllerCheckpoint parse_controller(std::string_view text);
/// Raises DigestMismatch or VocabMismatch when the agents differ from the
/// ones the controller was trained with.
void verify_agents(const ControllerCheckpoint& ckpt, const MatSystem& sys);

}  // namespace mast
