#pragma once

// Semi-supervised transfer model: two encoders and two decoders trained by
// randomly interleaved supervised, back-translation and denoising routes.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mast/corpus.hpp"
#include "mast/seq2seq.hpp"

namespace mast {

enum class RouteKind { Supervised = 0, BackTranslation = 1, Dae = 2 };

std::string to_string(RouteKind route);

using RouteProbs = std::array<double, 3>;

void validate_route_probs(const RouteProbs& probs);

RouteKind sample_route(const RouteProbs& probs, Rng& rng);

struct SemiModel {
  StyleId source;  // style i
  StyleId target;  // style j
  Vocabulary source_vocab;
  Vocabulary target_vocab;
  ModelDims dims;
  EncoderParams enc_i;
  DecoderParams dec_j;
  EncoderParams enc_j;
  DecoderParams dec_i;
  /// Encoder reading back-translated text; only used when enc_j is not shared.
  EncoderParams enc_j_prime;
  bool share_enc_j = true;
  RouteProbs route_probs{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};

  /// enc_i, dec_j, enc_j, dec_i, then enc_j_prime when unshared.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  const EncoderParams& back_encoder() const { return share_enc_j ? enc_j : enc_j_prime; }
};

/// enc_i and dec_j use the same seed streams as make_agent, so a Semi model
/// starts from the AttS2S initialization for the same seed.
SemiModel make_semi(StyleId source, StyleId target, Vocabulary source_vocab,
                    Vocabulary target_vocab, const ModelDims& dims, std::uint64_t seed,
                    RouteProbs route_probs = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0},
                    bool share_enc_j = true);

Var route_supervised(Graph& g, const SemiModel& semi, std::span<const TokenIds> src,
                     std::span<const TokenIds> tgt, bool training, Rng* rng);

/// Stage 1 decodes x through (enc_i, dec_j) without gradients; stage 2
/// reconstructs x from that output through (enc_j, dec_i).
Var route_backtranslation(Graph& g, const SemiModel& semi, std::span<const TokenIds> src,
                          std::size_t max_len, bool training, Rng* rng);

Var route_dae(Graph& g, const SemiModel& semi, std::span<const TokenIds> tgt,
              const NoiseConfig& noise, Rng& noise_rng, bool training, Rng* rng);

struct SemiData {
  ParallelData labeled;               // source ids -> target ids
  std::vector<TokenIds> unlabeled_source;
  std::vector<TokenIds> unlabeled_target;
};

struct SemiResult {
  AgentModel best;
  SemiModel final_model;
  std::vector<double> dev_bleu;
  std::vector<double> train_loss;
  std::array<std::size_t, 3> route_counts{};
  int best_epoch = -1;
};

/// Each epoch runs ceil(labeled batches / p_supervised) steps (or the
/// labeled batch count when p_supervised is 0).
SemiResult train_semi(SemiModel semi, const SemiData& data, const DevSet& dev,
                      const TrainSchedule& schedule, const NoiseConfig& noise,
                      std::uint64_t seed);

AgentModel extract_agent(const SemiModel& semi);

std::string serialize_semi(const SemiModel& semi);
SemiModel parse_semi(std::string_view text);
void save_semi(const SemiModel& semi, const std::filesystem::path& path);
SemiModel load_semi(const std::filesystem::path& path);

}  // namespace mast
