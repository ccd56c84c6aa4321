#pragma once

// Neighbor selection by style similarity: pairwise attentional-LSTM
// classifiers give an accuracy matrix, which is row-rescaled and blended
// with rescaled agent performance before a top-k pick.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mast/corpus.hpp"
#include "mast/numerics.hpp"

namespace mast {

struct ClassifierConfig {
  int embed = 32;
  int hidden = 32;
  double dropout = 0.2;
  int epochs = 4;
  std::size_t batch_size = 16;
  SgdConfig sgd{0.5, 5.0};
};

struct StyleClassifier {
  Vocabulary vocab;
  ClassifierConfig config;
  Parameter embedding;  // [V × E]
  LstmParams lstm;
  Parameter attention;  // [1 × H] pooling vector
  Parameter out_w;      // [H × 2]
  Parameter out_b;      // [1 × 2]

  StyleClassifier() = default;
  StyleClassifier(Vocabulary vocab, const ClassifierConfig& config);

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
};

/// Class probabilities [B × 2] for a batch of sentences (label 0 = style a).
Var classifier_forward(Graph& g, const StyleClassifier& c, std::span<const TokenIds> batch,
                       bool training, Rng* rng);

Mat classifier_probs(const StyleClassifier& c, std::span<const Sentence> sentences);
std::vector<int> classify(const StyleClassifier& c, std::span<const Sentence> sentences);

/// Balances the classes by downsampling the larger side.
StyleClassifier train_pair_classifier(std::span<const Sentence> style_a,
                                      std::span<const Sentence> style_b,
                                      const ClassifierConfig& config, std::uint64_t seed);

/// Macro-averaged accuracy over the two classes.
double classifier_accuracy(const StyleClassifier& c, std::span<const Sentence> dev_a,
                           std::span<const Sentence> dev_b);

/// Square matrix whose diagonal holds NaN.
struct ScoreTable {
  std::vector<std::string> names;
  Mat values;
};

struct PairData {
  std::vector<Sentence> train;
  std::vector<Sentence> dev;
};

struct AccReport {
  ScoreTable acc;
  std::size_t classifiers_trained = 0;
};

/// One classifier per unordered pair, accuracy mirrored.
AccReport build_acc_matrix(const std::vector<std::string>& names,
                           const std::vector<PairData>& data, const ClassifierConfig& config,
                           std::uint64_t seed);

Mat rescale_rows(const Mat& acc);
Mat similarity(const Mat& acc_rescaled);
std::vector<double> perf_scores(std::span<const double> dev_bleu);
Mat combine_scores(const Mat& simi, std::span<const double> perf, double alpha);

enum class NeighborMode { TopK, Random };

std::string to_string(NeighborMode mode);
NeighborMode parse_neighbor_mode(const std::string& s);

struct NeighborGraph {
  std::size_t k = 0;
  std::vector<std::vector<std::size_t>> neighbors;

  friend bool operator==(const NeighborGraph&, const NeighborGraph&) = default;
};

NeighborGraph select_neighbors(const Mat& sc, std::size_t k, NeighborMode mode,
                               std::uint64_t seed);

struct SosScores {
  std::vector<std::string> names;
  Mat acc;
  Mat acc_rescaled;
  Mat simi;
  std::vector<double> perf;
  Mat sc;
  double alpha = 0.5;
};

SosScores score_styles(std::vector<std::string> names, const Mat& acc,
                       std::span<const double> dev_bleu, double alpha);

std::string matrix_csv(const std::vector<std::string>& names, const Mat& m);
std::string serialize_sos(const SosScores& scores, const NeighborGraph& graph);
std::pair<SosScores, NeighborGraph> parse_sos(std::string_view text);

std::string serialize_classifier(const StyleClassifier& c);
StyleClassifier parse_classifier(std::string_view text);

}  // namespace mast
