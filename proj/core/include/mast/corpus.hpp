#pragma once

// Aligned multi-style corpora: ingestion, vocabularies, deterministic data
// splits, denoising noise, and synthetic style generation.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mast/error.hpp"
#include "mast/rng.hpp"

namespace mast {

using Sentence = std::vector<std::string>;
using TokenIds = std::vector<int>;

struct StyleId {
  int index = 0;
  std::string name;

  friend bool operator==(const StyleId&, const StyleId&) = default;
};

/// Sentence r of every style is a rendering of the same content.
struct ParallelCorpus {
  std::vector<StyleId> styles;
  std::vector<std::vector<Sentence>> sentences;  // [style][row]

  std::size_t num_styles() const { return styles.size(); }
  std::size_t num_sentences() const {
    return sentences.empty() ? 0 : sentences.front().size();
  }
  int style_index(std::string_view name) const;
};

Sentence tokenize(std::string_view line);
std::string join(const Sentence& sentence);

/// Manifest lines are `name<TAB>path`; relative paths resolve against the
/// manifest's directory.
std::vector<std::pair<std::string, std::filesystem::path>> read_manifest(
    const std::filesystem::path& manifest);

ParallelCorpus ingest_aligned(
    const std::vector<std::pair<std::string, std::filesystem::path>>& manifest);

/// Writes one file per style plus a manifest into `dir`.
void write_corpus(const ParallelCorpus& corpus, const std::filesystem::path& dir);

struct SplitSizes {
  std::size_t train = 0;
  std::size_t dev = 0;
  std::size_t test = 0;
  std::size_t unlabeled = 0;
};

struct DataSplit {
  std::vector<std::string> style_names;
  std::uint64_t seed = 0;
  std::vector<std::size_t> labeled_train;
  std::vector<std::size_t> dev;
  std::vector<std::size_t> test;
  std::vector<std::vector<std::size_t>> unlabeled;  // per style

  friend bool operator==(const DataSplit&, const DataSplit&) = default;
};

DataSplit make_splits(const ParallelCorpus& corpus, SplitSizes sizes,
                      std::uint64_t seed);

std::string serialize_split(const DataSplit& split);
DataSplit parse_split(std::string_view text);

// ---------------------------------------------------------------------------
// Vocabulary

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kNumReserved = 4;
  static const std::array<std::string_view, kNumReserved>& reserved_tokens();

  /// Reserved-only vocabulary.
  Vocabulary();

  /// Tokens ranked by frequency (ties by first occurrence), truncated to
  /// max_size entries including the reserved ones.
  static Vocabulary build(std::span<const Sentence> sentences, std::size_t max_size,
                          std::size_t min_count = 1);

  /// Rebuilds from an explicit token list whose first four entries must be
  /// the reserved tokens.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  bool contains(std::string_view token) const;
  /// UNK for out-of-vocabulary tokens.
  int id(std::string_view token) const;
  const std::string& token(int id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

TokenIds numericalize(const Sentence& sentence, const Vocabulary& vocab);
Sentence denumericalize(std::span<const int> ids, const Vocabulary& vocab);

// ---------------------------------------------------------------------------
// Noise for the denoising route

struct NoiseConfig {
  double drop_prob = 0.1;
  std::size_t shuffle_window = 3;
  std::uint64_t seed = 0;
};

void validate(const NoiseConfig& cfg);

/// Drops each token with probability drop_prob (never all of them), then
/// permutes the survivors so that no token moves more than shuffle_window
/// positions.
template <class T>
std::vector<T> apply_noise(std::span<const T> sentence, const NoiseConfig& cfg,
                           Rng& rng) {
  std::vector<T> kept;
  kept.reserve(sentence.size());
  for (const T& tok : sentence) {
    if (!(uniform01(rng) < cfg.drop_prob)) kept.push_back(tok);
  }
  if (kept.empty() && !sentence.empty()) {
    kept.push_back(sentence[uniform_index(rng, sentence.size())]);
  }
  if (cfg.shuffle_window == 0 || kept.size() < 2) return kept;

  const double span = static_cast<double>(cfg.shuffle_window) + 1.0;
  std::vector<std::pair<double, std::size_t>> keys(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    keys[i] = {static_cast<double>(i) + uniform01(rng) * span, i};
  }
  std::sort(keys.begin(), keys.end());
  std::vector<T> out;
  out.reserve(kept.size());
  for (const auto& [key, idx] : keys) out.push_back(kept[idx]);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic styles

/// Deterministic, total token rewrite: tokens without a rule map to themselves.
struct RewriteRules {
  std::map<std::string, std::string> rules;

  const std::string& apply(const std::string& token) const {
    auto it = rules.find(token);
    return it == rules.end() ? token : it->second;
  }
};

struct SyntheticStyle {
  std::string name;
  RewriteRules rules;
};

/// Style 0 is the seed corpus (named `source_name`); style t+1 applies
/// styles[t].rules token by token.
ParallelCorpus make_synthetic_styles(const std::vector<Sentence>& seed_corpus,
                                     const std::vector<SyntheticStyle>& styles,
                                     const std::string& source_name = "src");

/// Small template grammar with Zipf-distributed word choice.
struct GrammarSpec {
  std::size_t num_sentences = 3000;
  std::size_t nouns = 90;
  std::size_t verbs = 50;
  std::size_t adjectives = 40;
  std::size_t adverbs = 15;
  std::size_t determiners = 6;
  std::size_t prepositions = 8;
};

struct SeedLexicon {
  std::vector<std::string> words;  // every word the grammar can emit
};

std::vector<Sentence> generate_seed_corpus(const GrammarSpec& grammar, Rng& rng,
                                           SeedLexicon* lexicon = nullptr);

/// Describes one synthetic target style relative to an anchor rule set:
/// it keeps `shared_fraction` of the anchor's rewritten words and fills the
/// rest with words the anchor leaves alone.
struct StyleFamilyMember {
  std::string name;
  double shared_fraction = 1.0;

  friend bool operator==(const StyleFamilyMember&, const StyleFamilyMember&) = default;
};

/// Builds styles whose rule sets overlap the anchor by the requested
/// fractions. Every style rewrites `rewrite_count` words; a rewritten word
/// always maps to the same string in every style that rewrites it.
std::vector<SyntheticStyle> graded_style_family(
    const SeedLexicon& lexicon, std::size_t rewrite_count,
    const std::vector<StyleFamilyMember>& members, Rng& rng);

/// Fraction of a's rewrite rules that b applies identically.
double shared_rule_fraction(const RewriteRules& a, const RewriteRules& b);

}  // namespace mast
