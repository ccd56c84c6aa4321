#include <unordered_map>

#include "mast/corpus.hpp"

namespace mast {

const std::array<std::string_view, Vocabulary::kNumReserved>& Vocabulary::reserved_tokens() {
  static const std::array<std::string_view, kNumReserved> kTokens = {"<pad>", "<unk>", "<s>",
                                                                     "</s>"};
  return kTokens;
}

Vocabulary::Vocabulary() {
  for (auto tok : reserved_tokens()) {
    index_.emplace(std::string(tok), static_cast<int>(tokens_.size()));
    tokens_.emplace_back(tok);
  }
}

Vocabulary Vocabulary::build(std::span<const Sentence> sentences, std::size_t max_size,
                             std::size_t min_count) {
  if (max_size < kNumReserved) {
    fail(ErrorKind::InvalidConfig, "vocabulary max_size must be at least 4");
  }
  Vocabulary vocab;
  struct Entry {
    std::size_t count = 0;
    std::size_t first = 0;
  };
  std::unordered_map<std::string, Entry> counts;
  std::vector<std::string> order;
  for (const auto& sent : sentences) {
    for (const auto& tok : sent) {
      if (vocab.index_.count(tok)) continue;  // reserved strings never become words
      auto [it, inserted] = counts.try_emplace(tok);
      if (inserted) {
        it->second.first = order.size();
        order.push_back(tok);
      }
      ++it->second.count;
    }
  }
  std::vector<const std::string*> ranked;
  for (const auto& tok : order) {
    if (counts[tok].count >= min_count) ranked.push_back(&tok);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [&](const std::string* a, const std::string* b) {
    return counts[*a].count > counts[*b].count;
  });
  for (const std::string* tok : ranked) {
    if (vocab.tokens_.size() >= max_size) break;
    vocab.index_.emplace(*tok, static_cast<int>(vocab.tokens_.size()));
    vocab.tokens_.push_back(*tok);
  }
  return vocab;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < kNumReserved) {
    fail(ErrorKind::ParseError, "vocabulary lacks reserved tokens");
  }
  for (int i = 0; i < kNumReserved; ++i) {
    if (tokens[static_cast<std::size_t>(i)] != reserved_tokens()[static_cast<std::size_t>(i)]) {
      fail(ErrorKind::ParseError, "vocabulary reserved token mismatch at index " +
                                      std::to_string(i));
    }
  }
  Vocabulary vocab;
  vocab.tokens_.clear();
  vocab.index_.clear();
  for (auto& tok : tokens) {
    if (!vocab.index_.emplace(tok, static_cast<int>(vocab.tokens_.size())).second) {
      fail(ErrorKind::ParseError, "duplicate vocabulary token '" + tok + "'");
    }
    vocab.tokens_.push_back(std::move(tok));
  }
  return vocab;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.count(std::string(token)) > 0;
}

int Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    fail(ErrorKind::InvalidId, "token id " + std::to_string(id) + " outside vocabulary of size " +
                                   std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

TokenIds numericalize(const Sentence& sentence, const Vocabulary& vocab) {
  TokenIds ids;
  ids.reserve(sentence.size());
  for (const auto& tok : sentence) ids.push_back(vocab.id(tok));
  return ids;
}

Sentence denumericalize(std::span<const int> ids, const Vocabulary& vocab) {
  Sentence out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(vocab.token(id));
  return out;
}

}  // namespace mast
