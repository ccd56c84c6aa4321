#include <cmath>
#include <set>

#include "mast/corpus.hpp"

namespace mast {

ParallelCorpus make_synthetic_styles(const std::vector<Sentence>& seed_corpus,
                                     const std::vector<SyntheticStyle>& styles,
                                     const std::string& source_name) {
  ParallelCorpus corpus;
  corpus.styles.push_back({0, source_name});
  corpus.sentences.push_back(seed_corpus);
  for (const auto& style : styles) {
    std::vector<Sentence> rendered;
    rendered.reserve(seed_corpus.size());
    for (const auto& sent : seed_corpus) {
      Sentence out;
      out.reserve(sent.size());
      for (const auto& tok : sent) out.push_back(style.rules.apply(tok));
      rendered.push_back(std::move(out));
    }
    corpus.styles.push_back({static_cast<int>(corpus.styles.size()), style.name});
    corpus.sentences.push_back(std::move(rendered));
  }
  return corpus;
}

namespace {

const char* const kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r",
                               "s", "t", "v", "z", "br", "st", "tr", "gl"};
const char* const kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};

std::string pseudo_word(Rng& rng, std::size_t syllables) {
  std::string w;
  for (std::size_t s = 0; s < syllables; ++s) {
    w += kOnsets[uniform_index(rng, std::size(kOnsets))];
    w += kVowels[uniform_index(rng, std::size(kVowels))];
  }
  return w;
}

std::vector<std::string> make_class(Rng& rng, std::size_t count, std::size_t syllables,
                                    std::set<std::string>& used) {
  std::vector<std::string> words;
  while (words.size() < count) {
    std::string w = pseudo_word(rng, syllables + uniform_index(rng, 2));
    if (used.insert(w).second) words.push_back(std::move(w));
  }
  return words;
}

/// Zipf(1) sampler over ranks [0, n).
class Zipf {
 public:
  explicit Zipf(std::size_t n) : cdf_(n) {
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      total += 1.0 / static_cast<double>(r + 1);
      cdf_[r] = total;
    }
    for (auto& c : cdf_) c /= total;
  }
  std::size_t operator()(Rng& rng) const {
    const double u = uniform01(rng);
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

}  // namespace

std::vector<Sentence> generate_seed_corpus(const GrammarSpec& grammar, Rng& rng,
                                           SeedLexicon* lexicon) {
  std::set<std::string> used{"and"};
  const auto dets = make_class(rng, grammar.determiners, 1, used);
  const auto preps = make_class(rng, grammar.prepositions, 1, used);
  const auto nouns = make_class(rng, grammar.nouns, 2, used);
  const auto verbs = make_class(rng, grammar.verbs, 2, used);
  const auto adjs = make_class(rng, grammar.adjectives, 2, used);
  const auto advs = make_class(rng, grammar.adverbs, 3, used);
  if (lexicon) {
    lexicon->words.clear();
    for (const auto* cls : {&dets, &preps, &nouns, &verbs, &adjs, &advs}) {
      lexicon->words.insert(lexicon->words.end(), cls->begin(), cls->end());
    }
    lexicon->words.push_back("and");
  }
  const Zipf zdet(dets.size()), zprep(preps.size()), znoun(nouns.size()), zverb(verbs.size()),
      zadj(adjs.size()), zadv(advs.size());

  auto noun_phrase = [&](Sentence& out) {
    out.push_back(dets[zdet(rng)]);
    if (uniform01(rng) < 0.4) out.push_back(adjs[zadj(rng)]);
    out.push_back(nouns[znoun(rng)]);
  };
  auto clause = [&](Sentence& out) {
    noun_phrase(out);
    out.push_back(verbs[zverb(rng)]);
    if (uniform01(rng) < 0.6) noun_phrase(out);
    if (uniform01(rng) < 0.3) {
      out.push_back(preps[zprep(rng)]);
      noun_phrase(out);
    }
    if (uniform01(rng) < 0.2) out.push_back(advs[zadv(rng)]);
  };

  std::vector<Sentence> corpus;
  corpus.reserve(grammar.num_sentences);
  for (std::size_t i = 0; i < grammar.num_sentences; ++i) {
    Sentence s;
    clause(s);
    if (uniform01(rng) < 0.15) {
      s.push_back("and");
      clause(s);
    }
    corpus.push_back(std::move(s));
  }
  return corpus;
}

std::vector<SyntheticStyle> graded_style_family(const SeedLexicon& lexicon,
                                                std::size_t rewrite_count,
                                                const std::vector<StyleFamilyMember>& members,
                                                Rng& rng) {
  const std::size_t n = lexicon.words.size();
  if (rewrite_count * 2 > n) {
    fail(ErrorKind::InvalidConfig, "rewrite_count too large for the lexicon");
  }
  // Every word gets one canonical rewritten form shared by all styles.
  std::map<std::string, std::string> canonical;
  std::set<std::string> taken(lexicon.words.begin(), lexicon.words.end());
  for (const auto& w : lexicon.words) {
    std::string form;
    do {
      form = w + kVowels[uniform_index(rng, std::size(kVowels))] +
             kOnsets[uniform_index(rng, std::size(kOnsets))];
    } while (!taken.insert(form).second);
    canonical[w] = form;
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  shuffle_range(order.begin(), order.end(), rng);
  const std::vector<std::size_t> anchor(order.begin(),
                                        order.begin() + static_cast<std::ptrdiff_t>(rewrite_count));
  const std::vector<std::size_t> rest(order.begin() + static_cast<std::ptrdiff_t>(rewrite_count),
                                      order.end());

  // Members take prefixes of the same orders, so the words telling a style
  // apart from the anchor include those of every style with a higher fraction.
  std::vector<std::size_t> a = anchor, r = rest;
  shuffle_range(a.begin(), a.end(), rng);
  shuffle_range(r.begin(), r.end(), rng);
  std::vector<SyntheticStyle> styles;
  for (const auto& m : members) {
    if (m.shared_fraction < 0.0 || m.shared_fraction > 1.0) {
      fail(ErrorKind::InvalidConfig, "shared_fraction must lie in [0, 1]");
    }
    const auto keep = static_cast<std::size_t>(
        std::llround(m.shared_fraction * static_cast<double>(rewrite_count)));
    SyntheticStyle style;
    style.name = m.name;
    for (std::size_t i = 0; i < keep; ++i) {
      const auto& w = lexicon.words[a[i]];
      style.rules.rules[w] = canonical[w];
    }
    for (std::size_t i = 0; i < rewrite_count - keep; ++i) {
      const auto& w = lexicon.words[r[i]];
      style.rules.rules[w] = canonical[w];
    }
    styles.push_back(std::move(style));
  }
  return styles;
}

double shared_rule_fraction(const RewriteRules& a, const RewriteRules& b) {
  if (a.rules.empty()) return 1.0;
  std::size_t shared = 0;
  for (const auto& [from, to] : a.rules) {
    auto it = b.rules.find(from);
    if (it != b.rules.end() && it->second == to) ++shared;
  }
  return static_cast<double>(shared) / static_cast<double>(a.rules.size());
}

}  // namespace mast
