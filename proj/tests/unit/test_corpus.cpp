#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "mast/corpus.hpp"
#include "mast/seq2seq.hpp"
#include "tmpdir.hpp"

using namespace mast;
namespace fs = std::filesystem;

namespace {

void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
  std::ofstream out(p);
  for (const auto& l : lines) out << l << '\n';
}

ParallelCorpus tiny_corpus(std::size_t n, std::size_t styles = 3) {
  ParallelCorpus c;
  for (std::size_t s = 0; s < styles; ++s) {
    c.styles.push_back({static_cast<int>(s), "s" + std::to_string(s)});
    std::vector<Sentence> rows;
    for (std::size_t r = 0; r < n; ++r) rows.push_back({"w" + std::to_string(r % 7), "x" + std::to_string(s)});
    c.sentences.push_back(rows);
  }
  return c;
}

std::vector<Sentence> sents(std::initializer_list<const char*> lines) {
  std::vector<Sentence> out;
  for (const char* l : lines) out.push_back(tokenize(l));
  return out;
}

}  // namespace

TEST_CASE("tokenize splits on whitespace and keeps case") {
  CHECK(tokenize("  The  cat\tsat ") == Sentence{"The", "cat", "sat"});
  CHECK(tokenize("").empty());
  CHECK(join(Sentence{"a", "b"}) == "a b");
}

TEST_CASE("ingest_aligned builds a positional corpus") {
  mast::testing::TempDir dir;
  write_lines(dir.path / "a.txt", {"x y", "x y", "x y"});
  write_lines(dir.path / "b.txt", {"x y", "x y", "x y"});
  std::ofstream(dir.path / "manifest.tsv") << "a\ta.txt\nb\tb.txt\n";
  const ParallelCorpus c = ingest_aligned(read_manifest(dir.path / "manifest.tsv"));
  CHECK(c.num_styles() == 2);
  CHECK(c.num_sentences() == 3);
  CHECK(c.styles[1].name == "b");
  CHECK(c.styles[1].index == 1);
  CHECK(c.style_index("b") == 1);
}

TEST_CASE("ingest_aligned errors") {
  mast::testing::TempDir dir;
  write_lines(dir.path / "a.txt", {"1", "2", "3", "4", "5"});
  write_lines(dir.path / "b.txt", {"1", "2", "3", "4"});
  write_lines(dir.path / "empty.txt", {});
  auto kind_of = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::ParseError;
  };
  CHECK(kind_of([&] { ingest_aligned({{"a", dir.path / "a.txt"}, {"b", dir.path / "b.txt"}}); }) ==
        ErrorKind::LineCountMismatch);
  CHECK(kind_of([&] { ingest_aligned({{"a", dir.path / "empty.txt"}, {"b", dir.path / "b.txt"}}); }) ==
        ErrorKind::EmptyFile);
  CHECK(kind_of([&] { ingest_aligned({{"a", dir.path / "missing.txt"}, {"b", dir.path / "b.txt"}}); }) ==
        ErrorKind::FileNotFound);
}

TEST_CASE("write_corpus then ingest round-trips") {
  mast::testing::TempDir dir;
  const ParallelCorpus c = tiny_corpus(12);
  write_corpus(c, dir.path);
  const ParallelCorpus back = ingest_aligned(read_manifest(dir.path / "manifest.tsv"));
  CHECK(back.styles == c.styles);
  CHECK(back.sentences == c.sentences);
}

TEST_CASE("make_splits: sizes, disjointness, determinism") {
  const ParallelCorpus c = tiny_corpus(200);
  const SplitSizes sizes{50, 10, 20, 100};
  const DataSplit a = make_splits(c, sizes, 11);
  const DataSplit b = make_splits(c, sizes, 11);
  CHECK(a == b);
  CHECK(serialize_split(a) == serialize_split(b));
  CHECK(a.labeled_train.size() == 50);
  CHECK(a.dev.size() == 10);
  CHECK(a.test.size() == 20);
  REQUIRE(a.unlabeled.size() == 3);

  std::set<std::size_t> labeled(a.labeled_train.begin(), a.labeled_train.end());
  for (auto i : a.dev) CHECK(labeled.insert(i).second);
  for (auto i : a.test) CHECK(labeled.insert(i).second);
  for (const auto& pool : a.unlabeled) {
    CHECK(pool.size() == 100);
    CHECK(std::set<std::size_t>(pool.begin(), pool.end()).size() == pool.size());
    for (auto i : pool) CHECK(!labeled.count(i));
  }
  // Pools are drawn independently per style.
  CHECK(a.unlabeled[1] != a.unlabeled[2]);

  const DataSplit other = make_splits(c, sizes, 12);
  CHECK(other.labeled_train != a.labeled_train);
}

TEST_CASE("make_splits rejects oversize requests") {
  const ParallelCorpus c = tiny_corpus(50);
  CHECK_THROWS_AS(make_splits(c, {10, 5, 5, 100}, 1), Error);
  try {
    make_splits(c, {10, 5, 5, 100}, 1);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InsufficientData);
  }
}

TEST_CASE("split serialization round-trips") {
  const DataSplit a = make_splits(tiny_corpus(120), {30, 10, 10, 40}, 5);
  const std::string text = serialize_split(a);
  const DataSplit back = parse_split(text);
  CHECK(back == a);
  CHECK(serialize_split(back) == text);
}

TEST_CASE("vocabulary examples") {
  const auto v = Vocabulary::build(sents({"a b", "a c"}), 10);
  CHECK(v.tokens() == std::vector<std::string>{"<pad>", "<unk>", "<s>", "</s>", "a", "b", "c"});

  CHECK(Vocabulary::build({}, 10).size() == 4);
  CHECK(Vocabulary::build(sents({"x x x"}), 10, 4).size() == 4);

  const auto truncated = Vocabulary::build(sents({"a a a b b c d"}), 6);
  CHECK(truncated.tokens() == std::vector<std::string>{"<pad>", "<unk>", "<s>", "</s>", "a", "b"});
}

TEST_CASE("vocabulary reserved ids and lookups") {
  const auto v = Vocabulary::build(sents({"z y x y"}), 100);
  CHECK(v.id("<pad>") == Vocabulary::kPad);
  CHECK(v.id("<unk>") == Vocabulary::kUnk);
  CHECK(v.id("<s>") == Vocabulary::kBos);
  CHECK(v.id("</s>") == Vocabulary::kEos);
  // y first by frequency, then z and x by first occurrence.
  CHECK(v.token(4) == "y");
  CHECK(v.token(5) == "z");
  CHECK(v.token(6) == "x");
  for (const auto& t : v.tokens()) CHECK(v.token(v.id(t)) == t);
  CHECK(Vocabulary::from_tokens(v.tokens()) == v);
  CHECK_THROWS_AS(Vocabulary::from_tokens({"a", "b"}), Error);
}

TEST_CASE("numericalize and denumericalize") {
  const auto v = Vocabulary::build(sents({"a b"}), 10);
  CHECK(numericalize(tokenize("a b"), v) == TokenIds{v.id("a"), v.id("b")});
  CHECK(numericalize(tokenize("a z"), v) == TokenIds{v.id("a"), Vocabulary::kUnk});
  CHECK(denumericalize(numericalize(tokenize("b a b"), v), v) == tokenize("b a b"));
  try {
    denumericalize(TokenIds{9999}, v);
    FAIL("expected InvalidId");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidId);
  }
}

TEST_CASE("numericalize round-trips random id sequences") {
  const auto v = Vocabulary::build(sents({"a b c d e f g h"}), 100);
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    TokenIds ids;
    const std::size_t n = 1 + uniform_index(rng, 10);
    for (std::size_t i = 0; i < n; ++i) {
      ids.push_back(Vocabulary::kNumReserved + static_cast<int>(uniform_index(rng, v.size() - Vocabulary::kNumReserved)));
    }
    CHECK(numericalize(denumericalize(ids, v), v) == ids);
  }
}

TEST_CASE("apply_noise contracts") {
  const std::vector<int> s{1, 2, 3, 4, 5, 6, 7, 8};
  Rng rng(1);
  CHECK(apply_noise(std::span<const int>(s), NoiseConfig{0.0, 0, 0}, rng) == s);

  const std::vector<int> one{42};
  for (int i = 0; i < 100; ++i) {
    CHECK(apply_noise(std::span<const int>(one), NoiseConfig{0.999, 3, 0}, rng) == one);
  }
}

TEST_CASE("apply_noise: bounded displacement and never empty") {
  Rng rng(9);
  const NoiseConfig cfg{0.0, 3, 0};
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<int> s(1 + uniform_index(rng, 20));
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<int>(i);
    const auto out = apply_noise(std::span<const int>(s), cfg, rng);
    REQUIRE(out.size() == s.size());
    for (std::size_t pos = 0; pos < out.size(); ++pos) {
      const auto moved = std::abs(static_cast<long>(pos) - static_cast<long>(out[pos]));
      CHECK(moved <= 3);
    }
  }
  const NoiseConfig harsh{0.9, 2, 0};
  for (int trial = 0; trial < 500; ++trial) {
    const std::vector<int> s{1, 2, 3};
    CHECK(!apply_noise(std::span<const int>(s), harsh, rng).empty());
  }
}

TEST_CASE("apply_noise retains 0.9 of tokens at drop 0.1") {
  Rng rng(17);
  const NoiseConfig cfg{0.1, 3, 0};
  const std::vector<int> s(10, 7);
  std::size_t kept = 0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) kept += apply_noise(std::span<const int>(s), cfg, rng).size();
  const double frac = static_cast<double>(kept) / (10.0 * trials);
  CHECK(std::abs(frac - 0.9) < 0.01);
}

TEST_CASE("synthetic styles: identity and involution") {
  const std::vector<Sentence> seed = sents({"you said so", "the cat"});
  ParallelCorpus id = make_synthetic_styles(seed, {SyntheticStyle{"same", {}}});
  CHECK(id.sentences[1] == seed);
  CHECK(id.styles[0].name == "src");

  RewriteRules swap;
  swap.rules = {{"you", "thee"}, {"thee", "you"}};
  ParallelCorpus once = make_synthetic_styles(seed, {SyntheticStyle{"old", swap}});
  CHECK(once.sentences[1][0] == tokenize("thee said so"));
  ParallelCorpus twice = make_synthetic_styles(once.sentences[1], {SyntheticStyle{"old", swap}});
  CHECK(twice.sentences[1] == seed);
}

TEST_CASE("graded style family matches the requested overlap") {
  Rng rng(4);
  SeedLexicon lex;
  GrammarSpec g;
  g.num_sentences = 200;
  const auto seed = generate_seed_corpus(g, rng, &lex);
  CHECK(seed.size() == 200);
  const auto fam = graded_style_family(lex, 40, {{"a", 1.0}, {"b", 0.7}, {"c", 0.2}}, rng);
  REQUIRE(fam.size() == 3);
  for (const auto& s : fam) CHECK(s.rules.rules.size() == 40);
  CHECK(shared_rule_fraction(fam[0].rules, fam[0].rules) == 1.0);
  CHECK(shared_rule_fraction(fam[0].rules, fam[1].rules) == doctest::Approx(0.7).epsilon(0.03));
  CHECK(shared_rule_fraction(fam[0].rules, fam[2].rules) == doctest::Approx(0.2).epsilon(0.03));

  const ParallelCorpus c = make_synthetic_styles(seed, fam);
  CHECK(c.num_styles() == 4);
  for (std::size_t r = 0; r < c.num_sentences(); ++r) {
    for (std::size_t s = 1; s < 4; ++s) CHECK(c.sentences[s][r].size() == c.sentences[0][r].size());
  }
}
