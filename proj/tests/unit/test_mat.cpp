#include <cmath>
#include <set>

#include "doctest.h"
#include "gradcheck.hpp"
#include "mast/digest.hpp"
#include "mast/mat.hpp"
#include "tmpdir.hpp"

using namespace mast;

namespace {

Vocabulary vocab_of(const char* line) {
  return Vocabulary::build(std::vector<Sentence>{tokenize(line)}, 1000);
}

/// Local distribution over reserved tokens followed by `tail`.
Mat local_dist(std::initializer_list<double> tail) {
  Mat m = Mat::Zero(1, Vocabulary::kNumReserved + static_cast<Eigen::Index>(tail.size()));
  Eigen::Index i = Vocabulary::kNumReserved;
  for (double v : tail) m(0, i++) = v;
  return m;
}

Mat random_simplex(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = -std::log(uniform01(rng) + 1e-300);
    m.row(r) /= m.row(r).sum();
  }
  return m;
}

Vocabulary random_vocab(Rng& rng) {
  static const char* letters[] = {"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"};
  Sentence s;
  for (const char* l : letters) {
    if (uniform01(rng) < 0.5) s.push_back(l);
  }
  if (s.empty()) s.push_back("a");
  return Vocabulary::build(std::vector<Sentence>{s}, 1000);
}

const Vocabulary kSource = vocab_of("a b c d e f g h i j");

AgentModel agent(const std::string& target, const char* target_tokens, std::uint64_t seed, int hidden = 6) {
  return make_agent({0, "src"}, {1, target}, kSource, vocab_of(target_tokens), ModelDims{4, hidden, 1, 0.0},
                    seed);
}

std::vector<Sentence> sentences(Rng& rng, std::size_t n) {
  std::vector<Sentence> out;
  for (std::size_t i = 0; i < n; ++i) {
    Sentence s;
    const std::size_t len = 1 + uniform_index(rng, 5);
    for (std::size_t t = 0; t < len; ++t) {
      s.push_back(kSource.token(Vocabulary::kNumReserved + static_cast<int>(uniform_index(rng, 10))));
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sentence> agent_greedy(const AgentModel& a, std::span<const Sentence> src, std::size_t max_len) {
  std::vector<Sentence> out;
  for (const auto& s : src) out.push_back(denumericalize(greedy_decode(a, numericalize(s, a.source_vocab), max_len), a.target_vocab));
  return out;
}

ControllerParams controller(const MatSystem& sys, std::uint64_t seed) {
  ControllerParams c(sys.agents[0]->source_vocab.size(), sys.agents[0]->target_vocab.size(),
                     sys.agents.size() - 1, ControllerConfig{5, 6});
  init_controller(c, seed);
  return c;
}

}  // namespace

TEST_CASE("build_global_vocab examples") {
  const Vocabulary ab = vocab_of("a b"), bc = vocab_of("b c");
  {
    const Vocabulary* vs[] = {&ab, &ab};
    const GlobalVocab gv = build_global_vocab(vs);
    CHECK(gv.size() == ab.size());
    for (std::size_t i = 0; i < ab.size(); ++i) CHECK(gv.to_global[1][i] == static_cast<int>(i));
  }
  const Vocabulary* vs[] = {&ab, &bc};
  const GlobalVocab gv = build_global_vocab(vs);
  CHECK(gv.tokens.tokens() == std::vector<std::string>{"<pad>", "<unk>", "<s>", "</s>", "a", "b", "c"});
  CHECK(gv.mask[0] == std::vector<unsigned char>{1, 1, 1, 1, 1, 1, 0});
  CHECK(gv.mask[1] == std::vector<unsigned char>{1, 1, 1, 1, 0, 1, 1});
  CHECK(gv.to_local[1][4] == -1);
  CHECK(gv.to_global[1][Vocabulary::kNumReserved] == 5);
}

TEST_CASE("global vocabulary: set bounds and injective mappings") {
  Rng rng(11);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 2 + uniform_index(rng, 3);
    std::vector<Vocabulary> vocabs;
    for (std::size_t j = 0; j < n; ++j) vocabs.push_back(random_vocab(rng));
    std::vector<const Vocabulary*> ptrs;
    std::size_t sum = 0, max = 0;
    for (const auto& v : vocabs) {
      ptrs.push_back(&v);
      sum += v.size();
      max = std::max(max, v.size());
    }
    const GlobalVocab gv = build_global_vocab(ptrs);
    CHECK(gv.size() <= sum);
    CHECK(gv.size() >= max);
    for (std::size_t j = 0; j < n; ++j) {
      std::set<int> images(gv.to_global[j].begin(), gv.to_global[j].end());
      CHECK(images.size() == vocabs[j].size());
      std::size_t in_mask = 0;
      for (std::size_t g = 0; g < gv.size(); ++g) {
        in_mask += gv.mask[j][g];
        CHECK((gv.mask[j][g] == 1) == (images.count(static_cast<int>(g)) == 1));
      }
      CHECK(in_mask == vocabs[j].size());
      for (std::size_t i = 0; i < vocabs[j].size(); ++i) {
        CHECK(gv.tokens.token(gv.to_global[j][i]) == vocabs[j].token(static_cast<int>(i)));
      }
    }
  }
}

TEST_CASE("map_local_to_global") {
  const Vocabulary ab = vocab_of("a b"), abc = vocab_of("a b c");
  const Vocabulary* vs[] = {&ab, &abc};
  const GlobalVocab gv = build_global_vocab(vs);
  const Mat out = map_local_to_global(gv, 0, local_dist({0.8, 0.2}));
  CHECK(out == local_dist({0.8, 0.2, 0.0}));
  const Mat same = local_dist({0.1, 0.3, 0.6});
  CHECK(map_local_to_global(gv, 1, same) == same);
  CHECK_THROWS_AS(map_local_to_global(gv, 0, same), Error);
  CHECK_THROWS_AS(map_local_to_global(gv, 2, same), Error);

  Rng rng(3);
  for (int rep = 0; rep < 100; ++rep) {
    const Mat p = random_simplex(rng, 2, static_cast<Eigen::Index>(ab.size()));
    const Mat g = map_local_to_global(gv, 0, p);
    for (Eigen::Index r = 0; r < 2; ++r) CHECK(g.row(r).sum() == doctest::Approx(p.row(r).sum()).epsilon(1e-15));
  }
}

TEST_CASE("mixture_step examples") {
  const Vocabulary ab = vocab_of("a b"), bc = vocab_of("b c");
  const Vocabulary* vs[] = {&ab, &bc};
  const GlobalVocab gv = build_global_vocab(vs);
  const Mat p[] = {local_dist({0.8, 0.2}), local_dist({0.6, 0.4})};
  Mat w(1, 2);
  w << 0.5, 0.5;
  const Mat mix = mixture_step(gv, p, w);
  const Mat expected = local_dist({0.4, 0.4, 0.2});
  CHECK((mix - expected).cwiseAbs().maxCoeff() < 1e-15);

  w << 1.0, 0.0;
  CHECK(mixture_step(gv, p, w) == map_local_to_global(gv, 0, p[0]));

  // Tie between a and b goes to a; the second agent cannot emit a.
  const auto fb = per_agent_feedback(gv, std::span<const double>(mix.data(), static_cast<std::size_t>(mix.cols())));
  CHECK(fb == std::vector<int>{ab.id("a"), bc.id("b")});

  Mat bad(1, 3);
  bad << 0.3, 0.3, 0.4;
  CHECK_THROWS_AS(mixture_step(gv, p, bad), Error);
}

TEST_CASE("mixture algebra over random instances") {
  Rng rng(5);
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t k = 1 + uniform_index(rng, 4);
    std::vector<Vocabulary> vocabs;
    for (std::size_t j = 0; j <= k; ++j) vocabs.push_back(random_vocab(rng));
    std::vector<const Vocabulary*> ptrs;
    for (const auto& v : vocabs) ptrs.push_back(&v);
    const GlobalVocab gv = build_global_vocab(ptrs);
    const Eigen::Index rows = 3;
    std::vector<Mat> p;
    for (const auto& v : vocabs) p.push_back(random_simplex(rng, rows, static_cast<Eigen::Index>(v.size())));
    const Mat w = random_simplex(rng, rows, static_cast<Eigen::Index>(k + 1));
    const Mat mix = mixture_step(gv, p, w);
    Mat scaled_first = Mat::Zero(rows, static_cast<Eigen::Index>(gv.size()));
    for (std::size_t j = 0; j <= k; ++j) {
      const Mat wp = (p[j].array().colwise() * w.col(static_cast<Eigen::Index>(j)).array()).matrix();
      scaled_first += map_local_to_global(gv, j, wp);
    }
    CHECK((mix - scaled_first).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(mix.minCoeff() >= 0.0);
    for (Eigen::Index r = 0; r < rows; ++r) CHECK(std::abs(mix.row(r).sum() - 1.0) < 1e-6);
  }
}

TEST_CASE("per_agent_feedback guards") {
  const Vocabulary ab = vocab_of("a b"), cd = vocab_of("c d");
  const Vocabulary* vs[] = {&ab, &cd};
  const GlobalVocab gv = build_global_vocab(vs);
  // Mass only on a: the second agent's slice is all zero.
  std::vector<double> p(gv.size(), 0.0);
  p[static_cast<std::size_t>(gv.tokens.id("a"))] = 1.0;
  CHECK(per_agent_feedback(gv, p) == std::vector<int>{ab.id("a"), Vocabulary::kUnk});

  const Vocabulary* same[] = {&ab, &ab, &ab};
  const GlobalVocab gs = build_global_vocab(same);
  Rng rng(2);
  for (int rep = 0; rep < 50; ++rep) {
    const Mat q = random_simplex(rng, 1, static_cast<Eigen::Index>(gs.size()));
    const auto fb = per_agent_feedback(gs, std::span<const double>(q.data(), gs.size()));
    CHECK(fb[0] == fb[1]);
    CHECK(fb[1] == fb[2]);
  }
}

TEST_CASE("controller_step weights") {
  const AgentModel a0 = agent("x", "a b c", 1), a1 = agent("y", "c d", 2), a2 = agent("z", "e", 3);
  const MatSystem sys = make_system({&a0, &a1, &a2});
  ControllerParams c = controller(sys, 4);
  const std::vector<TokenIds> src{numericalize(tokenize("a b c"), kSource), numericalize(tokenize("d"), kSource)};
  {
    ControllerParams z = c;
    z.proj_w.value.setZero();
    z.proj_b.value.setZero();
    Graph g(false);
    ControllerRun run = controller_start(g, z, src);
    const std::vector<int> prev{Vocabulary::kBos, Vocabulary::kBos};
    const Mat w = g.value(controller_step(g, z, run, prev));
    CHECK((w.array() - 1.0 / 3).abs().maxCoeff() < 1e-15);
  }
  Rng rng(9);
  for (int rep = 0; rep < 10; ++rep) {
    init_controller(c, 100 + static_cast<std::uint64_t>(rep));
    init_uniform(c.proj_w, rng, 2.0);
    Graph g(false);
    ControllerRun run = controller_start(g, c, src);
    for (int t = 0; t < 10; ++t) {
      const std::vector<int> prev{static_cast<int>(uniform_index(rng, a0.target_vocab.size())),
                                  static_cast<int>(uniform_index(rng, a0.target_vocab.size()))};
      const Mat w = g.value(controller_step(g, c, run, prev));
      REQUIRE(w.cols() == 3);
      for (Eigen::Index r = 0; r < w.rows(); ++r) CHECK(std::abs(w.row(r).sum() - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("controller gradient matches finite differences") {
  const AgentModel a0 = agent("x", "a b c", 1), a1 = agent("y", "c d", 2);
  const MatSystem sys = make_system({&a0, &a1});
  ControllerParams c = controller(sys, 7);
  Rng rng(8);
  init_uniform(c.proj_w, rng, 0.5);
  init_uniform(c.proj_b, rng, 0.5);
  const std::vector<Sentence> src{tokenize("a b"), tokenize("c")};
  for (const auto& tgt : {std::vector<Sentence>{Sentence{}, Sentence{}}, std::vector<Sentence>{tokenize("c"), tokenize("a b")}}) {
    const auto params = c.parameters();
    zero_grads(params);
    Graph g;
    const Var loss = mat_batch_loss(g, c, sys, src, tgt);
    g.backward(loss);
    g.accumulate(params);
    const auto r = mast::testing::check_gradients(params, [&] {
      Graph f(false);
      return f.scalar(mat_batch_loss(f, c, sys, src, tgt));
    });
    CHECK(r.checked > 0);
    CHECK(r.max_rel_error < 1e-3);
  }
}

TEST_CASE("reference tokens outside the union are counted and scored as UNK") {
  const AgentModel a0 = agent("x", "a b", 1), a1 = agent("y", "b c", 2);
  const MatSystem sys = make_system({&a0, &a1});
  const ControllerParams c = controller(sys, 1);
  const std::vector<Sentence> src{tokenize("a")};
  std::size_t unk = 0;
  Graph g(false);
  const double with_oov = g.scalar(mat_batch_loss(g, c, sys, src, std::vector<Sentence>{tokenize("zz c")}, &unk));
  CHECK(unk == 1);
  Graph g2(false);
  const double with_unk = g2.scalar(mat_batch_loss(g2, c, sys, src, std::vector<Sentence>{tokenize("<unk> c")}));
  CHECK(with_oov == with_unk);
}

TEST_CASE("one-hot weights reduce mat_decode to the base agent") {
  const AgentModel a0 = agent("x", "a b c d e", 21, 8), a1 = agent("y", "c d e f g", 22, 8),
                   a2 = agent("z", "a g h", 23, 8);
  const MatSystem sys = make_system({&a0, &a1, &a2});
  Rng rng(4);
  const auto src = sentences(rng, 100);
  const auto expected = agent_greedy(a0, src, 12);

  MatDecodeOptions fixed;
  fixed.max_len = 12;
  fixed.fixed_weights = std::vector<double>{1.0, 0.0, 0.0};
  CHECK(mat_decode(ControllerParams{}, sys, src, fixed) == expected);

  // A controller whose bias saturates on agent 0.
  ControllerParams c = controller(sys, 5);
  c.proj_w.value.setZero();
  c.proj_b.value << 200.0, 0.0, 0.0;
  MatDecodeOptions opts;
  opts.max_len = 12;
  const auto got = mat_decode(c, sys, src, opts);
  CHECK(got == expected);
  for (const auto& s : got) {
    for (const auto& t : s) CHECK(a0.target_vocab.contains(t));
  }
}

TEST_CASE("mat_decode respects max_len and its own vocabulary") {
  AgentModel a0 = agent("x", "a b", 1), a1 = agent("y", "q r s", 2);
  // Never-EOS agents: the first emits a, the second q.
  for (AgentModel* a : {&a0, &a1}) {
    a->decoder.out_w.value.setZero();
    a->decoder.out_b.value.setZero();
    a->decoder.out_b.value(0, Vocabulary::kNumReserved) = 10.0;
  }
  const MatSystem sys = make_system({&a0, &a1});
  ControllerParams c = controller(sys, 3);
  c.proj_w.value.setZero();
  c.proj_b.value << 0.0, 5.0;  // mostly the neighbor
  const std::vector<Sentence> src{tokenize("a b"), tokenize("c")};
  MatDecodeOptions opts;
  opts.max_len = 7;
  for (const auto& s : mat_decode(c, sys, src, opts)) {
    CHECK(s.size() == 7);
    for (const auto& t : s) CHECK(t == "a");
  }
  opts.global_argmax = true;
  for (const auto& s : mat_decode(c, sys, src, opts)) CHECK(s == Sentence(7, "q"));
  opts.max_len = 0;
  CHECK(mat_decode(c, sys, src, opts) == std::vector<Sentence>(2));
}

TEST_CASE("mat_train: duplicate neighbor, frozen agents, checkpoints") {
  const AgentModel base = agent("x", "a b c d e f", 31, 8);
  const AgentModel dup = base;
  const MatSystem sys = make_system({&base, &dup});
  Rng rng(6);
  MatPairs train{sentences(rng, 12), sentences(rng, 12)};
  MatPairs dev{sentences(rng, 10), sentences(rng, 10)};
  MatSchedule sch;
  sch.epochs = 3;
  sch.batch_size = 4;
  sch.patience = 0;
  sch.max_len = 10;
  const std::string before = agent_digest(base);
  const MatResult r = mat_train(controller(sys, 2), sys, train, dev, sch, 9);
  CHECK(agent_digest(base) == before);
  CHECK(agent_digest(dup) == before);
  CHECK(r.dev_bleu.size() == 3);
  CHECK(r.train_loss.size() == 3);
  MatDecodeOptions opts;
  opts.max_len = 10;
  CHECK(mat_decode(r.best, sys, dev.src, opts) == agent_greedy(base, dev.src, 10));

  const MatResult again = mat_train(controller(sys, 2), sys, train, dev, sch, 9);
  CHECK(serialize_controller(again.best, sys) == serialize_controller(r.best, sys));

  const std::string text = serialize_controller(r.best, sys);
  const ControllerCheckpoint ckpt = parse_controller(text);
  CHECK(serialize_controller(ckpt.controller, sys) == text);
  CHECK_NOTHROW(verify_agents(ckpt, sys));

  AgentModel changed = base;
  changed.decoder.out_b.value(0, 0) += 1e-9;
  CHECK_THROWS_AS(verify_agents(ckpt, make_system({&changed, &dup})), Error);
  const AgentModel other = agent("w", "a b", 1);
  CHECK_THROWS_AS(verify_agents(ckpt, make_system({&base, &other})), Error);

  CHECK_THROWS_AS(mat_train(controller(sys, 2), sys, MatPairs{}, dev, sch, 9), Error);
  const MatSystem three = make_system({&base, &dup, &other});
  CHECK_THROWS_AS(mat_train(controller(sys, 2), three, train, dev, sch, 9), Error);
}
