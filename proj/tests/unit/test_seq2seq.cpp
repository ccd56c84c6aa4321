#include <cmath>
#include <set>

#include "doctest.h"
#include "gradcheck.hpp"
#include "mast/seq2seq.hpp"
#include "tmpdir.hpp"

using namespace mast;

namespace {

Vocabulary letters(const char* text = "a b c d e f g h") {
  return Vocabulary::build(std::vector<Sentence>{tokenize(text)}, 100);
}

AgentModel tiny_agent(int layers = 2, int hidden = 4, double dropout = 0.0, std::uint64_t seed = 1) {
  ModelDims dims{5, hidden, layers, dropout};
  return make_agent({0, "src"}, {1, "tgt"}, letters(), letters(), dims, seed);
}

void zero_all(AgentModel& a) {
  for (Parameter* p : a.parameters()) p->value.setZero();
}

bool same_params(const AgentModel& a, const AgentModel& b) {
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i]->value != pb[i]->value) return false;
  }
  return true;
}

TokenIds ids(const AgentModel& a, const char* text) { return numericalize(tokenize(text), a.source_vocab); }

}  // namespace

TEST_CASE("encode: shapes and zero parameters") {
  AgentModel a = tiny_agent();
  Graph g(false);
  const TokenIds one[] = {ids(a, "c")};
  const Encoded e = encode(g, a.encoder, a.dims, pad_batch(one), false, nullptr);
  REQUIRE(e.annotations.size() == 1);
  CHECK(g.value(e.annotations[0]).rows() == 1);
  CHECK(g.value(e.annotations[0]).cols() == 2 * a.dims.hidden);
  CHECK(e.initial.layers.size() == 2);

  zero_all(a);
  Graph g2(false);
  const TokenIds three[] = {ids(a, "a b c")};
  const Encoded z = encode(g2, a.encoder, a.dims, pad_batch(three), false, nullptr);
  for (Var v : z.annotations) CHECK(g2.value(v).isZero(0.0));
}

TEST_CASE("encode: halves match independent per-direction runs") {
  AgentModel a = tiny_agent(1, 3);
  const TokenIds x = ids(a, "a c e g b");
  const TokenIds batch[] = {x};
  Graph g(false);
  const Encoded e = encode(g, a.encoder, a.dims, pad_batch(batch), false, nullptr);

  // Oracle: plain lstm_cell loops, forward over x and over reversed x.
  auto run = [&](const LstmParams& p, const TokenIds& seq) {
    Graph o(false);
    LstmState s{o.constant(Mat::Zero(1, 3)), o.constant(Mat::Zero(1, 3))};
    std::vector<Mat> hs;
    for (int id : seq) {
      const int one[] = {id};
      s = lstm_cell(o, p, o.embedding(o.param(a.encoder.embedding), one), s);
      hs.push_back(o.value(s.h));
    }
    return hs;
  };
  const auto fwd = run(a.encoder.fwd[0], x);
  const TokenIds rev(x.rbegin(), x.rend());
  const auto bwd = run(a.encoder.bwd[0], rev);
  const std::size_t T = x.size();
  for (std::size_t t = 0; t < T; ++t) {
    const Mat& ann = g.value(e.annotations[t]);
    CHECK((ann.leftCols(3) - fwd[t]).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((ann.rightCols(3) - bwd[T - 1 - t]).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("decode_step: attention examples and output simplex") {
  AgentModel a = tiny_agent();
  a.decoder.attention.value.setZero();
  const TokenIds src[] = {ids(a, "a b c d")};
  Graph g(false);
  const Encoded e = encode(g, a.encoder, a.dims, pad_batch(src), false, nullptr);
  const AttentionMemory mem = attention_memory(g, a.decoder, e);
  const int bos[] = {Vocabulary::kBos};
  const StepResult r = decode_step(g, a.decoder, a.dims, e.initial, bos, mem, false, nullptr);
  const Mat& att = g.value(r.attention);
  REQUIRE(att.cols() == 4);
  for (Eigen::Index t = 0; t < 4; ++t) CHECK(att(0, t) == 0.25);

  // A single annotation gets all the attention whatever the scores.
  AgentModel b = tiny_agent();
  const TokenIds one[] = {ids(b, "e")};
  Graph g2(false);
  const Encoded e2 = encode(g2, b.encoder, b.dims, pad_batch(one), false, nullptr);
  const StepResult r2 = decode_step(g2, b.decoder, b.dims, e2.initial, bos,
                                    attention_memory(g2, b.decoder, e2), false, nullptr);
  CHECK(g2.value(r2.attention)(0, 0) == 1.0);
}

TEST_CASE("decode_step: probabilities sum to one for random parameterizations") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    AgentModel a = tiny_agent(2, 4, 0.0, 100 + static_cast<std::uint64_t>(trial));
    for (Parameter* p : a.parameters()) init_uniform(*p, rng, 1.0);
    const TokenIds src[] = {ids(a, "a b c"), ids(a, "h")};
    Graph g(false);
    const Encoded e = encode(g, a.encoder, a.dims, pad_batch(src), false, nullptr);
    const int prev[] = {Vocabulary::kBos, 5};
    const StepResult r = decode_step(g, a.decoder, a.dims, e.initial, prev,
                                     attention_memory(g, a.decoder, e), false, nullptr);
    const Mat p = g.value(g.softmax(r.logits));
    const Mat& att = g.value(r.attention);
    for (Eigen::Index row = 0; row < 2; ++row) {
      CHECK(std::abs(p.row(row).sum() - 1.0) < 1e-6);
      CHECK(p.row(row).allFinite());
      CHECK(std::abs(att.row(row).sum() - 1.0) < 1e-6);
      CHECK(att.row(row).minCoeff() >= 0.0);
    }
    // Padding positions of the short row receive no attention.
    CHECK(att(1, 1) == 0.0);
    CHECK(att(1, 2) == 0.0);
  }
}

TEST_CASE("teacher_forced_loss: analytic cases") {
  AgentModel a = tiny_agent();
  const double v = static_cast<double>(a.target_vocab.size());
  a.decoder.out_w.value.setZero();
  a.decoder.out_b.value.setZero();
  CHECK(teacher_forced_loss(a, ids(a, "a b"), ids(a, "c d e")) == doctest::Approx(std::log(v)).epsilon(1e-12));

  // A projection that always yields the gold token: target EOS, gold EOS EOS.
  a.decoder.out_b.value(0, Vocabulary::kEos) = 60.0;
  CHECK(teacher_forced_loss(a, ids(a, "a b"), TokenIds{Vocabulary::kEos}) < 1e-20);
}

TEST_CASE("teacher_forced_loss: padding does not change per-sentence losses") {
  AgentModel a = tiny_agent();
  const TokenIds s1 = ids(a, "a b c d"), t1 = ids(a, "e f");
  const TokenIds s2 = ids(a, "g"), t2 = ids(a, "h a b c");
  const double l1 = teacher_forced_loss(a, s1, t1);
  const double l2 = teacher_forced_loss(a, s2, t2);
  Graph g(false);
  const TokenIds src[] = {s1, s2};
  const TokenIds tgt[] = {t1, t2};
  const double joint = g.scalar(teacher_forced_loss(g, a.encoder, a.decoder, a.dims, src, tgt, false, nullptr));
  // Per-token mean over the batch: (3*l1 + 5*l2) / 8.
  CHECK(joint == doctest::Approx((3.0 * l1 + 5.0 * l2) / 8.0).epsilon(1e-12));
}

TEST_CASE("teacher_forced_loss: gradient matches finite differences") {
  AgentModel a = tiny_agent(2, 3);
  const TokenIds src[] = {ids(a, "a b")};
  const TokenIds tgt[] = {ids(a, "c d")};
  auto params = a.parameters();
  zero_grads(params);
  {
    Graph g;
    Var loss = teacher_forced_loss(g, a.encoder, a.decoder, a.dims, src, tgt, false, nullptr);
    g.backward(loss);
    g.accumulate(params);
  }
  const auto res = mast::testing::check_gradients(params, [&] {
    Graph g(false);
    return g.scalar(teacher_forced_loss(g, a.encoder, a.decoder, a.dims, src, tgt, false, nullptr));
  });
  CHECK(res.checked > 100);
  CHECK(res.max_rel_error < 1e-3);
}

TEST_CASE("teacher_forced_loss rejects invalid ids") {
  AgentModel a = tiny_agent();
  const TokenIds src[] = {ids(a, "a")};
  const TokenIds bad[] = {TokenIds{999}};
  Graph g;
  CHECK_THROWS_AS(teacher_forced_loss(g, a.encoder, a.decoder, a.dims, src, bad, false, nullptr), Error);
}

TEST_CASE("greedy_decode: EOS-first, cap, and ties") {
  AgentModel a = tiny_agent();
  a.decoder.out_w.value.setZero();
  a.decoder.out_b.value.setZero();
  a.decoder.out_b.value(0, Vocabulary::kEos) = 10.0;
  CHECK(greedy_decode(a, ids(a, "a b"), 10).empty());

  a.decoder.out_b.value(0, Vocabulary::kEos) = 0.0;
  a.decoder.out_b.value(0, 6) = 10.0;
  const TokenIds out = greedy_decode(a, ids(a, "a b"), 5);
  CHECK(out == TokenIds(5, 6));

  // All-equal logits: the lowest id wins.
  a.decoder.out_b.value.setZero();
  CHECK(greedy_decode(a, ids(a, "a"), 3) == TokenIds(3, 0));
  const double tied[] = {0.1, 0.7, 0.7, 0.2};
  CHECK(argmax_lowest(tied) == 1);
}

TEST_CASE("greedy_decode never exceeds max_len") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    AgentModel a = tiny_agent(1, 4, 0.0, 50 + static_cast<std::uint64_t>(trial));
    for (Parameter* p : a.parameters()) init_uniform(*p, rng, 0.8);
    const std::size_t cap = 1 + uniform_index(rng, 8);
    const TokenIds src[] = {ids(a, "a b c"), ids(a, "d"), ids(a, "e f g h a")};
    for (const auto& out : greedy_decode(a, src, cap)) CHECK(out.size() <= cap);
  }
}

TEST_CASE("batched and single greedy decoding agree") {
  AgentModel a = tiny_agent(2, 6, 0.0, 9);
  const std::vector<TokenIds> src{ids(a, "a b c"), ids(a, "d"), ids(a, "e f g h a b")};
  const auto batched = greedy_decode(a, src, 12);
  for (std::size_t i = 0; i < src.size(); ++i) CHECK(batched[i] == greedy_decode(a, src[i], 12));
}

namespace {

struct ToyTask {
  AgentModel agent;
  ParallelData train;
  DevSet dev;
};

/// Ten pairs whose target reverses and relabels the source.
ToyTask toy_task(bool copy, int hidden) {
  const Vocabulary v = letters("a b c d e f g h i j k l");
  ToyTask t;
  t.agent = make_agent({0, "src"}, {1, "tgt"}, v, v, ModelDims{16, hidden, 1, 0.0}, 4);
  Rng rng(21);
  for (int i = 0; i < 10; ++i) {
    Sentence s;
    const std::size_t n = 2 + uniform_index(rng, 4);
    for (std::size_t k = 0; k < n; ++k) s.push_back(v.token(4 + static_cast<int>(uniform_index(rng, 12))));
    Sentence y = s;
    if (!copy) {
      std::reverse(y.begin(), y.end());
      for (auto& tok : y) tok = v.token(4 + (v.id(tok) - 4 + 1) % 12);
    }
    t.train.src.push_back(numericalize(s, v));
    t.train.tgt.push_back(numericalize(y, v));
    t.dev.src.push_back(numericalize(s, v));
    t.dev.refs.push_back(y);
  }
  return t;
}

}  // namespace

TEST_CASE("training memorizes a 10-pair toy set") {
  ToyTask t = toy_task(false, 32);
  TrainSchedule sch;
  sch.epochs = 200;
  sch.batch_size = 2;
  sch.patience = 0;
  sch.sgd = {1.0, 5.0};
  sch.per_sentence_loss = false;
  sch.max_len = 10;
  const TrainResult r = train_atts2s(t.agent, t.train, t.dev, sch, 3);
  for (std::size_t i = 0; i < t.train.src.size(); ++i) {
    CHECK(greedy_decode(r.best, t.train.src[i], 10) == t.train.tgt[i]);
  }
  // A memorized pair scores far below the uniform ln|V|.
  CHECK(teacher_forced_loss(r.best, t.train.src[0], t.train.tgt[0]) <
        std::log(static_cast<double>(r.best.target_vocab.size())));
}

TEST_CASE("copy task reaches dev BLEU above 90 with H=32") {
  ToyTask t = toy_task(true, 32);
  TrainSchedule sch;
  sch.epochs = 300;
  sch.batch_size = 2;
  sch.patience = 0;
  sch.sgd = {1.0, 5.0};
  sch.per_sentence_loss = false;
  sch.max_len = 10;
  const TrainResult r = train_atts2s(t.agent, t.train, t.dev, sch, 3);
  CHECK(*std::max_element(r.dev_bleu.begin(), r.dev_bleu.end()) > 90.0);
}

TEST_CASE("train_atts2s: zero epochs, determinism, empty data") {
  ToyTask t = toy_task(true, 8);
  TrainSchedule sch;
  sch.epochs = 0;
  CHECK(same_params(train_atts2s(t.agent, t.train, t.dev, sch, 1).best, t.agent));

  sch.epochs = 4;
  sch.batch_size = 3;
  sch.patience = 0;
  const TrainResult a = train_atts2s(t.agent, t.train, t.dev, sch, 7);
  const TrainResult b = train_atts2s(t.agent, t.train, t.dev, sch, 7);
  CHECK(a.dev_bleu == b.dev_bleu);
  CHECK(a.train_loss == b.train_loss);
  CHECK(serialize_agent(a.best) == serialize_agent(b.best));

  CHECK_THROWS_AS(train_atts2s(t.agent, ParallelData{}, t.dev, sch, 1), Error);
}

TEST_CASE("BatchCursor visits every item once per pass") {
  std::vector<std::size_t> lengths;
  Rng rng(2);
  for (int i = 0; i < 103; ++i) lengths.push_back(1 + uniform_index(rng, 20));
  for (bool bucketed : {false, true}) {
    BatchCursor c = bucketed ? BatchCursor(lengths, 4, make_rng(1, "b")) : BatchCursor(lengths.size(), 4, make_rng(1, "b"));
    CHECK(c.batches_per_pass() == 26);
    for (int pass = 0; pass < 3; ++pass) {
      std::multiset<std::size_t> seen;
      for (std::size_t b = 0; b < c.batches_per_pass(); ++b) {
        const auto batch = c.next();
        CHECK(batch.size() <= 4);
        seen.insert(batch.begin(), batch.end());
      }
      CHECK(seen.size() == lengths.size());
      CHECK(std::set<std::size_t>(seen.begin(), seen.end()).size() == lengths.size());
    }
  }
}

TEST_CASE("BatchCursor bucketing reduces padding") {
  std::vector<std::size_t> lengths;
  Rng rng(2);
  for (int i = 0; i < 512; ++i) lengths.push_back(1 + uniform_index(rng, 30));
  auto padded = [&](BatchCursor c) {
    std::size_t total = 0;
    for (std::size_t b = 0; b < c.batches_per_pass(); ++b) {
      const auto batch = c.next();
      std::size_t longest = 0;
      for (auto i : batch) longest = std::max(longest, lengths[i]);
      total += longest * batch.size();
    }
    return total;
  };
  CHECK(padded(BatchCursor(lengths, 16, make_rng(1, "b"))) < padded(BatchCursor(lengths.size(), 16, make_rng(1, "b"))));
}

TEST_CASE("agent checkpoints round-trip bit-exactly") {
  mast::testing::TempDir dir;
  AgentModel a = tiny_agent(2, 4, 0.3, 77);
  save_agent(a, dir.path / "a.ckpt");
  const AgentModel back = load_agent(dir.path / "a.ckpt");
  CHECK(same_params(a, back));
  CHECK(back.dims == a.dims);
  CHECK(back.source_vocab == a.source_vocab);
  CHECK(back.target == a.target);
  CHECK(serialize_agent(back) == serialize_agent(a));

  // Extents are validated against the embedded vocabularies.
  std::string text = serialize_agent(a);
  const auto pos = text.find("target_vocab 12\n");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 16, "target_vocab 11\n");
  CHECK_THROWS_AS(parse_agent(text), Error);
}
