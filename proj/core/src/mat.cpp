#include "mast/mat.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <set>

#include "mast/digest.hpp"
#include "text_io.hpp"

namespace mast {

GlobalVocab build_global_vocab(std::span<const Vocabulary* const> vocabs) {
  if (vocabs.empty()) fail(ErrorKind::InvalidConfig, "build_global_vocab: no vocabularies");
  const auto& reserved = Vocabulary::reserved_tokens();
  std::set<std::string> rest;
  for (const Vocabulary* v : vocabs) {
    for (std::size_t i = Vocabulary::kNumReserved; i < v->size(); ++i) rest.insert(v->tokens()[i]);
  }
  std::vector<std::string> tokens(reserved.begin(), reserved.end());
  tokens.insert(tokens.end(), rest.begin(), rest.end());
  GlobalVocab gv;
  gv.tokens = Vocabulary::from_tokens(std::move(tokens));
  for (const Vocabulary* v : vocabs) {
    std::vector<int> fwd(v->size());
    std::vector<int> back(gv.size(), -1);
    std::vector<unsigned char> mask(gv.size(), 0);
    for (std::size_t i = 0; i < v->size(); ++i) {
      const int gid = gv.tokens.id(v->tokens()[i]);
      fwd[i] = gid;
      back[static_cast<std::size_t>(gid)] = static_cast<int>(i);
      mask[static_cast<std::size_t>(gid)] = 1;
    }
    gv.to_global.push_back(std::move(fwd));
    gv.to_local.push_back(std::move(back));
    gv.mask.push_back(std::move(mask));
  }
  return gv;
}

GlobalVocab build_global_vocab(std::span<const AgentModel* const> agents) {
  std::vector<const Vocabulary*> vocabs;
  for (const AgentModel* a : agents) vocabs.push_back(&a->target_vocab);
  return build_global_vocab(vocabs);
}

Mat map_local_to_global(const GlobalVocab& gv, std::size_t agent, const Mat& local) {
  if (agent >= gv.agents()) fail(ErrorKind::IndexOutOfRange, "map_local_to_global: bad agent");
  const auto& m = gv.to_global[agent];
  if (static_cast<std::size_t>(local.cols()) != m.size()) {
    fail(ErrorKind::ShapeMismatch, "map_local_to_global: distribution has " +
                                       std::to_string(local.cols()) + " entries, vocabulary " +
                                       std::to_string(m.size()));
  }
  Mat out = Mat::Zero(local.rows(), static_cast<Eigen::Index>(gv.size()));
  for (std::size_t i = 0; i < m.size(); ++i) {
    out.col(m[i]) = local.col(static_cast<Eigen::Index>(i));
  }
  return out;
}

Mat mixture_step(const GlobalVocab& gv, std::span<const Mat> local, const Mat& weights) {
  if (local.size() != gv.agents() || static_cast<std::size_t>(weights.cols()) != local.size()) {
    fail(ErrorKind::ShapeMismatch, "mixture_step: one distribution and weight per agent");
  }
  Mat out = Mat::Zero(weights.rows(), static_cast<Eigen::Index>(gv.size()));
  for (std::size_t j = 0; j < local.size(); ++j) {
    if (local[j].rows() != weights.rows()) fail(ErrorKind::ShapeMismatch, "mixture_step: row count");
    const Mat g = map_local_to_global(gv, j, local[j]);
    out += (g.array().colwise() * weights.col(static_cast<Eigen::Index>(j)).array()).matrix();
  }
  return out;
}

std::vector<int> per_agent_feedback(const GlobalVocab& gv, std::span<const double> p) {
  if (p.size() != gv.size()) fail(ErrorKind::ShapeMismatch, "per_agent_feedback: wrong length");
  std::vector<int> out;
  for (std::size_t j = 0; j < gv.agents(); ++j) {
    int best = -1;
    for (std::size_t a = 0; a < p.size(); ++a) {
      if (gv.mask[j][a] && p[a] > 0.0 && (best < 0 || p[a] > p[static_cast<std::size_t>(best)])) {
        best = static_cast<int>(a);
      }
    }
    out.push_back(best < 0 ? Vocabulary::kUnk : gv.to_local[j][static_cast<std::size_t>(best)]);
  }
  return out;
}

// ---------------------------------------------------------------------------

ControllerParams::ControllerParams(std::size_t source_vocab, std::size_t agent0_vocab,
                                   std::size_t k_, const ControllerConfig& cfg)
    : k(k_),
      config(cfg),
      encoder(source_vocab, encoder_dims()),
      embedding("controller.embedding", static_cast<Eigen::Index>(agent0_vocab), cfg.embed),
      lstm("controller.lstm", cfg.embed, cfg.hidden),
      attention("controller.attention", 2 * cfg.hidden, cfg.hidden),
      proj_w("controller.proj.w", 3 * cfg.hidden, static_cast<Eigen::Index>(k_ + 1)),
      proj_b("controller.proj.b", 1, static_cast<Eigen::Index>(k_ + 1)) {}

std::vector<Parameter*> ControllerParams::parameters() {
  std::vector<Parameter*> out;
  encoder.for_each([&](Parameter& p) { out.push_back(&p); });
  out.push_back(&embedding);
  lstm.for_each([&](Parameter& p) { out.push_back(&p); });
  out.insert(out.end(), {&attention, &proj_w, &proj_b});
  return out;
}

std::vector<const Parameter*> ControllerParams::parameters() const {
  std::vector<const Parameter*> out;
  for (Parameter* p : const_cast<ControllerParams*>(this)->parameters()) out.push_back(p);
  return out;
}

void init_controller(ControllerParams& c, std::uint64_t seed) {
  init_encoder(c.encoder, derive_seed(seed, "controller"));
  Rng rng = make_rng(seed, "controller/head");
  init_uniform(c.embedding, rng);
  init_lstm(c.lstm, rng);
  init_uniform(c.attention, rng);
  init_uniform(c.proj_w, rng);
  c.proj_b.value.setZero();
}

MatSystem make_system(std::vector<const AgentModel*> agents) {
  if (agents.size() < 2) fail(ErrorKind::InvalidConfig, "MAT needs an agent and at least one neighbor");
  for (const AgentModel* a : agents) {
    if (a->source.name != agents[0]->source.name) {
      fail(ErrorKind::VocabMismatch, "MAT agents must share the source style");
    }
  }
  MatSystem sys;
  sys.global = build_global_vocab(std::span<const AgentModel* const>(agents));
  sys.agents = std::move(agents);
  return sys;
}

ControllerRun controller_start(Graph& g, const ControllerParams& c, std::span<const TokenIds> src) {
  const ModelDims dims = c.encoder_dims();
  Encoded enc = encode(g, c.encoder, dims, pad_batch(src), false, nullptr);
  ControllerRun run;
  run.memory.score_mask = enc.score_mask;
  const Var w = g.param(c.attention);
  for (Var a : enc.annotations) {
    run.memory.keys.push_back(g.matmul(a, w));
    run.memory.values.push_back(a);
  }
  run.state = enc.initial.layers[0];
  return run;
}

Var controller_step(Graph& g, const ControllerParams& c, ControllerRun& run,
                    std::span<const int> prev_agent0) {
  const Eigen::Index h = c.config.hidden;
  Var x = g.embedding(g.param(c.embedding), prev_agent0);
  run.state = lstm_cell(g, c.lstm, x, run.state);
  Var attended = g.attention(run.state.h, run.memory.keys, run.memory.values, run.memory.score_mask);
  const Var parts[] = {run.state.h, g.slice_cols(attended, 0, 2 * h)};
  return g.softmax(g.affine(g.concat_cols(parts), g.param(c.proj_w), g.param(c.proj_b)));
}

namespace {

std::vector<TokenIds> source_ids(std::span<const Sentence> src, const Vocabulary& vocab) {
  std::vector<TokenIds> out;
  for (const auto& s : src) {
    TokenIds ids = numericalize(s, vocab);
    if (ids.empty()) ids.push_back(Vocabulary::kUnk);
    out.push_back(std::move(ids));
  }
  return out;
}

Mat row_softmax(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

/// One frozen agent advancing in lockstep with the others.
class AgentRunner {
 public:
  AgentRunner(const AgentModel& agent, std::span<const Sentence> src)
      : agent_(agent), graph_(std::make_unique<Graph>(false)) {
    const auto ids = source_ids(src, agent.source_vocab);
    Encoded enc = encode(*graph_, agent.encoder, agent.dims, pad_batch(ids), false, nullptr);
    memory_ = attention_memory(*graph_, agent.decoder, enc);
    state_ = std::move(enc.initial);
    prev_.assign(src.size(), Vocabulary::kBos);
    ended_.assign(src.size(), false);
  }

  /// Probabilities over the agent's own vocabulary for the next token.
  Mat step() {
    StepResult s = decode_step(*graph_, agent_.decoder, agent_.dims, state_, prev_, memory_, false,
                               nullptr);
    state_ = std::move(s.state);
    return row_softmax(graph_->value(s.logits));
  }

  void feed(std::size_t row, int token) {
    if (ended_[row]) token = Vocabulary::kEos;
    if (token == Vocabulary::kEos) ended_[row] = true;
    prev_[row] = token;
  }

  int prev(std::size_t row) const { return prev_[row]; }

 private:
  const AgentModel& agent_;
  std::unique_ptr<Graph> graph_;
  AttentionMemory memory_;
  DecoderState state_;
  std::vector<int> prev_;
  std::vector<bool> ended_;
};

struct Lockstep {
  std::vector<AgentRunner> agents;
  std::vector<Mat> global;  // per agent, this step's distribution in global space

  Lockstep(const MatSystem& sys, std::span<const Sentence> src) {
    agents.reserve(sys.agents.size());
    for (const AgentModel* a : sys.agents) agents.emplace_back(*a, src);
  }

  void step(const MatSystem& sys) {
    global.clear();
    for (std::size_t j = 0; j < agents.size(); ++j) {
      global.push_back(map_local_to_global(sys.global, j, agents[j].step()));
    }
  }

  void feedback(const MatSystem& sys, const Mat& p) {
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      const auto fb = per_agent_feedback(
          sys.global, std::span<const double>(p.row(r).data(), static_cast<std::size_t>(p.cols())));
      for (std::size_t j = 0; j < agents.size(); ++j) agents[j].feed(static_cast<std::size_t>(r), fb[j]);
    }
  }

  std::vector<int> prev0(std::size_t rows) const {
    std::vector<int> out(rows);
    for (std::size_t r = 0; r < rows; ++r) out[r] = agents[0].prev(r);
    return out;
  }
};

void check_controller(const ControllerParams& c, const MatSystem& sys) {
  if (c.k + 1 != sys.agents.size()) {
    fail(ErrorKind::VocabMismatch, "controller expects " + std::to_string(c.k + 1) + " agents, got " +
                                       std::to_string(sys.agents.size()));
  }
  if (static_cast<std::size_t>(c.embedding.value.rows()) != sys.agents[0]->target_vocab.size() ||
      static_cast<std::size_t>(c.encoder.embedding.value.rows()) != sys.agents[0]->source_vocab.size()) {
    fail(ErrorKind::VocabMismatch, "controller vocabulary sizes differ from agent 0");
  }
}

}  // namespace

std::vector<Sentence> mat_decode(const ControllerParams& c, const MatSystem& sys,
                                 std::span<const Sentence> src, const MatDecodeOptions& opts) {
  const std::size_t rows = src.size();
  std::vector<Sentence> out(rows);
  if (rows == 0 || opts.max_len == 0) return out;
  Mat fixed;
  if (opts.fixed_weights) {
    if (opts.fixed_weights->size() != sys.agents.size()) {
      fail(ErrorKind::ShapeMismatch, "mat_decode: one fixed weight per agent");
    }
    fixed = Mat(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(sys.agents.size()));
    for (std::size_t j = 0; j < sys.agents.size(); ++j) {
      fixed.col(static_cast<Eigen::Index>(j)).setConstant((*opts.fixed_weights)[j]);
    }
  } else {
    check_controller(c, sys);
  }

  Graph g(false);
  Lockstep lock(sys, src);
  std::optional<ControllerRun> run;
  if (!opts.fixed_weights) run = controller_start(g, c, source_ids(src, sys.agents[0]->source_vocab));
  const Vocabulary& own = sys.agents[0]->target_vocab;
  std::vector<bool> done(rows, false);
  std::size_t remaining = rows;
  for (std::size_t t = 0; t < opts.max_len && remaining > 0; ++t) {
    lock.step(sys);
    Mat w = run ? g.value(controller_step(g, c, *run, lock.prev0(rows))) : fixed;
    Mat p = Mat::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(sys.global.size()));
    for (std::size_t j = 0; j < lock.global.size(); ++j) {
      p += (lock.global[j].array().colwise() * w.col(static_cast<Eigen::Index>(j)).array()).matrix();
    }
    lock.feedback(sys, p);
    for (std::size_t r = 0; r < rows; ++r) {
      if (done[r]) continue;
      std::string token;
      if (opts.global_argmax) {
        const auto a = argmax_lowest(std::span<const double>(p.row(static_cast<Eigen::Index>(r)).data(),
                                                             static_cast<std::size_t>(p.cols())));
        token = sys.global.tokens.token(static_cast<int>(a));
      } else {
        token = own.token(lock.agents[0].prev(r));
      }
      if (token == Vocabulary::reserved_tokens()[Vocabulary::kEos]) {
        done[r] = true;
        --remaining;
      } else {
        out[r].push_back(std::move(token));
      }
    }
  }
  return out;
}

Var mat_batch_loss(Graph& g, const ControllerParams& c, const MatSystem& sys,
                   std::span<const Sentence> src, std::span<const Sentence> tgt,
                   std::size_t* unk_references) {
  if (src.size() != tgt.size() || src.empty()) {
    fail(ErrorKind::ShapeMismatch, "mat_batch_loss: need equally many non-zero pairs");
  }
  check_controller(c, sys);
  const std::size_t rows = src.size();
  std::size_t steps = 0;
  for (const auto& y : tgt) steps = std::max(steps, y.size() + 1);

  Lockstep lock(sys, src);
  ControllerRun run = controller_start(g, c, source_ids(src, sys.agents[0]->source_vocab));
  std::vector<int> gold(rows);
  std::vector<double> weight(rows);
  Var total{};
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t r = 0; r < rows; ++r) {
      const auto& y = tgt[r];
      if (t < y.size()) {
        gold[r] = sys.global.tokens.id(y[t]);
        if (unk_references && !sys.global.tokens.contains(y[t])) ++*unk_references;
      } else {
        gold[r] = t == y.size() ? Vocabulary::kEos : Vocabulary::kPad;
      }
      weight[r] = t <= y.size() ? 1.0 / (static_cast<double>(y.size() + 1) * static_cast<double>(rows)) : 0.0;
    }
    lock.step(sys);
    Var w = controller_step(g, c, run, lock.prev0(rows));
    Var p = g.mix(w, lock.global);
    Var term = g.cross_entropy(p, gold, weight);
    total = t == 0 ? term : g.add(total, term);
    lock.feedback(sys, g.value(p));
  }
  return total;
}

MatResult mat_train(ControllerParams controller, const MatSystem& sys, const MatPairs& train,
                    const MatPairs& dev, const MatSchedule& schedule, std::uint64_t seed) {
  if (train.src.empty() || train.src.size() != train.tgt.size()) {
    fail(ErrorKind::EmptyTrainingSet, "mat_train: no labeled pairs");
  }
  check_controller(controller, sys);
  MatResult result;
  result.best = controller;
  BatchCursor cursor(train.src.size(), schedule.batch_size, make_rng(seed, "mat/batches"));
  const auto params = controller.parameters();
  zero_grads(params);
  MatDecodeOptions dec;
  dec.max_len = schedule.max_len;
  auto dev_bleu = [&]() {
    std::vector<Sentence> hyps;
    const std::size_t eb = std::max<std::size_t>(1, schedule.eval_batch);
    for (std::size_t i = 0; i < dev.src.size(); i += eb) {
      const std::size_t n = std::min(eb, dev.src.size() - i);
      for (auto& h : mat_decode(controller, sys, std::span(dev.src).subspan(i, n), dec)) {
        hyps.push_back(std::move(h));
      }
    }
    return hyps.empty() ? 0.0 : bleu(hyps, dev.tgt);
  };
  double best = -1.0;
  int since_best = 0;
  for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
    double loss_sum = 0.0;
    const std::size_t nb = cursor.batches_per_pass();
    for (std::size_t b = 0; b < nb; ++b) {
      std::vector<Sentence> src, tgt;
      for (auto i : cursor.next()) {
        src.push_back(train.src[i]);
        tgt.push_back(train.tgt[i]);
      }
      Graph g;
      std::size_t unk = 0;
      Var loss = mat_batch_loss(g, controller, sys, src, tgt, &unk);
      if (epoch == 0) result.unk_references += unk;
      loss_sum += g.scalar(loss);
      g.backward(loss);
      g.accumulate(params);
      sgd_step(params, schedule.sgd);
      zero_grads(params);
    }
    result.train_loss.push_back(loss_sum / static_cast<double>(nb));
    const double score = dev_bleu();
    result.dev_bleu.push_back(score);
    if (score > best) {
      best = score;
      result.best = controller;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (schedule.patience > 0 && ++since_best >= schedule.patience) {
      break;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------

std::string serialize_controller(const ControllerParams& c, const MatSystem& sys) {
  std::string out = "mast-controller 1\n";
  out += "k " + std::to_string(c.k) + "\n";
  out += "dims " + std::to_string(c.config.embed) + " " + std::to_string(c.config.hidden) + "\n";
  out += "agents " + std::to_string(sys.agents.size()) + "\n";
  for (const AgentModel* a : sys.agents) {
    out += "agent " + a->source.name + " " + a->target.name + " " + agent_digest(*a) + "\n";
  }
  out += serialize_vocab("source_vocab", sys.agents[0]->source_vocab);
  out += serialize_vocab("agent0_vocab", sys.agents[0]->target_vocab);
  out += serialize_vocab("global_vocab", sys.global.tokens);
  out += "params\n" + serialize_params(c.parameters());
  return out;
}

ControllerCheckpoint parse_controller(std::string_view text) {
  detail::LineReader in(text);
  const auto header = in.keyed("mast-controller");
  if (header.size() != 1 || header[0] != "1") fail(ErrorKind::ParseError, "controller: bad header");
  const auto k = in.keyed("k");
  const auto dims = in.keyed("dims");
  const auto count = in.keyed("agents");
  if (k.size() != 1 || dims.size() != 2 || count.size() != 1) {
    fail(ErrorKind::ParseError, "controller: bad metadata");
  }
  ControllerCheckpoint ckpt;
  const std::size_t n = std::stoul(count[0]);
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = in.keyed("agent");
    if (a.size() != 3) fail(ErrorKind::ParseError, "controller: bad agent record");
    ckpt.agents.push_back({a[0], a[1], a[2]});
  }
  const Vocabulary sv = in.vocab("source_vocab");
  const Vocabulary tv = in.vocab("agent0_vocab");
  ckpt.global_tokens = in.vocab("global_vocab").tokens();
  ControllerConfig cfg{std::stoi(dims[0]), std::stoi(dims[1])};
  ckpt.controller = ControllerParams(sv.size(), tv.size(), std::stoul(k[0]), cfg);
  in.keyed("params");
  load_params(in.rest(), ckpt.controller.parameters());
  return ckpt;
}

void verify_agents(const ControllerCheckpoint& ckpt, const MatSystem& sys) {
  if (ckpt.agents.size() != sys.agents.size()) {
    fail(ErrorKind::DigestMismatch, "controller was trained with " +
                                        std::to_string(ckpt.agents.size()) + " agents");
  }
  for (std::size_t j = 0; j < sys.agents.size(); ++j) {
    const AgentModel& a = *sys.agents[j];
    const AgentRef& ref = ckpt.agents[j];
    if (ref.source != a.source.name || ref.target != a.target.name) {
      fail(ErrorKind::DigestMismatch, "agent " + std::to_string(j) + " is " + a.source.name + "->" +
                                          a.target.name + ", expected " + ref.source + "->" + ref.target);
    }
    if (ref.digest != agent_digest(a)) {
      fail(ErrorKind::DigestMismatch, "agent " + a.target.name + " parameters changed since training");
    }
  }
  if (ckpt.global_tokens != sys.global.tokens.tokens()) {
    fail(ErrorKind::VocabMismatch, "global vocabulary differs from the checkpoint");
  }
}

}  // namespace mast
