#include "mast/seq2seq.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "text_io.hpp"

namespace mast {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::string layer_name(const char* net, std::size_t l, const char* part) {
  return std::string(net) + ".l" + std::to_string(l) + "." + part;
}

}  // namespace

EncoderParams::EncoderParams(std::size_t vocab_size, const ModelDims& dims)
    : embedding("encoder.embedding", static_cast<Eigen::Index>(vocab_size), dims.embed) {
  const Eigen::Index h = dims.hidden;
  for (std::size_t l = 0; l < static_cast<std::size_t>(dims.layers); ++l) {
    const Eigen::Index in = l == 0 ? dims.embed : 2 * h;
    fwd.emplace_back(layer_name("encoder", l, "fwd"), in, h);
    bwd.emplace_back(layer_name("encoder", l, "bwd"), in, h);
    bridge_w.emplace_back(layer_name("encoder", l, "bridge.w"), 4 * h, 2 * h);
    bridge_b.emplace_back(layer_name("encoder", l, "bridge.b"), 1, 2 * h);
  }
}

DecoderParams::DecoderParams(std::size_t vocab_size, const ModelDims& dims)
    : embedding("decoder.embedding", static_cast<Eigen::Index>(vocab_size), dims.embed),
      attention("decoder.attention", 2 * dims.hidden, dims.hidden),
      combine_w("decoder.combine.w", 3 * dims.hidden, dims.hidden),
      combine_b("decoder.combine.b", 1, dims.hidden),
      out_w("decoder.out.w", dims.hidden, static_cast<Eigen::Index>(vocab_size)),
      out_b("decoder.out.b", 1, static_cast<Eigen::Index>(vocab_size)) {
  for (std::size_t l = 0; l < static_cast<std::size_t>(dims.layers); ++l) {
    layers.emplace_back(layer_name("decoder", l, "lstm"), l == 0 ? dims.embed : dims.hidden,
                        dims.hidden);
  }
}

void init_encoder(EncoderParams& enc, std::uint64_t seed) {
  Rng rng = make_rng(seed, "encoder");
  init_uniform(enc.embedding, rng);
  for (std::size_t l = 0; l < enc.fwd.size(); ++l) {
    init_lstm(enc.fwd[l], rng);
    init_lstm(enc.bwd[l], rng);
    init_uniform(enc.bridge_w[l], rng);
    enc.bridge_b[l].value.setZero();
  }
}

void init_decoder(DecoderParams& dec, std::uint64_t seed) {
  Rng rng = make_rng(seed, "decoder");
  init_uniform(dec.embedding, rng);
  for (auto& l : dec.layers) init_lstm(l, rng);
  init_uniform(dec.attention, rng);
  init_uniform(dec.combine_w, rng);
  dec.combine_b.value.setZero();
  init_uniform(dec.out_w, rng);
  dec.out_b.value.setZero();
}

std::vector<Parameter*> AgentModel::parameters() {
  std::vector<Parameter*> out;
  encoder.for_each([&](Parameter& p) { out.push_back(&p); });
  decoder.for_each([&](Parameter& p) { out.push_back(&p); });
  return out;
}

std::vector<const Parameter*> AgentModel::parameters() const {
  std::vector<const Parameter*> out;
  encoder.for_each([&](const Parameter& p) { out.push_back(&p); });
  decoder.for_each([&](const Parameter& p) { out.push_back(&p); });
  return out;
}

AgentModel make_agent(StyleId source, StyleId target, Vocabulary source_vocab,
                      Vocabulary target_vocab, const ModelDims& dims, std::uint64_t seed) {
  if (dims.embed <= 0 || dims.hidden <= 0 || dims.layers <= 0) {
    fail(ErrorKind::InvalidConfig, "model dimensions must be positive");
  }
  AgentModel agent;
  agent.source = std::move(source);
  agent.target = std::move(target);
  agent.dims = dims;
  agent.encoder = EncoderParams(source_vocab.size(), dims);
  agent.decoder = DecoderParams(target_vocab.size(), dims);
  agent.source_vocab = std::move(source_vocab);
  agent.target_vocab = std::move(target_vocab);
  init_encoder(agent.encoder, seed);
  init_decoder(agent.decoder, seed);
  return agent;
}

PaddedBatch pad_batch(std::span<const TokenIds> sequences) {
  PaddedBatch b;
  b.batch = sequences.size();
  std::size_t longest = 0;
  for (const auto& s : sequences) {
    b.lengths.push_back(s.size());
    longest = std::max(longest, s.size());
  }
  b.ids.assign(longest, std::vector<int>(b.batch, Vocabulary::kPad));
  b.masks.assign(longest, Mat::Zero(static_cast<Eigen::Index>(b.batch), 1));
  for (std::size_t r = 0; r < b.batch; ++r) {
    for (std::size_t t = 0; t < sequences[r].size(); ++t) {
      b.ids[t][r] = sequences[r][t];
      b.masks[t](static_cast<Eigen::Index>(r), 0) = 1.0;
    }
  }
  return b;
}

namespace {

LstmState masked_step(Graph& g, const LstmParams& p, Var x_wx, LstmState prev, const Mat& mask) {
  LstmState fresh = lstm_cell_projected(g, p, x_wx, prev);
  return {g.blend(fresh.h, prev.h, mask), g.blend(fresh.c, prev.c, mask)};
}

Var maybe_dropout(Graph& g, Var x, double rate, bool training, Rng* rng) {
  if (!training || rate == 0.0 || rng == nullptr) return x;
  return g.dropout(x, rate, true, *rng);
}

}  // namespace

Encoded encode(Graph& g, const EncoderParams& enc, const ModelDims& dims, const PaddedBatch& src,
               bool training, Rng* rng) {
  const std::size_t steps = src.steps();
  if (steps == 0) fail(ErrorKind::InvalidId, "encode: empty source batch");
  for (std::size_t r = 0; r < src.batch; ++r) {
    if (src.lengths[r] == 0) fail(ErrorKind::InvalidId, "encode: empty source sentence");
  }
  const auto rows = static_cast<Eigen::Index>(src.batch);
  const Eigen::Index h = dims.hidden;

  Var table = g.param(enc.embedding);
  std::vector<Var> inputs(steps);
  for (std::size_t t = 0; t < steps; ++t) inputs[t] = g.embedding(table, src.ids[t]);

  Encoded out;
  out.score_mask = Mat::Zero(rows, static_cast<Eigen::Index>(steps));
  for (std::size_t t = 0; t < steps; ++t) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      if (src.masks[t](r, 0) == 0.0) out.score_mask(r, static_cast<Eigen::Index>(t)) = kNegInf;
    }
  }

  const Var zeros = g.constant(Mat::Zero(rows, h));
  for (std::size_t l = 0; l < enc.fwd.size(); ++l) {
    // Input projections for every time step in one product per direction.
    const Var stacked = g.concat_rows(inputs);
    const Var proj_f = g.matmul(stacked, g.param(enc.fwd[l].wx));
    const Var proj_b = g.matmul(stacked, g.param(enc.bwd[l].wx));
    std::vector<Var> fwd_out(steps), bwd_out(steps);
    LstmState f{zeros, zeros};
    for (std::size_t t = 0; t < steps; ++t) {
      f = masked_step(g, enc.fwd[l], g.slice_rows(proj_f, static_cast<Eigen::Index>(t) * rows, rows),
                      f, src.masks[t]);
      fwd_out[t] = f.h;
    }
    LstmState b{zeros, zeros};
    for (std::size_t t = steps; t-- > 0;) {
      b = masked_step(g, enc.bwd[l], g.slice_rows(proj_b, static_cast<Eigen::Index>(t) * rows, rows),
                      b, src.masks[t]);
      bwd_out[t] = b.h;
    }
    const Var finals[] = {f.h, b.h, f.c, b.c};
    Var bridged = g.tanh(g.affine(g.concat_cols(finals), g.param(enc.bridge_w[l]),
                                  g.param(enc.bridge_b[l])));
    out.initial.layers.push_back({g.slice_cols(bridged, 0, h), g.slice_cols(bridged, h, h)});
    for (std::size_t t = 0; t < steps; ++t) {
      const Var both[] = {fwd_out[t], bwd_out[t]};
      inputs[t] = maybe_dropout(g, g.concat_cols(both), dims.dropout, training, rng);
    }
  }
  out.annotations = std::move(inputs);
  return out;
}

AttentionMemory attention_memory(Graph& g, const DecoderParams& dec, const Encoded& encoded) {
  AttentionMemory mem;
  mem.score_mask = encoded.score_mask;
  const Var w = g.param(dec.attention);
  for (Var a : encoded.annotations) {
    mem.keys.push_back(g.matmul(a, w));
    mem.values.push_back(a);
  }
  return mem;
}

StepResult decode_step(Graph& g, const DecoderParams& dec, const ModelDims& dims,
                       const DecoderState& state, std::span<const int> prev_tokens,
                       const AttentionMemory& memory, bool training, Rng* rng) {
  if (state.layers.size() != dec.layers.size()) {
    fail(ErrorKind::ShapeMismatch, "decode_step: state has the wrong number of layers");
  }
  if (memory.keys.empty()) fail(ErrorKind::ShapeMismatch, "decode_step: no annotations");
  const Eigen::Index h = dims.hidden;
  StepResult res;
  Var x = g.embedding(g.param(dec.embedding), prev_tokens);
  for (std::size_t l = 0; l < dec.layers.size(); ++l) {
    LstmState s = lstm_cell(g, dec.layers[l], x, state.layers[l]);
    res.state.layers.push_back(s);
    x = maybe_dropout(g, s.h, dims.dropout, training, rng);
  }
  Var attended = g.attention(x, memory.keys, memory.values, memory.score_mask);
  const Eigen::Index steps = static_cast<Eigen::Index>(memory.keys.size());
  Var context = g.slice_cols(attended, 0, 2 * h);
  res.attention = g.slice_cols(attended, 2 * h, steps);
  const Var parts[] = {context, x};
  Var combined = g.tanh(g.affine(g.concat_cols(parts), g.param(dec.combine_w),
                                 g.param(dec.combine_b)));
  combined = maybe_dropout(g, combined, dims.dropout, training, rng);
  res.logits = g.affine(combined, g.param(dec.out_w), g.param(dec.out_b));
  return res;
}

Var teacher_forced_loss(Graph& g, const EncoderParams& enc, const DecoderParams& dec,
                        const ModelDims& dims, std::span<const TokenIds> src,
                        std::span<const TokenIds> tgt, bool training, Rng* rng) {
  if (src.size() != tgt.size() || src.empty()) {
    fail(ErrorKind::ShapeMismatch, "teacher_forced_loss: need equally many non-zero pairs");
  }
  for (const auto& t : tgt) {
    if (t.empty()) fail(ErrorKind::InvalidId, "teacher_forced_loss: empty target");
    for (int id : t) {
      if (id < 0 || static_cast<std::size_t>(id) >= dec.vocab_size()) {
        fail(ErrorKind::InvalidId, "teacher_forced_loss: target id " + std::to_string(id));
      }
    }
  }
  const PaddedBatch sb = pad_batch(src);
  Encoded encoded = encode(g, enc, dims, sb, training, rng);
  const AttentionMemory mem = attention_memory(g, dec, encoded);

  std::size_t steps = 0, tokens = 0;
  for (const auto& t : tgt) {
    steps = std::max(steps, t.size() + 1);
    tokens += t.size() + 1;
  }
  const double inv = 1.0 / static_cast<double>(tokens);
  const std::size_t batch = tgt.size();
  const auto rows = static_cast<Eigen::Index>(batch);
  // Without input feeding each layer can run over the whole sequence before
  // the next one starts, so input and output projections batch over time.
  std::vector<int> prev(steps * batch), gold(steps * batch);
  std::vector<double> weight(steps * batch);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t r = 0; r < batch; ++r) {
      const auto& y = tgt[r];
      const std::size_t k = t * batch + r;
      prev[k] = t == 0 ? Vocabulary::kBos : (t - 1 < y.size() ? y[t - 1] : Vocabulary::kPad);
      gold[k] = t < y.size() ? y[t] : (t == y.size() ? Vocabulary::kEos : Vocabulary::kPad);
      weight[k] = t <= y.size() ? inv : 0.0;
    }
  }
  Var layer_in = g.embedding(g.param(dec.embedding), prev);
  std::vector<Var> tops(steps);
  for (std::size_t l = 0; l < dec.layers.size(); ++l) {
    const Var proj = g.matmul(layer_in, g.param(dec.layers[l].wx));
    LstmState s = encoded.initial.layers[l];
    std::vector<Var> outs(steps);
    for (std::size_t t = 0; t < steps; ++t) {
      s = lstm_cell_projected(g, dec.layers[l], g.slice_rows(proj, static_cast<Eigen::Index>(t) * rows, rows), s);
      outs[t] = s.h;
    }
    layer_in = maybe_dropout(g, g.concat_rows(outs), dims.dropout, training, rng);
  }
  const Eigen::Index h = dims.hidden;
  std::vector<Var> contexts(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const Var query = g.slice_rows(layer_in, static_cast<Eigen::Index>(t) * rows, rows);
    contexts[t] = g.slice_cols(g.attention(query, mem.keys, mem.values, mem.score_mask), 0, 2 * h);
  }
  const Var parts[] = {g.concat_rows(contexts), layer_in};
  Var combined = g.tanh(g.affine(g.concat_cols(parts), g.param(dec.combine_w),
                                 g.param(dec.combine_b)));
  combined = maybe_dropout(g, combined, dims.dropout, training, rng);
  const Var logits = g.affine(combined, g.param(dec.out_w), g.param(dec.out_b));
  return g.softmax_cross_entropy(logits, gold, weight);
}

double teacher_forced_loss(const AgentModel& agent, const TokenIds& src, const TokenIds& tgt) {
  Graph g(false);
  const TokenIds s[] = {src};
  const TokenIds t[] = {tgt};
  return g.scalar(teacher_forced_loss(g, agent.encoder, agent.decoder, agent.dims, s, t, false,
                                      nullptr));
}

std::size_t argmax_lowest(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::vector<TokenIds> greedy_decode(const EncoderParams& enc, const DecoderParams& dec,
                                    const ModelDims& dims, std::span<const TokenIds> src,
                                    std::size_t max_len) {
  std::vector<TokenIds> out(src.size());
  if (src.empty() || max_len == 0) return out;
  Graph g(false);
  const PaddedBatch sb = pad_batch(src);
  Encoded encoded = encode(g, enc, dims, sb, false, nullptr);
  const AttentionMemory mem = attention_memory(g, dec, encoded);
  DecoderState state = encoded.initial;
  std::vector<int> prev(src.size(), Vocabulary::kBos);
  std::vector<bool> done(src.size(), false);
  std::size_t remaining = src.size();
  for (std::size_t t = 0; t < max_len && remaining > 0; ++t) {
    StepResult step = decode_step(g, dec, dims, state, prev, mem, false, nullptr);
    const Mat& logits = g.value(step.logits);
    for (std::size_t r = 0; r < src.size(); ++r) {
      const auto row = static_cast<Eigen::Index>(r);
      const auto best = static_cast<int>(argmax_lowest(
          std::span<const double>(logits.row(row).data(), static_cast<std::size_t>(logits.cols()))));
      prev[r] = best;
      if (done[r]) continue;
      if (best == Vocabulary::kEos) {
        done[r] = true;
        --remaining;
      } else {
        out[r].push_back(best);
      }
    }
    state = std::move(step.state);
  }
  return out;
}

TokenIds greedy_decode(const AgentModel& agent, const TokenIds& src, std::size_t max_len) {
  const TokenIds s[] = {src};
  return greedy_decode(agent.encoder, agent.decoder, agent.dims, s, max_len)[0];
}

std::vector<TokenIds> greedy_decode(const AgentModel& agent, std::span<const TokenIds> src,
                                    std::size_t max_len) {
  return greedy_decode(agent.encoder, agent.decoder, agent.dims, src, max_len);
}

// ---------------------------------------------------------------------------

BatchCursor::BatchCursor(std::size_t size, std::size_t batch_size, Rng rng)
    : size_(size), batch_size_(std::max<std::size_t>(1, batch_size)), rng_(rng) {}

BatchCursor::BatchCursor(std::vector<std::size_t> lengths, std::size_t batch_size, Rng rng)
    : size_(lengths.size()),
      batch_size_(std::max<std::size_t>(1, batch_size)),
      rng_(rng),
      lengths_(std::move(lengths)) {}

void BatchCursor::start_pass() {
  std::vector<std::size_t> order(size_);
  for (std::size_t i = 0; i < size_; ++i) order[i] = i;
  shuffle_range(order.begin(), order.end(), rng_);
  batches_.clear();
  pos_ = 0;
  if (lengths_.empty()) {
    for (std::size_t i = 0; i < size_; i += batch_size_) {
      const auto end = std::min(size_, i + batch_size_);
      batches_.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                            order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return;
  }
  const std::size_t window = batch_size_ * kBucketBatches;
  for (std::size_t w = 0; w < size_; w += window) {
    const auto first = order.begin() + static_cast<std::ptrdiff_t>(w);
    const auto last = order.begin() + static_cast<std::ptrdiff_t>(std::min(size_, w + window));
    std::stable_sort(first, last, [&](std::size_t x, std::size_t y) { return lengths_[x] < lengths_[y]; });
    for (auto it = first; it < last; it += static_cast<std::ptrdiff_t>(std::min<std::size_t>(batch_size_, static_cast<std::size_t>(last - it)))) {
      const auto end = it + static_cast<std::ptrdiff_t>(std::min<std::size_t>(batch_size_, static_cast<std::size_t>(last - it)));
      batches_.emplace_back(it, end);
    }
  }
  shuffle_range(batches_.begin(), batches_.end(), rng_);
}

std::vector<std::size_t> BatchCursor::next() {
  if (size_ == 0) return {};
  if (pos_ >= batches_.size()) start_pass();
  return batches_[pos_++];
}

std::size_t BatchCursor::batches_per_pass() const {
  return (size_ + batch_size_ - 1) / batch_size_;
}

std::vector<std::size_t> sequence_lengths(std::span<const TokenIds> seqs) {
  std::vector<std::size_t> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) out.push_back(s.size());
  return out;
}

double evaluate_bleu(const EncoderParams& enc, const DecoderParams& dec, const ModelDims& dims,
                     const Vocabulary& target_vocab, const DevSet& dev,
                     const TrainSchedule& schedule) {
  if (dev.src.empty()) return 0.0;
  std::vector<Sentence> hyps;
  hyps.reserve(dev.src.size());
  const std::size_t eb = std::max<std::size_t>(1, schedule.eval_batch);
  for (std::size_t i = 0; i < dev.src.size(); i += eb) {
    const std::size_t n = std::min(eb, dev.src.size() - i);
    for (auto& ids : greedy_decode(enc, dec, dims, std::span(dev.src).subspan(i, n), schedule.max_len)) {
      hyps.push_back(denumericalize(ids, target_vocab));
    }
  }
  return bleu(hyps, dev.refs);
}

double objective_scale(const TrainSchedule& schedule, std::span<const TokenIds> targets) {
  if (!schedule.per_sentence_loss || targets.empty()) return 1.0;
  std::size_t tokens = 0;
  for (const auto& t : targets) tokens += t.size() + 1;
  return static_cast<double>(tokens) / static_cast<double>(targets.size());
}

TrainResult train_atts2s(AgentModel agent, const ParallelData& train, const DevSet& dev,
                         const TrainSchedule& schedule, std::uint64_t seed) {
  if (train.src.empty() || train.src.size() != train.tgt.size()) {
    fail(ErrorKind::EmptyTrainingSet, "train_atts2s: no labeled pairs");
  }
  TrainResult result;
  result.best = agent;
  BatchCursor cursor(sequence_lengths(train.src), schedule.batch_size, make_rng(seed, "batches"));
  Rng dropout_rng = make_rng(seed, "dropout");
  const std::vector<Parameter*> params = agent.parameters();
  zero_grads(params);
  double best_bleu = -1.0;
  int since_best = 0;
  for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
    double loss_sum = 0.0;
    const std::size_t nb = cursor.batches_per_pass();
    for (std::size_t b = 0; b < nb; ++b) {
      const auto idx = cursor.next();
      std::vector<TokenIds> src, tgt;
      for (auto i : idx) {
        src.push_back(train.src[i]);
        tgt.push_back(train.tgt[i]);
      }
      Graph g;
      Var loss = teacher_forced_loss(g, agent.encoder, agent.decoder, agent.dims, src, tgt, true,
                                     &dropout_rng);
      loss_sum += g.scalar(loss);
      g.backward(g.scale(loss, objective_scale(schedule, tgt)));
      g.accumulate(params);
      sgd_step(params, schedule.sgd);
      zero_grads(params);
    }
    result.train_loss.push_back(loss_sum / static_cast<double>(nb));
    const double score = evaluate_bleu(agent.encoder, agent.decoder, agent.dims,
                                       agent.target_vocab, dev, schedule);
    result.dev_bleu.push_back(score);
    if (score > best_bleu) {
      best_bleu = score;
      result.best = agent;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (schedule.patience > 0 && ++since_best >= schedule.patience) {
      break;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------

std::string serialize_vocab(const std::string& key, const Vocabulary& vocab) {
  std::string out = key + " " + std::to_string(vocab.size()) + "\n";
  for (const auto& t : vocab.tokens()) out += t + "\n";
  return out;
}

std::string serialize_agent(const AgentModel& agent) {
  std::string out = "mast-agent 1\n";
  out += "source " + std::to_string(agent.source.index) + " " + agent.source.name + "\n";
  out += "target " + std::to_string(agent.target.index) + " " + agent.target.name + "\n";
  out += "dims " + std::to_string(agent.dims.embed) + " " + std::to_string(agent.dims.hidden) +
         " " + std::to_string(agent.dims.layers) + " " + detail::hex_double(agent.dims.dropout) +
         "\n";
  out += serialize_vocab("source_vocab", agent.source_vocab);
  out += serialize_vocab("target_vocab", agent.target_vocab);
  out += "params\n";
  out += serialize_params(agent.parameters());
  return out;
}

AgentModel parse_agent(std::string_view text) {
  detail::LineReader in(text);
  const auto header = in.keyed("mast-agent");
  if (header.size() != 1 || header[0] != "1") fail(ErrorKind::ParseError, "agent: bad header");
  const auto src = in.keyed("source");
  const auto tgt = in.keyed("target");
  const auto dims_v = in.keyed("dims");
  if (src.size() != 2 || tgt.size() != 2 || dims_v.size() != 4) {
    fail(ErrorKind::ParseError, "agent: bad metadata");
  }
  ModelDims dims{std::stoi(dims_v[0]), std::stoi(dims_v[1]), std::stoi(dims_v[2]),
                 detail::parse_double(dims_v[3])};
  Vocabulary sv = in.vocab("source_vocab");
  Vocabulary tv = in.vocab("target_vocab");
  in.keyed("params");
  AgentModel agent;
  agent.source = {std::stoi(src[0]), src[1]};
  agent.target = {std::stoi(tgt[0]), tgt[1]};
  agent.dims = dims;
  agent.encoder = EncoderParams(sv.size(), dims);
  agent.decoder = DecoderParams(tv.size(), dims);
  agent.source_vocab = std::move(sv);
  agent.target_vocab = std::move(tv);
  load_params(in.rest(), agent.parameters());
  return agent;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::FileNotFound, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::FileNotFound, "cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

void save_agent(const AgentModel& agent, const std::filesystem::path& path) {
  write_file(path, serialize_agent(agent));
}

AgentModel load_agent(const std::filesystem::path& path) { return parse_agent(read_file(path)); }

}  // namespace mast
