#include "mast/sos.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mast/seq2seq.hpp"
#include "text_io.hpp"

namespace mast {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

StyleClassifier::StyleClassifier(Vocabulary v, const ClassifierConfig& cfg)
    : vocab(std::move(v)),
      config(cfg),
      embedding("classifier.embedding", static_cast<Eigen::Index>(vocab.size()), cfg.embed),
      lstm("classifier.lstm", cfg.embed, cfg.hidden),
      attention("classifier.attention", 1, cfg.hidden),
      out_w("classifier.out.w", cfg.hidden, 2),
      out_b("classifier.out.b", 1, 2) {}

std::vector<Parameter*> StyleClassifier::parameters() {
  std::vector<Parameter*> out{&embedding};
  lstm.for_each([&](Parameter& p) { out.push_back(&p); });
  out.insert(out.end(), {&attention, &out_w, &out_b});
  return out;
}

std::vector<const Parameter*> StyleClassifier::parameters() const {
  std::vector<const Parameter*> out;
  for (Parameter* p : const_cast<StyleClassifier*>(this)->parameters()) out.push_back(p);
  return out;
}

namespace {

Var classifier_logits(Graph& g, const StyleClassifier& c, std::span<const TokenIds> batch,
                      bool training, Rng* rng) {
  const PaddedBatch pb = pad_batch(batch);
  if (pb.steps() == 0) fail(ErrorKind::InvalidId, "classifier: empty batch");
  const auto rows = static_cast<Eigen::Index>(pb.batch);
  const Eigen::Index h = c.config.hidden;
  Mat score_mask = Mat::Zero(rows, static_cast<Eigen::Index>(pb.steps()));
  const Var table = g.param(c.embedding);
  const Var zeros = g.constant(Mat::Zero(rows, h));
  LstmState s{zeros, zeros};
  std::vector<Var> outputs;
  for (std::size_t t = 0; t < pb.steps(); ++t) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      if (pb.masks[t](r, 0) == 0.0) score_mask(r, static_cast<Eigen::Index>(t)) = kNegInf;
    }
    Var x = g.embedding(table, pb.ids[t]);
    LstmState fresh = lstm_cell(g, c.lstm, x, s);
    s = {g.blend(fresh.h, s.h, pb.masks[t]), g.blend(fresh.c, s.c, pb.masks[t])};
    Var out = s.h;
    if (training && rng && c.config.dropout > 0.0) out = g.dropout(out, c.config.dropout, true, *rng);
    outputs.push_back(out);
  }
  const Var query = g.matmul(g.constant(Mat::Ones(rows, 1)), g.param(c.attention));
  const Var pooled = g.slice_cols(g.attention(query, outputs, outputs, score_mask), 0, h);
  return g.affine(pooled, g.param(c.out_w), g.param(c.out_b));
}

std::vector<TokenIds> to_ids(std::span<const Sentence> sentences, const Vocabulary& vocab) {
  std::vector<TokenIds> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) {
    TokenIds ids = numericalize(s, vocab);
    if (ids.empty()) ids.push_back(Vocabulary::kUnk);
    out.push_back(std::move(ids));
  }
  return out;
}

}  // namespace

Var classifier_forward(Graph& g, const StyleClassifier& c, std::span<const TokenIds> batch,
                       bool training, Rng* rng) {
  return g.softmax(classifier_logits(g, c, batch, training, rng));
}

Mat classifier_probs(const StyleClassifier& c, std::span<const Sentence> sentences) {
  const auto ids = to_ids(sentences, c.vocab);
  Mat out(static_cast<Eigen::Index>(ids.size()), 2);
  constexpr std::size_t kChunk = 128;
  for (std::size_t i = 0; i < ids.size(); i += kChunk) {
    const std::size_t n = std::min(kChunk, ids.size() - i);
    Graph g(false);
    const Mat& p = g.value(classifier_forward(g, c, std::span(ids).subspan(i, n), false, nullptr));
    out.middleRows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(n)) = p;
  }
  return out;
}

std::vector<int> classify(const StyleClassifier& c, std::span<const Sentence> sentences) {
  const Mat p = classifier_probs(c, sentences);
  std::vector<int> out(sentences.size());
  for (Eigen::Index r = 0; r < p.rows(); ++r) out[static_cast<std::size_t>(r)] = p(r, 1) > p(r, 0);
  return out;
}

StyleClassifier train_pair_classifier(std::span<const Sentence> style_a,
                                      std::span<const Sentence> style_b,
                                      const ClassifierConfig& config, std::uint64_t seed) {
  if (style_a.empty() || style_b.empty()) {
    fail(ErrorKind::EmptyClass, "train_pair_classifier: each style needs a sentence");
  }
  if (config.embed <= 0 || config.hidden <= 0) {
    fail(ErrorKind::InvalidConfig, "classifier dimensions must be positive");
  }
  Rng rng = make_rng(seed, "classifier/balance");
  const std::size_t n = std::min(style_a.size(), style_b.size());
  auto pick = [&](std::span<const Sentence> side) {
    std::vector<std::size_t> idx(side.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (side.size() > n) {
      shuffle_range(idx.begin(), idx.end(), rng);
      idx.resize(n);
      std::sort(idx.begin(), idx.end());
    }
    std::vector<Sentence> out;
    for (auto i : idx) out.push_back(side[i]);
    return out;
  };
  std::vector<Sentence> sentences = pick(style_a);
  const std::vector<Sentence> b = pick(style_b);
  sentences.insert(sentences.end(), b.begin(), b.end());
  std::vector<int> labels(2 * n, 0);
  std::fill(labels.begin() + static_cast<std::ptrdiff_t>(n), labels.end(), 1);

  StyleClassifier c(Vocabulary::build(sentences, 8000), config);
  Rng init = make_rng(seed, "classifier/init");
  init_uniform(c.embedding, init);
  init_lstm(c.lstm, init);
  init_uniform(c.attention, init);
  init_uniform(c.out_w, init);
  c.out_b.value.setZero();

  const auto ids = to_ids(sentences, c.vocab);
  BatchCursor cursor(ids.size(), config.batch_size, make_rng(seed, "classifier/batches"));
  Rng dropout_rng = make_rng(seed, "classifier/dropout");
  const auto params = c.parameters();
  zero_grads(params);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t b = 0; b < cursor.batches_per_pass(); ++b) {
      std::vector<TokenIds> batch;
      std::vector<int> gold;
      for (auto i : cursor.next()) {
        batch.push_back(ids[i]);
        gold.push_back(labels[i]);
      }
      const std::vector<double> w(batch.size(), 1.0 / static_cast<double>(batch.size()));
      Graph g;
      Var loss = g.softmax_cross_entropy(classifier_logits(g, c, batch, true, &dropout_rng), gold, w);
      g.backward(loss);
      g.accumulate(params);
      sgd_step(params, config.sgd);
      zero_grads(params);
    }
  }
  return c;
}

double classifier_accuracy(const StyleClassifier& c, std::span<const Sentence> dev_a,
                           std::span<const Sentence> dev_b) {
  if (dev_a.empty() || dev_b.empty()) fail(ErrorKind::EmptyClass, "classifier_accuracy: empty class");
  auto recall = [&](std::span<const Sentence> side, int label) {
    const auto pred = classify(c, side);
    const auto hits = std::count(pred.begin(), pred.end(), label);
    return static_cast<double>(hits) / static_cast<double>(side.size());
  };
  return 0.5 * (recall(dev_a, 0) + recall(dev_b, 1));
}

AccReport build_acc_matrix(const std::vector<std::string>& names,
                           const std::vector<PairData>& data, const ClassifierConfig& config,
                           std::uint64_t seed) {
  const std::size_t n = names.size();
  if (n < 2) fail(ErrorKind::InvalidConfig, "build_acc_matrix: need at least two styles");
  if (data.size() != n) fail(ErrorKind::ShapeMismatch, "build_acc_matrix: one data entry per style");
  AccReport rep;
  rep.acc.names = names;
  rep.acc.values = Mat::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n), kNaN);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto pair_seed = derive_seed(seed, "pair/" + names[i] + "/" + names[j]);
      const StyleClassifier c = train_pair_classifier(data[i].train, data[j].train, config, pair_seed);
      const double acc = classifier_accuracy(c, data[i].dev, data[j].dev);
      rep.acc.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = acc;
      rep.acc.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = acc;
      ++rep.classifiers_trained;
    }
  }
  return rep;
}

Mat rescale_rows(const Mat& acc) {
  if (acc.rows() != acc.cols()) fail(ErrorKind::ShapeMismatch, "rescale_rows: matrix must be square");
  Mat out = Mat::Constant(acc.rows(), acc.cols(), kNaN);
  for (Eigen::Index i = 0; i < acc.rows(); ++i) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    int defined = 0;
    for (Eigen::Index j = 0; j < acc.cols(); ++j) {
      if (i == j || std::isnan(acc(i, j))) continue;
      lo = std::min(lo, acc(i, j));
      hi = std::max(hi, acc(i, j));
      ++defined;
    }
    if (defined < 2) {
      fail(ErrorKind::RowTooSmall, "rescale_rows: row " + std::to_string(i) + " has fewer than two entries");
    }
    for (Eigen::Index j = 0; j < acc.cols(); ++j) {
      if (i == j || std::isnan(acc(i, j))) continue;
      out(i, j) = hi > lo ? (acc(i, j) - lo) / (hi - lo) : 0.5;
    }
  }
  return out;
}

Mat similarity(const Mat& acc_rescaled) {
  Mat out = acc_rescaled;
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = 1.0 - out.data()[i];
  return out;
}

std::vector<double> perf_scores(std::span<const double> dev_bleu) {
  if (dev_bleu.size() < 2) fail(ErrorKind::InvalidConfig, "perf_scores: need at least two agents");
  const auto [lo, hi] = std::minmax_element(dev_bleu.begin(), dev_bleu.end());
  std::vector<double> out;
  for (double b : dev_bleu) out.push_back(*hi > *lo ? (b - *lo) / (*hi - *lo) : 0.5);
  return out;
}

Mat combine_scores(const Mat& simi, std::span<const double> perf, double alpha) {
  if (simi.rows() != simi.cols() || static_cast<std::size_t>(simi.cols()) != perf.size()) {
    fail(ErrorKind::ShapeMismatch, "combine_scores: SIMI must be n×n and PERF length n");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail(ErrorKind::InvalidConfig, "alpha must lie in [0, 1]");
  Mat sc = Mat::Constant(simi.rows(), simi.cols(), kNaN);
  for (Eigen::Index i = 0; i < simi.rows(); ++i) {
    for (Eigen::Index j = 0; j < simi.cols(); ++j) {
      if (i != j) sc(i, j) = alpha * simi(i, j) + (1.0 - alpha) * perf[static_cast<std::size_t>(j)];
    }
  }
  return sc;
}

std::string to_string(NeighborMode mode) { return mode == NeighborMode::TopK ? "topk" : "random"; }

NeighborMode parse_neighbor_mode(const std::string& s) {
  if (s == "topk") return NeighborMode::TopK;
  if (s == "random") return NeighborMode::Random;
  fail(ErrorKind::InvalidConfig, "neighbor mode must be topk or random, got '" + s + "'");
}

NeighborGraph select_neighbors(const Mat& sc, std::size_t k, NeighborMode mode,
                               std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(sc.rows());
  if (sc.rows() != sc.cols()) fail(ErrorKind::ShapeMismatch, "select_neighbors: SC must be square");
  if (n == 0 || k > n - 1) {
    fail(ErrorKind::KTooLarge, "select_neighbors: k=" + std::to_string(k) + " with " +
                                   std::to_string(n) + " styles");
  }
  NeighborGraph graph;
  graph.k = k;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) others.push_back(j);
    }
    if (mode == NeighborMode::TopK) {
      std::stable_sort(others.begin(), others.end(), [&](std::size_t a, std::size_t b) {
        return sc(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a)) >
               sc(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b));
      });
    } else {
      Rng rng = make_rng(seed, "neighbors/" + std::to_string(i));
      shuffle_range(others.begin(), others.end(), rng);
    }
    others.resize(k);
    graph.neighbors.push_back(std::move(others));
  }
  return graph;
}

SosScores score_styles(std::vector<std::string> names, const Mat& acc,
                       std::span<const double> dev_bleu, double alpha) {
  SosScores s;
  s.names = std::move(names);
  s.alpha = alpha;
  s.acc = acc;
  s.acc_rescaled = rescale_rows(acc);
  s.simi = similarity(s.acc_rescaled);
  s.perf = perf_scores(dev_bleu);
  s.sc = combine_scores(s.simi, s.perf, alpha);
  return s;
}

std::string matrix_csv(const std::vector<std::string>& names, const Mat& m) {
  std::string out = "style";
  for (const auto& n : names) out += "," + n;
  out += "\n";
  char buf[64];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out += names[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (std::isnan(m(i, j))) {
        out += ",";
      } else {
        std::snprintf(buf, sizeof buf, ",%.6f", m(i, j));
        out += buf;
      }
    }
    out += "\n";
  }
  return out;
}

namespace {

std::string matrix_block(const std::string& key, const Mat& m) {
  std::string out = key + "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ' ';
      out += detail::hex_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

Mat read_matrix(detail::LineReader& in, const std::string& key, std::size_t n) {
  in.keyed(key);
  Mat m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const Sentence row = tokenize(in.line());
    if (row.size() != n) fail(ErrorKind::ParseError, "sos: bad row in " + key);
    for (std::size_t j = 0; j < n; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = detail::parse_double(row[j]);
    }
  }
  return m;
}

}  // namespace

std::string serialize_sos(const SosScores& s, const NeighborGraph& graph) {
  std::string out = "mast-sos 1\nstyles " + std::to_string(s.names.size());
  for (const auto& n : s.names) out += " " + n;
  out += "\nalpha " + detail::hex_double(s.alpha) + "\n";
  out += matrix_block("acc", s.acc);
  out += matrix_block("acc_rescaled", s.acc_rescaled);
  out += matrix_block("simi", s.simi);
  out += "perf";
  for (double p : s.perf) out += " " + detail::hex_double(p);
  out += "\n" + matrix_block("sc", s.sc);
  out += "k " + std::to_string(graph.k) + "\n";
  for (std::size_t i = 0; i < graph.neighbors.size(); ++i) {
    out += "neighbors " + std::to_string(i);
    for (auto j : graph.neighbors[i]) out += " " + std::to_string(j);
    out += "\n";
  }
  return out;
}

std::pair<SosScores, NeighborGraph> parse_sos(std::string_view text) {
  detail::LineReader in(text);
  const auto header = in.keyed("mast-sos");
  if (header.size() != 1 || header[0] != "1") fail(ErrorKind::ParseError, "sos: bad header");
  auto styles = in.keyed("styles");
  if (styles.empty() || std::stoul(styles[0]) + 1 != styles.size()) {
    fail(ErrorKind::ParseError, "sos: bad style list");
  }
  SosScores s;
  s.names.assign(styles.begin() + 1, styles.end());
  const std::size_t n = s.names.size();
  const auto alpha = in.keyed("alpha");
  if (alpha.size() != 1) fail(ErrorKind::ParseError, "sos: bad alpha");
  s.alpha = detail::parse_double(alpha[0]);
  s.acc = read_matrix(in, "acc", n);
  s.acc_rescaled = read_matrix(in, "acc_rescaled", n);
  s.simi = read_matrix(in, "simi", n);
  const auto perf = in.keyed("perf");
  if (perf.size() != n) fail(ErrorKind::ParseError, "sos: bad perf");
  for (const auto& p : perf) s.perf.push_back(detail::parse_double(p));
  s.sc = read_matrix(in, "sc", n);
  NeighborGraph graph;
  const auto k = in.keyed("k");
  if (k.size() != 1) fail(ErrorKind::ParseError, "sos: bad k");
  graph.k = std::stoul(k[0]);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = in.keyed("neighbors");
    if (row.size() != graph.k + 1 || std::stoul(row[0]) != i) {
      fail(ErrorKind::ParseError, "sos: bad neighbor row");
    }
    std::vector<std::size_t> nb;
    for (std::size_t j = 1; j < row.size(); ++j) nb.push_back(std::stoul(row[j]));
    graph.neighbors.push_back(std::move(nb));
  }
  return {std::move(s), std::move(graph)};
}

std::string serialize_classifier(const StyleClassifier& c) {
  std::string out = "mast-classifier 1\n";
  out += "dims " + std::to_string(c.config.embed) + " " + std::to_string(c.config.hidden) + "\n";
  out += serialize_vocab("vocab", c.vocab);
  out += "params\n" + serialize_params(c.parameters());
  return out;
}

StyleClassifier parse_classifier(std::string_view text) {
  detail::LineReader in(text);
  const auto header = in.keyed("mast-classifier");
  if (header.size() != 1 || header[0] != "1") fail(ErrorKind::ParseError, "classifier: bad header");
  const auto dims = in.keyed("dims");
  if (dims.size() != 2) fail(ErrorKind::ParseError, "classifier: bad dims");
  ClassifierConfig cfg;
  cfg.embed = std::stoi(dims[0]);
  cfg.hidden = std::stoi(dims[1]);
  StyleClassifier c(in.vocab("vocab"), cfg);
  in.keyed("params");
  load_params(in.rest(), c.parameters());
  return c;
}

}  // namespace mast
