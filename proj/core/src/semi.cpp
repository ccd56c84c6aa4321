#include "mast/semi.hpp"

#include <cmath>

#include "text_io.hpp"

namespace mast {

std::string to_string(RouteKind route) {
  switch (route) {
    case RouteKind::Supervised: return "supervised";
    case RouteKind::BackTranslation: return "backtranslation";
    case RouteKind::Dae: return "dae";
  }
  return "unknown";
}

void validate_route_probs(const RouteProbs& probs) {
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) fail(ErrorKind::InvalidConfig, "route probabilities must be >= 0");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) fail(ErrorKind::InvalidConfig, "route probabilities must sum to 1");
}

RouteKind sample_route(const RouteProbs& probs, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t r = 0; r < probs.size(); ++r) {
    acc += probs[r];
    if (u < acc) return static_cast<RouteKind>(r);
  }
  // Rounding can leave u just above the accumulated mass.
  for (std::size_t r = probs.size(); r-- > 0;) {
    if (probs[r] > 0.0) return static_cast<RouteKind>(r);
  }
  return RouteKind::Supervised;
}

namespace {

template <class Net>
void collect(Net& net, std::vector<Parameter*>& out) {
  net.for_each([&](Parameter& p) { out.push_back(&p); });
}

template <class Net>
void collect(const Net& net, std::vector<const Parameter*>& out) {
  net.for_each([&](const Parameter& p) { out.push_back(&p); });
}

}  // namespace

std::vector<Parameter*> SemiModel::parameters() {
  std::vector<Parameter*> out;
  collect(enc_i, out);
  collect(dec_j, out);
  collect(enc_j, out);
  collect(dec_i, out);
  if (!share_enc_j) collect(enc_j_prime, out);
  return out;
}

std::vector<const Parameter*> SemiModel::parameters() const {
  std::vector<const Parameter*> out;
  collect(enc_i, out);
  collect(dec_j, out);
  collect(enc_j, out);
  collect(dec_i, out);
  if (!share_enc_j) collect(enc_j_prime, out);
  return out;
}

SemiModel make_semi(StyleId source, StyleId target, Vocabulary source_vocab,
                    Vocabulary target_vocab, const ModelDims& dims, std::uint64_t seed,
                    RouteProbs route_probs, bool share_enc_j) {
  validate_route_probs(route_probs);
  if (dims.embed <= 0 || dims.hidden <= 0 || dims.layers <= 0) {
    fail(ErrorKind::InvalidConfig, "model dimensions must be positive");
  }
  SemiModel m;
  m.source = std::move(source);
  m.target = std::move(target);
  m.dims = dims;
  m.route_probs = route_probs;
  m.share_enc_j = share_enc_j;
  m.enc_i = EncoderParams(source_vocab.size(), dims);
  m.dec_j = DecoderParams(target_vocab.size(), dims);
  m.enc_j = EncoderParams(target_vocab.size(), dims);
  m.dec_i = DecoderParams(source_vocab.size(), dims);
  init_encoder(m.enc_i, seed);
  init_decoder(m.dec_j, seed);
  init_encoder(m.enc_j, derive_seed(seed, "semi/enc_j"));
  init_decoder(m.dec_i, derive_seed(seed, "semi/dec_i"));
  if (!share_enc_j) {
    m.enc_j_prime = EncoderParams(target_vocab.size(), dims);
    init_encoder(m.enc_j_prime, derive_seed(seed, "semi/enc_j_prime"));
  }
  m.source_vocab = std::move(source_vocab);
  m.target_vocab = std::move(target_vocab);
  return m;
}

Var route_supervised(Graph& g, const SemiModel& semi, std::span<const TokenIds> src,
                     std::span<const TokenIds> tgt, bool training, Rng* rng) {
  return teacher_forced_loss(g, semi.enc_i, semi.dec_j, semi.dims, src, tgt, training, rng);
}

Var route_backtranslation(Graph& g, const SemiModel& semi, std::span<const TokenIds> src,
                          std::size_t max_len, bool training, Rng* rng) {
  if (src.empty()) fail(ErrorKind::EmptyTrainingSet, "route_backtranslation: empty batch");
  std::vector<TokenIds> synthetic = greedy_decode(semi.enc_i, semi.dec_j, semi.dims, src, max_len);
  for (auto& s : synthetic) {
    if (s.empty()) s.push_back(Vocabulary::kUnk);
  }
  return teacher_forced_loss(g, semi.back_encoder(), semi.dec_i, semi.dims, synthetic, src,
                             training, rng);
}

Var route_dae(Graph& g, const SemiModel& semi, std::span<const TokenIds> tgt,
              const NoiseConfig& noise, Rng& noise_rng, bool training, Rng* rng) {
  if (tgt.empty()) fail(ErrorKind::EmptyTrainingSet, "route_dae: empty batch");
  std::vector<TokenIds> noised;
  noised.reserve(tgt.size());
  for (const auto& s : tgt) noised.push_back(apply_noise(std::span<const int>(s), noise, noise_rng));
  return teacher_forced_loss(g, semi.enc_j, semi.dec_j, semi.dims, noised, tgt, training, rng);
}

AgentModel extract_agent(const SemiModel& semi) {
  AgentModel a;
  a.source = semi.source;
  a.target = semi.target;
  a.source_vocab = semi.source_vocab;
  a.target_vocab = semi.target_vocab;
  a.dims = semi.dims;
  a.encoder = semi.enc_i;
  a.decoder = semi.dec_j;
  return a;
}

SemiResult train_semi(SemiModel semi, const SemiData& data, const DevSet& dev,
                      const TrainSchedule& schedule, const NoiseConfig& noise,
                      std::uint64_t seed) {
  validate_route_probs(semi.route_probs);
  validate(noise);
  const auto& probs = semi.route_probs;
  const ParallelData& lab = data.labeled;
  if (lab.src.empty() || lab.src.size() != lab.tgt.size()) {
    fail(ErrorKind::EmptyTrainingSet, "train_semi: no labeled pairs");
  }
  if ((probs[1] > 0.0 && data.unlabeled_source.empty()) ||
      (probs[2] > 0.0 && data.unlabeled_target.empty())) {
    fail(ErrorKind::EmptyTrainingSet, "train_semi: unlabeled pool required by an active route");
  }

  SemiResult result;
  result.best = extract_agent(semi);
  // Stream names match train_atts2s so the supervised-only setting replays it.
  BatchCursor cursor(sequence_lengths(lab.src), schedule.batch_size, make_rng(seed, "batches"));
  BatchCursor src_cursor(sequence_lengths(data.unlabeled_source), schedule.batch_size,
                         make_rng(seed, "semi/unlabeled_source"));
  BatchCursor tgt_cursor(sequence_lengths(data.unlabeled_target), schedule.batch_size,
                         make_rng(seed, "semi/unlabeled_target"));
  Rng dropout_rng = make_rng(seed, "dropout");
  Rng route_rng = make_rng(seed, "semi/routes");
  Rng noise_rng = make_rng(derive_seed(seed, "semi/noise"), std::to_string(noise.seed));

  const std::vector<Parameter*> params = semi.parameters();
  zero_grads(params);
  const std::size_t nb = cursor.batches_per_pass();
  const std::size_t steps =
      probs[0] > 0.0 ? static_cast<std::size_t>(std::ceil(static_cast<double>(nb) / probs[0] - 1e-9))
                     : nb;
  double best_bleu = -1.0;
  int since_best = 0;
  for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
      const RouteKind route = sample_route(probs, route_rng);
      ++result.route_counts[static_cast<std::size_t>(route)];
      Graph g;
      Var loss;
      double scale = 1.0;
      std::vector<TokenIds> a, b;
      switch (route) {
        case RouteKind::Supervised:
          for (auto i : cursor.next()) {
            a.push_back(lab.src[i]);
            b.push_back(lab.tgt[i]);
          }
          loss = route_supervised(g, semi, a, b, true, &dropout_rng);
          scale = objective_scale(schedule, b);
          break;
        case RouteKind::BackTranslation:
          for (auto i : src_cursor.next()) a.push_back(data.unlabeled_source[i]);
          loss = route_backtranslation(g, semi, a, schedule.max_len, true, &dropout_rng);
          scale = objective_scale(schedule, a);
          break;
        case RouteKind::Dae:
          for (auto i : tgt_cursor.next()) b.push_back(data.unlabeled_target[i]);
          loss = route_dae(g, semi, b, noise, noise_rng, true, &dropout_rng);
          scale = objective_scale(schedule, b);
          break;
      }
      loss_sum += g.scalar(loss);
      g.backward(g.scale(loss, scale));
      g.accumulate(params);
      sgd_step(params, schedule.sgd);
      zero_grads(params);
    }
    result.train_loss.push_back(steps ? loss_sum / static_cast<double>(steps) : 0.0);
    const double score =
        evaluate_bleu(semi.enc_i, semi.dec_j, semi.dims, semi.target_vocab, dev, schedule);
    result.dev_bleu.push_back(score);
    if (score > best_bleu) {
      best_bleu = score;
      result.best = extract_agent(semi);
      result.best_epoch = epoch;
      since_best = 0;
    } else if (schedule.patience > 0 && ++since_best >= schedule.patience) {
      break;
    }
  }
  result.final_model = std::move(semi);
  return result;
}

// ---------------------------------------------------------------------------

namespace {

template <class Net>
std::string params_block(const std::string& key, const Net& net) {
  std::vector<const Parameter*> ps;
  collect(net, ps);
  const std::string body = serialize_params(ps);
  return key + " " + std::to_string(body.size()) + "\n" + body;
}

template <class Net>
void load_block(detail::LineReader& in, const std::string& key, Net& net) {
  const auto v = in.keyed(key);
  if (v.size() != 1) fail(ErrorKind::ParseError, "semi: bad block header " + key);
  const std::size_t n = std::stoul(v[0]);
  const std::string_view body = in.take(n);
  std::vector<Parameter*> ps;
  collect(net, ps);
  load_params(body, ps);
}

}  // namespace

std::string serialize_semi(const SemiModel& semi) {
  std::string out = "mast-semi 1\n";
  out += "source " + std::to_string(semi.source.index) + " " + semi.source.name + "\n";
  out += "target " + std::to_string(semi.target.index) + " " + semi.target.name + "\n";
  out += "dims " + std::to_string(semi.dims.embed) + " " + std::to_string(semi.dims.hidden) + " " +
         std::to_string(semi.dims.layers) + " " + detail::hex_double(semi.dims.dropout) + "\n";
  out += "routes";
  for (double p : semi.route_probs) out += " " + detail::hex_double(p);
  out += "\nshare_enc_j " + std::string(semi.share_enc_j ? "1" : "0") + "\n";
  out += serialize_vocab("source_vocab", semi.source_vocab);
  out += serialize_vocab("target_vocab", semi.target_vocab);
  out += params_block("enc_i", semi.enc_i);
  out += params_block("dec_j", semi.dec_j);
  out += params_block("enc_j", semi.enc_j);
  out += params_block("dec_i", semi.dec_i);
  if (!semi.share_enc_j) out += params_block("enc_j_prime", semi.enc_j_prime);
  return out;
}

SemiModel parse_semi(std::string_view text) {
  detail::LineReader in(text);
  const auto header = in.keyed("mast-semi");
  if (header.size() != 1 || header[0] != "1") fail(ErrorKind::ParseError, "semi: bad header");
  const auto src = in.keyed("source");
  const auto tgt = in.keyed("target");
  const auto dims_v = in.keyed("dims");
  const auto routes = in.keyed("routes");
  const auto share = in.keyed("share_enc_j");
  if (src.size() != 2 || tgt.size() != 2 || dims_v.size() != 4 || routes.size() != 3 ||
      share.size() != 1) {
    fail(ErrorKind::ParseError, "semi: bad metadata");
  }
  SemiModel m;
  m.source = {std::stoi(src[0]), src[1]};
  m.target = {std::stoi(tgt[0]), tgt[1]};
  m.dims = {std::stoi(dims_v[0]), std::stoi(dims_v[1]), std::stoi(dims_v[2]),
            detail::parse_double(dims_v[3])};
  for (std::size_t r = 0; r < 3; ++r) m.route_probs[r] = detail::parse_double(routes[r]);
  m.share_enc_j = share[0] == "1";
  m.source_vocab = in.vocab("source_vocab");
  m.target_vocab = in.vocab("target_vocab");
  const std::size_t sv = m.source_vocab.size(), tv = m.target_vocab.size();
  m.enc_i = EncoderParams(sv, m.dims);
  m.dec_j = DecoderParams(tv, m.dims);
  m.enc_j = EncoderParams(tv, m.dims);
  m.dec_i = DecoderParams(sv, m.dims);
  load_block(in, "enc_i", m.enc_i);
  load_block(in, "dec_j", m.dec_j);
  load_block(in, "enc_j", m.enc_j);
  load_block(in, "dec_i", m.dec_i);
  if (!m.share_enc_j) {
    m.enc_j_prime = EncoderParams(tv, m.dims);
    load_block(in, "enc_j_prime", m.enc_j_prime);
  }
  return m;
}

void save_semi(const SemiModel& semi, const std::filesystem::path& path) {
  write_file(path, serialize_semi(semi));
}

SemiModel load_semi(const std::filesystem::path& path) { return parse_semi(read_file(path)); }

}  // namespace mast
