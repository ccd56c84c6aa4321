#include "mast/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "mast/digest.hpp"
#include "text_io.hpp"

namespace mast {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Data

std::vector<std::string> PreparedData::target_names() const {
  std::vector<std::string> out;
  for (std::size_t s = 1; s < corpus.num_styles(); ++s) out.push_back(corpus.styles[s].name);
  return out;
}

std::vector<Sentence> PreparedData::rows(std::size_t style, const std::vector<std::size_t>& idx) const {
  std::vector<Sentence> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(corpus.sentences[style][i]);
  return out;
}

ParallelData PreparedData::labeled(std::size_t style) const {
  ParallelData d;
  for (auto i : split.labeled_train) {
    d.src.push_back(numericalize(corpus.sentences[0][i], source_vocab));
    d.tgt.push_back(numericalize(corpus.sentences[style][i], target_vocabs[style - 1]));
  }
  return d;
}

DevSet PreparedData::dev(std::size_t style) const {
  DevSet d;
  for (auto i : split.dev) {
    d.src.push_back(numericalize(corpus.sentences[0][i], source_vocab));
    d.refs.push_back(corpus.sentences[style][i]);
  }
  return d;
}

DevSet PreparedData::test(std::size_t style) const {
  DevSet d;
  for (auto i : split.test) {
    d.src.push_back(numericalize(corpus.sentences[0][i], source_vocab));
    d.refs.push_back(corpus.sentences[style][i]);
  }
  return d;
}

SemiData PreparedData::semi_data(std::size_t style) const {
  SemiData d;
  d.labeled = labeled(style);
  for (auto i : split.unlabeled[0]) d.unlabeled_source.push_back(numericalize(corpus.sentences[0][i], source_vocab));
  for (auto i : split.unlabeled[style]) {
    d.unlabeled_target.push_back(numericalize(corpus.sentences[style][i], target_vocabs[style - 1]));
  }
  return d;
}

ParallelCorpus synthesize_corpus(const ExperimentConfig& cfg) {
  Rng rng = make_rng(cfg.seed, "synthetic");
  GrammarSpec grammar;
  grammar.num_sentences = cfg.synthetic.sentences;
  SeedLexicon lexicon;
  const auto seed_corpus = generate_seed_corpus(grammar, rng, &lexicon);
  const auto family = graded_style_family(lexicon, cfg.synthetic.rewrite_count, cfg.synthetic.styles, rng);
  return make_synthetic_styles(seed_corpus, family, cfg.synthetic.source_name);
}

namespace {

Vocabulary style_vocab(const ParallelCorpus& corpus, const DataSplit& split, std::size_t style,
                       std::size_t max_size) {
  std::vector<Sentence> text;
  for (auto i : split.labeled_train) text.push_back(corpus.sentences[style][i]);
  for (auto i : split.unlabeled[style]) text.push_back(corpus.sentences[style][i]);
  return Vocabulary::build(text, max_size);
}

PreparedData assemble(ParallelCorpus corpus, DataSplit split, std::size_t vocab_max) {
  if (corpus.num_styles() < 3) {
    fail(ErrorKind::InvalidConfig, "need a source style and at least two target styles");
  }
  PreparedData d;
  d.source_vocab = style_vocab(corpus, split, 0, vocab_max);
  for (std::size_t s = 1; s < corpus.num_styles(); ++s) {
    d.target_vocabs.push_back(style_vocab(corpus, split, s, vocab_max));
  }
  d.corpus = std::move(corpus);
  d.split = std::move(split);
  return d;
}

}  // namespace

PreparedData prepare_data(const ExperimentConfig& cfg) {
  validate(cfg);
  ParallelCorpus corpus = cfg.manifest ? ingest_aligned(read_manifest(*cfg.manifest)) : synthesize_corpus(cfg);
  DataSplit split = make_splits(corpus, cfg.split, cfg.seed);
  return assemble(std::move(corpus), std::move(split), cfg.vocab_max);
}

void run_jobs(std::size_t count, int jobs, const std::function<void(std::size_t)>& job) {
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::mutex mu;
  std::size_t next = 0;
  std::exception_ptr error;
  auto worker = [&] {
    while (true) {
      std::size_t i;
      {
        std::lock_guard lock(mu);
        if (next >= count || error) return;
        i = next++;
      }
      try {
        job(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Stages

namespace {

std::mutex log_mutex;

std::string curve_csv(const std::vector<double>& loss, const std::vector<double>& bleu_scores) {
  std::string out = "epoch,train_loss,dev_bleu\n";
  char buf[128];
  for (std::size_t e = 0; e < loss.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", e, loss[e], bleu_scores[e]);
    out += buf;
  }
  return out;
}

std::string sentences_text(std::span<const Sentence> sents) {
  std::string out;
  for (const auto& s : sents) out += join(s) + "\n";
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string system_dir(SystemId s) {
  switch (s) {
    case SystemId::AttS2S: return "atts2s";
    case SystemId::Semi: return "semi";
    case SystemId::MastRandom: return "mast-random";
    case SystemId::MastSos: return "mast-sos";
  }
  return "unknown";
}

std::vector<Sentence> decode_agent(const AgentModel& agent, const DevSet& set, const TrainSchedule& sch) {
  std::vector<Sentence> hyps;
  const std::size_t eb = std::max<std::size_t>(1, sch.eval_batch);
  for (std::size_t i = 0; i < set.src.size(); i += eb) {
    const std::size_t n = std::min(eb, set.src.size() - i);
    for (auto& ids : greedy_decode(agent, std::span(set.src).subspan(i, n), sch.max_len)) {
      hyps.push_back(denumericalize(ids, agent.target_vocab));
    }
  }
  return hyps;
}

std::vector<Sentence> decode_mat(const ControllerParams& c, const MatSystem& sys,
                                 std::span<const Sentence> src, const MatSchedule& sch) {
  std::vector<Sentence> hyps;
  MatDecodeOptions opts;
  opts.max_len = sch.max_len;
  const std::size_t eb = std::max<std::size_t>(1, sch.eval_batch);
  for (std::size_t i = 0; i < src.size(); i += eb) {
    const std::size_t n = std::min(eb, src.size() - i);
    for (auto& h : mat_decode(c, sys, src.subspan(i, n), opts)) hyps.push_back(std::move(h));
  }
  return hyps;
}

}  // namespace

std::string mode_dir(NeighborMode mode) { return mode == NeighborMode::TopK ? "sos" : "random"; }

Experiment::Experiment(ExperimentConfig cfg, fs::path run_dir, int jobs)
    : cfg_(std::move(cfg)), dir_(std::move(run_dir)), jobs_(std::max(1, jobs)) {
  validate(cfg_);
}

Experiment Experiment::open(const fs::path& run_dir, int jobs) {
  const fs::path cfg_path = run_dir / "config.json";
  if (!fs::exists(cfg_path)) {
    fail(ErrorKind::FileNotFound, "no config.json in " + run_dir.string() + " (run prepare first)");
  }
  return Experiment(load_config(cfg_path), run_dir, jobs);
}

void Experiment::log(const std::string& line) {
  std::lock_guard lock(log_mutex);
  fs::create_directories(dir_);
  std::ofstream(dir_ / "run.log", std::ios::app) << line << '\n';
}

fs::path Experiment::style_dir(const std::string& stage, const std::string& style) const {
  return dir_ / stage / style;
}

PreparedData& Experiment::data() {
  if (!data_) {
    const fs::path manifest = dir_ / "corpus" / "manifest.tsv";
    if (!fs::exists(manifest) || !fs::exists(dir_ / "split.txt")) {
      fail(ErrorKind::FileNotFound, "run directory " + dir_.string() + " is not prepared");
    }
    data_ = assemble(ingest_aligned(read_manifest(manifest)), parse_split(read_file(dir_ / "split.txt")),
                     cfg_.vocab_max);
  }
  return *data_;
}

void Experiment::prepare() {
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(dir_);
  fs::remove(dir_ / "FAILED");
  PreparedData d = prepare_data(cfg_);
  write_file(dir_ / "config.json", config_to_json(cfg_));
  write_corpus(d.corpus, dir_ / "corpus");
  write_file(dir_ / "split.txt", serialize_split(d.split));
  data_ = std::move(d);
  log("prepare " + std::to_string(seconds_since(t0)) + "s");
}

void Experiment::train_base() {
  PreparedData& d = data();
  const auto names = d.target_names();
  run_jobs(names.size(), jobs_, [&](std::size_t i) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t style = i + 1;
    const std::uint64_t seed = derive_seed(cfg_.seed, "agent/" + names[i]);
    AgentModel agent = make_agent(d.corpus.styles[0], d.corpus.styles[style], d.source_vocab,
                                  d.target_vocabs[i], cfg_.model, seed);
    TrainResult r = train_atts2s(std::move(agent), d.labeled(style), d.dev(style), cfg_.schedule,
                                 derive_seed(cfg_.seed, "train/" + names[i]));
    const fs::path out = style_dir("atts2s", names[i]);
    fs::create_directories(out);
    save_agent(r.best, out / "agent.ckpt");
    write_file(out / "curve.csv", curve_csv(r.train_loss, r.dev_bleu));
    log("atts2s " + names[i] + " best_epoch " + std::to_string(r.best_epoch) + " " +
        std::to_string(seconds_since(t0)) + "s");
  });
}

void Experiment::train_semi() {
  PreparedData& d = data();
  const auto names = d.target_names();
  TrainSchedule sch = cfg_.schedule;
  if (cfg_.semi_epochs > 0) sch.epochs = cfg_.semi_epochs;
  run_jobs(names.size(), jobs_, [&](std::size_t i) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t style = i + 1;
    // Same seeds as the AttS2S agent, so route_probs (1,0,0) replays it.
    const std::uint64_t seed = derive_seed(cfg_.seed, "agent/" + names[i]);
    SemiModel semi = make_semi(d.corpus.styles[0], d.corpus.styles[style], d.source_vocab,
                               d.target_vocabs[i], cfg_.model, seed, cfg_.route_probs, cfg_.share_enc_j);
    SemiResult r = mast::train_semi(std::move(semi), d.semi_data(style), d.dev(style), sch, cfg_.noise,
                              derive_seed(cfg_.seed, "train/" + names[i]));
    const fs::path out = style_dir("semi", names[i]);
    fs::create_directories(out);
    save_semi(r.final_model, out / "semi.ckpt");
    save_agent(r.best, out / "agent.ckpt");
    write_file(out / "curve.csv", curve_csv(r.train_loss, r.dev_bleu));
    log("semi " + names[i] + " best_epoch " + std::to_string(r.best_epoch) + " routes " +
        std::to_string(r.route_counts[0]) + "/" + std::to_string(r.route_counts[1]) + "/" +
        std::to_string(r.route_counts[2]) + " " + std::to_string(seconds_since(t0)) + "s");
  });
}

AgentModel Experiment::semi_agent(std::size_t style) {
  return load_agent(style_dir("semi", data().target_names()[style - 1]) / "agent.ckpt");
}

void Experiment::sos() {
  const auto t0 = std::chrono::steady_clock::now();
  PreparedData& d = data();
  const auto names = d.target_names();
  if (cfg_.k >= names.size()) {
    fail(ErrorKind::KTooLarge, "k=" + std::to_string(cfg_.k) + " needs more than " +
                                   std::to_string(names.size()) + " target styles");
  }
  std::vector<PairData> pairs;
  std::vector<double> perf_bleu;
  for (std::size_t s = 1; s <= names.size(); ++s) {
    pairs.push_back({d.rows(s, d.split.labeled_train), d.rows(s, d.split.dev)});
    const AgentModel agent = semi_agent(s);
    perf_bleu.push_back(evaluate_bleu(agent.encoder, agent.decoder, agent.dims, agent.target_vocab,
                                      d.dev(s), cfg_.schedule));
  }
  const AccReport acc = build_acc_matrix(names, pairs, cfg_.classifier, derive_seed(cfg_.seed, "sos"));
  const SosScores scores = score_styles(names, acc.acc.values, perf_bleu, cfg_.alpha);
  const fs::path out = dir_ / "sos";
  fs::create_directories(out);
  for (auto mode : {NeighborMode::TopK, NeighborMode::Random}) {
    const NeighborGraph graph = select_neighbors(scores.sc, cfg_.k, mode, derive_seed(cfg_.seed, "sos/random"));
    write_file(out / ("neighbors-" + mode_dir(mode) + ".txt"), serialize_sos(scores, graph));
  }
  write_file(out / "acc.csv", matrix_csv(names, scores.acc));
  write_file(out / "sc.csv", matrix_csv(names, scores.sc));
  log("sos classifiers " + std::to_string(acc.classifiers_trained) + " " +
      std::to_string(seconds_since(t0)) + "s");
}

NeighborGraph Experiment::neighbors(NeighborMode mode) {
  return parse_sos(read_file(dir_ / "sos" / ("neighbors-" + mode_dir(mode) + ".txt"))).second;
}

void Experiment::train_mat(std::optional<NeighborMode> mode) {
  PreparedData& d = data();
  const auto names = d.target_names();
  std::vector<AgentModel> agents;
  for (std::size_t s = 1; s <= names.size(); ++s) agents.push_back(semi_agent(s));
  std::vector<NeighborMode> modes;
  if (!mode || *mode == NeighborMode::TopK) modes.push_back(NeighborMode::TopK);
  if (!mode || *mode == NeighborMode::Random) modes.push_back(NeighborMode::Random);
  const NeighborGraph sos_graph = neighbors(NeighborMode::TopK);

  for (NeighborMode m : modes) {
    const NeighborGraph graph = neighbors(m);
    run_jobs(names.size(), jobs_, [&](std::size_t i) {
      const auto t0 = std::chrono::steady_clock::now();
      const fs::path out = dir_ / "mat" / mode_dir(m) / names[i];
      fs::create_directories(out);
      if (m == NeighborMode::Random && graph.neighbors[i] == sos_graph.neighbors[i]) {
        const fs::path src = dir_ / "mat" / mode_dir(NeighborMode::TopK) / names[i];
        if (fs::exists(src / "controller.ckpt")) {
          fs::copy_file(src / "controller.ckpt", out / "controller.ckpt", fs::copy_options::overwrite_existing);
          fs::copy_file(src / "curve.csv", out / "curve.csv", fs::copy_options::overwrite_existing);
          log("mat " + mode_dir(m) + " " + names[i] + " reused sos controller");
          return;
        }
      }
      std::vector<const AgentModel*> members{&agents[i]};
      for (auto n : graph.neighbors[i]) members.push_back(&agents[n]);
      const MatSystem sys = make_system(members);
      // Seeded by style only: equal neighbor lists give equal controllers.
      ControllerParams c(d.source_vocab.size(), agents[i].target_vocab.size(), cfg_.k, cfg_.controller);
      init_controller(c, derive_seed(cfg_.seed, "mat/" + names[i]));
      const std::size_t style = i + 1;
      MatPairs train{d.rows(0, d.split.labeled_train), d.rows(style, d.split.labeled_train)};
      MatPairs dev{d.rows(0, d.split.dev), d.rows(style, d.split.dev)};
      MatResult r = mast::mat_train(std::move(c), sys, train, dev, cfg_.mat, derive_seed(cfg_.seed, "mat/train/" + names[i]));
      write_file(out / "controller.ckpt", serialize_controller(r.best, sys));
      write_file(out / "curve.csv", curve_csv(r.train_loss, r.dev_bleu));
      log("mat " + mode_dir(m) + " " + names[i] + " best_epoch " + std::to_string(r.best_epoch) + " " +
          std::to_string(seconds_since(t0)) + "s");
    });
  }
}

MetricsReport Experiment::evaluate() {
  const auto t0 = std::chrono::steady_clock::now();
  PreparedData& d = data();
  const auto names = d.target_names();
  std::vector<AgentModel> agents;
  for (std::size_t s = 1; s <= names.size(); ++s) agents.push_back(semi_agent(s));
  MetricsReport report;
  report.k = cfg_.k;
  report.seeds = {cfg_.seed};
  report.styles = names;
  report.bleu.assign(names.size(), SystemScores{});
  report.unk_references.assign(names.size(), 0);
  const BleuOptions bopts{4, cfg_.bleu_smoothing};

  run_jobs(names.size(), jobs_, [&](std::size_t i) {
    const std::size_t style = i + 1;
    const DevSet test = d.test(style);
    const std::vector<Sentence> src = d.rows(0, d.split.test);
    auto record = [&](SystemId s, const std::vector<Sentence>& hyps) {
      const fs::path out = dir_ / "hyp" / system_dir(s);
      fs::create_directories(out);
      write_file(out / (names[i] + ".txt"), sentences_text(hyps));
      report.bleu[i][static_cast<std::size_t>(s)] = bleu(hyps, test.refs, bopts);
    };
    record(SystemId::AttS2S, decode_agent(load_agent(style_dir("atts2s", names[i]) / "agent.ckpt"), test, cfg_.schedule));
    record(SystemId::Semi, decode_agent(agents[i], test, cfg_.schedule));
    for (NeighborMode m : {NeighborMode::Random, NeighborMode::TopK}) {
      const ControllerCheckpoint ckpt =
          parse_controller(read_file(dir_ / "mat" / mode_dir(m) / names[i] / "controller.ckpt"));
      std::vector<const AgentModel*> members;
      for (const AgentRef& ref : ckpt.agents) {
        const auto it = std::find(names.begin(), names.end(), ref.target);
        if (it == names.end()) fail(ErrorKind::VocabMismatch, "controller refers to unknown style " + ref.target);
        members.push_back(&agents[static_cast<std::size_t>(it - names.begin())]);
      }
      const MatSystem sys = make_system(members);
      verify_agents(ckpt, sys);
      const SystemId id = m == NeighborMode::TopK ? SystemId::MastSos : SystemId::MastRandom;
      record(id, decode_mat(ckpt.controller, sys, src, cfg_.mat));
      if (m == NeighborMode::TopK) {
        std::size_t unk = 0;
        for (const auto& ref : test.refs) {
          for (const auto& tok : ref) unk += sys.global.tokens.contains(tok) ? 0 : 1;
        }
        report.unk_references[i] = unk;
      }
    }
  });
  finalize(report);
  write_report(report, dir_);
  log("evaluate " + std::to_string(seconds_since(t0)) + "s");
  return report;
}

MetricsReport Experiment::run() {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    prepare();
    train_base();
    train_semi();
    sos();
    train_mat();
    MetricsReport r = evaluate();
    r.wall_clock_seconds = seconds_since(t0);
    log("total " + std::to_string(r.wall_clock_seconds) + "s");
    return r;
  } catch (const std::exception& e) {
    std::string kind = "Internal";
    if (const auto* err = dynamic_cast<const Error*>(&e)) kind = std::string(to_string(err->kind()));
    fs::create_directories(dir_);
    write_file(dir_ / "FAILED", kind + ": " + e.what() + "\n");
    throw;
  }
}

std::vector<Sentence> Experiment::translate(SystemId system, const std::string& style,
                                            std::span<const Sentence> src) {
  PreparedData& d = data();
  const auto names = d.target_names();
  const auto it = std::find(names.begin(), names.end(), style);
  if (it == names.end()) fail(ErrorKind::InvalidConfig, "unknown target style '" + style + "'");
  const std::size_t idx = static_cast<std::size_t>(it - names.begin());
  if (system == SystemId::AttS2S || system == SystemId::Semi) {
    const AgentModel agent = system == SystemId::Semi ? semi_agent(idx + 1)
                                                      : load_agent(style_dir("atts2s", style) / "agent.ckpt");
    DevSet set;
    for (const auto& s : src) set.src.push_back(numericalize(s, agent.source_vocab));
    return decode_agent(agent, set, cfg_.schedule);
  }
  const NeighborMode m = system == SystemId::MastSos ? NeighborMode::TopK : NeighborMode::Random;
  const ControllerCheckpoint ckpt = parse_controller(read_file(dir_ / "mat" / mode_dir(m) / style / "controller.ckpt"));
  std::vector<AgentModel> agents;
  for (const AgentRef& ref : ckpt.agents) {
    const auto r = std::find(names.begin(), names.end(), ref.target);
    if (r == names.end()) fail(ErrorKind::VocabMismatch, "controller refers to unknown style " + ref.target);
    agents.push_back(semi_agent(static_cast<std::size_t>(r - names.begin()) + 1));
  }
  std::vector<const AgentModel*> members;
  for (const auto& a : agents) members.push_back(&a);
  const MatSystem sys = make_system(members);
  verify_agents(ckpt, sys);
  return decode_mat(ckpt.controller, sys, src, cfg_.mat);
}

// ---------------------------------------------------------------------------
// Sweeps

namespace {

double mean_over(const MetricsReport& r, const std::vector<std::string>& styles, SystemId s) {
  double sum = 0.0;
  for (const auto& name : styles) {
    const auto it = std::find(r.styles.begin(), r.styles.end(), name);
    if (it == r.styles.end()) fail(ErrorKind::InvalidConfig, "style " + name + " missing from report");
    sum += r.at(static_cast<std::size_t>(it - r.styles.begin()), s);
  }
  return styles.empty() ? 0.0 : sum / static_cast<double>(styles.size());
}

}  // namespace

SweepReport sweep_candidates(const ExperimentConfig& cfg, const fs::path& dir, int jobs) {
  if (cfg.manifest) fail(ErrorKind::InvalidConfig, "sweep-candidates runs on synthetic styles");
  const auto& sizes = cfg.sweep.candidate_sizes;
  if (sizes.size() < 2) fail(ErrorKind::InvalidConfig, "sweep-candidates needs at least two pool sizes");
  ExperimentConfig family = cfg;
  family.synthetic.styles = cfg.sweep.candidate_styles;
  validate(family);
  std::vector<std::string> base_names;
  for (std::size_t i = 0; i < cfg.sweep.base_styles; ++i) base_names.push_back(family.synthetic.styles[i].name);
  SweepReport out;
  out.kind = "candidates";
  for (std::size_t n = 0; n < sizes.size(); ++n) {
    const std::size_t pool = sizes[n];
    // The pool is the first `pool` styles; the corpus stays the full family
    // so every pool sees the same rewrite rules.
    ExperimentConfig sub = family;
    sub.k = std::min(cfg.k, pool - 1);
    Experiment full(family, dir / "corpus-run", jobs);
    if (n == 0) full.prepare();
    PreparedData d = full.data();
    const fs::path pdir = dir / ("pool-" + std::to_string(pool));
    fs::create_directories(pdir / "corpus");
    ParallelCorpus corpus;
    corpus.styles.push_back(d.corpus.styles[0]);
    corpus.sentences.push_back(d.corpus.sentences[0]);
    for (std::size_t s = 1; s <= pool; ++s) {
      corpus.styles.push_back({static_cast<int>(s), d.corpus.styles[s].name});
      corpus.sentences.push_back(d.corpus.sentences[s]);
    }
    write_corpus(corpus, pdir / "corpus");
    sub.manifest = pdir / "corpus" / "manifest.tsv";
    Experiment e(sub, pdir / "run", jobs);
    MetricsReport r = e.run();
    SweepRow row;
    row.label = "pool-" + std::to_string(pool);
    row.size = pool;
    for (std::size_t s = 0; s < kNumSystems; ++s) row.average[s] = mean_over(r, base_names, static_cast<SystemId>(s));
    out.rows.push_back(row);
  }
  write_file(dir / "sweep.csv", render_sweep_csv(out, cfg.k));
  return out;
}

SweepReport sweep_labeled(const ExperimentConfig& cfg, const fs::path& dir, int jobs) {
  SweepReport out;
  out.kind = "labeled";
  if (cfg.sweep.labeled_sizes.empty()) fail(ErrorKind::InvalidConfig, "sweep-labeled needs at least one size");
  for (std::size_t size : cfg.sweep.labeled_sizes) {
    if (size == 0) fail(ErrorKind::InsufficientData, "labeled size 0 leaves nothing to train on");
    ExperimentConfig sub = cfg;
    sub.split.train = size;
    const std::size_t need = size + cfg.split.dev + cfg.split.test + cfg.split.unlabeled;
    if (!cfg.manifest && sub.synthetic.sentences < need) sub.synthetic.sentences = need;
    Experiment e(sub, dir / ("labeled-" + std::to_string(size)), jobs);
    MetricsReport r = e.run();
    out.rows.push_back({"labeled-" + std::to_string(size), size, r.average});
  }
  write_file(dir / "sweep.csv", render_sweep_csv(out, cfg.k));
  return out;
}

std::string render_sweep_csv(const SweepReport& r, std::size_t k) {
  const auto names = system_names(k);
  std::string out = "label,size";
  for (const auto& n : names) out += "," + n;
  out += ",sos_delta\n";
  const double base = r.rows.empty() ? 0.0 : r.rows.front().average[static_cast<std::size_t>(SystemId::MastSos)];
  char buf[64];
  for (const auto& row : r.rows) {
    out += row.label + "," + std::to_string(row.size);
    for (double v : row.average) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      out += buf;
    }
    std::snprintf(buf, sizeof buf, ",%.17g\n", row.average[static_cast<std::size_t>(SystemId::MastSos)] - base);
    out += buf;
  }
  return out;
}

}  // namespace mast
