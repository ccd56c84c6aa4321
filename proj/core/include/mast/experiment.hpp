#pragma once

// End-to-end runs: data preparation, the four compared systems per target
// style, evaluation, and the two sweeps. Every stage reads its inputs from
// and writes its outputs to one run directory.
//
// Layout of a run directory:
//   config.json            resolved configuration
//   corpus/                manifest + one file per style
//   split.txt
//   atts2s/<style>/        agent.ckpt, curve.csv
//   semi/<style>/          semi.ckpt, agent.ckpt (best dev), curve.csv
//   sos/                   classifier checkpoints, scores.txt, acc.csv, sc.csv
//   mat/<mode>/<style>/    controller.ckpt, curve.csv
//   hyp/<system>/<style>.txt
//   report.csv, report.md, run.log, FAILED (only after an error)

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mast/config.hpp"
#include "mast/report.hpp"

namespace mast {

/// Corpus, split, and per-style vocabularies derived from a config.
/// Style 0 is the source style; styles 1.. are the transfer targets.
struct PreparedData {
  ParallelCorpus corpus;
  DataSplit split;
  Vocabulary source_vocab;
  std::vector<Vocabulary> target_vocabs;  // index t-1 for corpus style t

  std::vector<std::string> target_names() const;
  std::vector<Sentence> rows(std::size_t style, const std::vector<std::size_t>& idx) const;
  ParallelData labeled(std::size_t style) const;
  DevSet dev(std::size_t style) const;
  DevSet test(std::size_t style) const;
  SemiData semi_data(std::size_t style) const;
};

/// Synthetic corpus described by the config (deterministic in cfg.seed).
ParallelCorpus synthesize_corpus(const ExperimentConfig& cfg);
PreparedData prepare_data(const ExperimentConfig& cfg);

/// Runs independent jobs on up to `jobs` threads; the first exception is
/// rethrown after all jobs finish.
void run_jobs(std::size_t count, int jobs, const std::function<void(std::size_t)>& job);

class Experiment {
 public:
  /// Starts a fresh run directory (prepare() must be called before the
  /// training stages).
  Experiment(ExperimentConfig cfg, std::filesystem::path run_dir, int jobs = 1);

  /// Reopens an existing run directory using its recorded config.
  static Experiment open(const std::filesystem::path& run_dir, int jobs = 1);

  const ExperimentConfig& config() const { return cfg_; }
  const std::filesystem::path& dir() const { return dir_; }

  void prepare();
  void train_base();
  void train_semi();
  void sos();
  /// Trains controllers for one neighbor mode, or both when unset. A
  /// random-mode controller whose neighbors equal the SOS ones is copied
  /// instead of retrained.
  void train_mat(std::optional<NeighborMode> mode = std::nullopt);
  /// Decodes every test set from the persisted checkpoints and writes the
  /// report.
  MetricsReport evaluate();

  /// All stages in order. On failure a FAILED marker with the error is
  /// written before the exception propagates.
  MetricsReport run();

  /// Translates source-style sentences with one system for one target style.
  std::vector<Sentence> translate(SystemId system, const std::string& style,
                                  std::span<const Sentence> src);

  PreparedData& data();

 private:
  void log(const std::string& line);
  std::filesystem::path style_dir(const std::string& stage, const std::string& style) const;
  AgentModel semi_agent(std::size_t style);
  NeighborGraph neighbors(NeighborMode mode);

  ExperimentConfig cfg_;
  std::filesystem::path dir_;
  int jobs_ = 1;
  std::optional<PreparedData> data_;
};

std::string mode_dir(NeighborMode mode);

// ---------------------------------------------------------------------------
// Sweeps

struct SweepRow {
  std::string label;
  std::size_t size = 0;
  SystemScores average{};
};

struct SweepReport {
  std::string kind;  // "candidates" or "labeled"
  std::vector<SweepRow> rows;
};

/// MAST:SOS-k average BLEU over a fixed base style set while the candidate
/// pool grows; `average` holds the BLEU and the last column the improvement
/// over the smallest pool.
SweepReport sweep_candidates(const ExperimentConfig& cfg, const std::filesystem::path& dir, int jobs);

/// AttS2S, Semi and MAST:SOS-k averages at each labeled size.
SweepReport sweep_labeled(const ExperimentConfig& cfg, const std::filesystem::path& dir, int jobs);

std::string render_sweep_csv(const SweepReport& r, std::size_t k);

}  // namespace mast
