#pragma once

// Experiment configuration: JSON in, validated and fully resolved out.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mast/corpus.hpp"
#include "mast/mat.hpp"
#include "mast/semi.hpp"
#include "mast/seq2seq.hpp"
#include "mast/sos.hpp"

namespace mast {

struct SyntheticSpec {
  std::size_t sentences = 3000;
  std::size_t rewrite_count = 60;
  std::string source_name = "src";
  std::vector<StyleFamilyMember> styles{{"a", 1.0}, {"b", 0.7}, {"c", 0.2}};

  friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

struct SweepSpec {
  /// Style family for sweep-candidates; a pool of size m is its first m
  /// members and the first base_styles members are scored.
  std::vector<StyleFamilyMember> candidate_styles{{"a", 1.0}, {"b", 0.6}, {"c", 0.2}, {"d", 0.9}, {"e", 0.5}};
  std::vector<std::size_t> candidate_sizes{3, 5};
  std::size_t base_styles = 3;
  std::vector<std::size_t> labeled_sizes{100, 300, 1000};
};

struct ExperimentConfig {
  std::string preset = "desk";
  std::uint64_t seed = 1;
  /// Exactly one of manifest / synthetic is used; manifest wins when set.
  std::optional<std::filesystem::path> manifest;
  SyntheticSpec synthetic;
  SplitSizes split{500, 100, 200, 2000};
  std::size_t vocab_max = 2000;
  ModelDims model;
  TrainSchedule schedule;
  int semi_epochs = 0;  // 0 reuses schedule.epochs
  RouteProbs route_probs{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  bool share_enc_j = true;
  NoiseConfig noise;
  double alpha = 0.5;
  std::size_t k = 2;
  ClassifierConfig classifier;
  ControllerConfig controller;
  MatSchedule mat;
  bool bleu_smoothing = false;
  SweepSpec sweep;
};

/// Desk defaults, or the larger published hyperparameters for "paper".
ExperimentConfig preset_config(const std::string& preset);

void validate(const ExperimentConfig& cfg);

/// Parses JSON on top of the named preset (the JSON "preset" key, else
/// `preset`). Unknown keys are rejected.
ExperimentConfig parse_config(std::string_view json, const std::string& preset = "desk");
ExperimentConfig load_config(const std::filesystem::path& path, const std::string& preset = "desk");

/// Canonical JSON with every field present; parse_config round-trips it.
std::string config_to_json(const ExperimentConfig& cfg);

}  // namespace mast
