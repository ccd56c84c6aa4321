#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "mast/corpus.hpp"

namespace mast {

struct BleuOptions {
  int max_n = 4;
  /// Add-one smoothing of the n>1 precisions; off reproduces the original
  /// unsmoothed definition.
  bool smooth = false;
};

struct BleuStats {
  std::vector<std::size_t> matches;  // clipped n-gram matches, index n-1
  std::vector<std::size_t> totals;   // hypothesis n-gram counts
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;

  double precision(int n) const;
  double brevity_penalty() const;
};

/// Corpus-level sufficient statistics with one reference per hypothesis.
BleuStats bleu_stats(std::span<const Sentence> hypotheses, std::span<const Sentence> references,
                     int max_n = 4);

double bleu_from_stats(const BleuStats& stats, const BleuOptions& opts = {});

/// Corpus BLEU in [0, 100]: geometric mean of clipped n-gram precisions
/// times exp(min(0, 1 - r/c)). Zero when any precision is zero unless
/// smoothing is on.
double bleu(std::span<const Sentence> hypotheses, std::span<const Sentence> references,
            const BleuOptions& opts = {});

}  // namespace mast
