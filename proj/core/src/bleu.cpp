#include "mast/bleu.hpp"

#include <cmath>
#include <map>

namespace mast {

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(const Sentence& s, int n) {
  NgramCounts counts;
  const auto len = static_cast<int>(s.size());
  for (int i = 0; i + n <= len; ++i) {
    ++counts[std::vector<std::string>(s.begin() + i, s.begin() + i + n)];
  }
  return counts;
}

}  // namespace

double BleuStats::precision(int n) const {
  const auto k = static_cast<std::size_t>(n - 1);
  if (k >= totals.size() || totals[k] == 0) return 0.0;
  return static_cast<double>(matches[k]) / static_cast<double>(totals[k]);
}

double BleuStats::brevity_penalty() const {
  if (hyp_length == 0) return 0.0;
  return std::exp(std::min(0.0, 1.0 - static_cast<double>(ref_length) /
                                          static_cast<double>(hyp_length)));
}

BleuStats bleu_stats(std::span<const Sentence> hypotheses, std::span<const Sentence> references,
                     int max_n) {
  if (hypotheses.size() != references.size()) {
    fail(ErrorKind::LengthMismatch, "bleu: " + std::to_string(hypotheses.size()) +
                                        " hypotheses vs " + std::to_string(references.size()) +
                                        " references");
  }
  if (references.empty()) fail(ErrorKind::EmptyReference, "bleu: no references");
  BleuStats st;
  st.matches.assign(static_cast<std::size_t>(max_n), 0);
  st.totals.assign(static_cast<std::size_t>(max_n), 0);
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const Sentence& hyp = hypotheses[i];
    const Sentence& ref = references[i];
    st.hyp_length += hyp.size();
    st.ref_length += ref.size();
    for (int n = 1; n <= max_n; ++n) {
      const auto k = static_cast<std::size_t>(n - 1);
      const NgramCounts hc = count_ngrams(hyp, n);
      const NgramCounts rc = count_ngrams(ref, n);
      for (const auto& [gram, c] : hc) {
        st.totals[k] += c;
        auto it = rc.find(gram);
        if (it != rc.end()) st.matches[k] += std::min(c, it->second);
      }
    }
  }
  if (st.ref_length == 0) fail(ErrorKind::EmptyReference, "bleu: references are all empty");
  return st;
}

double bleu_from_stats(const BleuStats& stats, const BleuOptions& opts) {
  double log_sum = 0.0;
  for (int n = 1; n <= opts.max_n; ++n) {
    const auto k = static_cast<std::size_t>(n - 1);
    double m = static_cast<double>(stats.matches[k]);
    double t = static_cast<double>(stats.totals[k]);
    if (opts.smooth && n > 1) {
      m += 1.0;
      t += 1.0;
    }
    if (m == 0.0 || t == 0.0) return 0.0;
    log_sum += std::log(m / t);
  }
  return 100.0 * stats.brevity_penalty() * std::exp(log_sum / opts.max_n);
}

double bleu(std::span<const Sentence> hypotheses, std::span<const Sentence> references,
            const BleuOptions& opts) {
  return bleu_from_stats(bleu_stats(hypotheses, references, opts.max_n), opts);
}

}  // namespace mast
