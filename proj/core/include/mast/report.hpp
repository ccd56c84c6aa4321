#pragma once

// BLEU table over target styles for the four compared systems, rendered as
// CSV (lossless) or markdown.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mast {

inline constexpr std::size_t kNumSystems = 4;

enum class SystemId : std::size_t { AttS2S = 0, Semi = 1, MastRandom = 2, MastSos = 3 };

/// "AttS2S", "Semi", "MAST:Rand-k", "MAST:SOS-k".
std::array<std::string, kNumSystems> system_names(std::size_t k);

using SystemScores = std::array<double, kNumSystems>;

struct MetricsReport {
  std::size_t k = 2;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> styles;
  std::vector<SystemScores> bleu;             // one row per style
  std::vector<std::size_t> unk_references;    // per style, from MAT training
  SystemScores average{};
  /// Kept out of the rendered files so identical runs give identical reports.
  double wall_clock_seconds = 0.0;

  double at(std::size_t style, SystemId s) const { return bleu[style][static_cast<std::size_t>(s)]; }
};

/// Sorts rows by style name and recomputes the average row.
void finalize(MetricsReport& report);
SystemScores row_average(const MetricsReport& report);

std::string render_csv(const MetricsReport& report);
std::string render_markdown(const MetricsReport& report);
MetricsReport parse_report_csv(std::string_view text);

/// Writes report.csv and report.md into dir.
void write_report(const MetricsReport& report, const std::filesystem::path& dir);
MetricsReport load_report(const std::filesystem::path& csv);

/// Per-cell median over runs with identical style lists; averages are
/// recomputed from the median rows.
MetricsReport median_report(std::span<const MetricsReport> runs);

}  // namespace mast
