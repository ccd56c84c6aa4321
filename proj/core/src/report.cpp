#include "mast/report.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "mast/error.hpp"
#include "mast/seq2seq.hpp"
#include "text_io.hpp"

namespace mast {

std::array<std::string, kNumSystems> system_names(std::size_t k) {
  const std::string ks = std::to_string(k);
  return {"AttS2S", "Semi", "MAST:Rand-" + ks, "MAST:SOS-" + ks};
}

SystemScores row_average(const MetricsReport& r) {
  SystemScores avg{};
  if (r.bleu.empty()) return avg;
  for (std::size_t s = 0; s < kNumSystems; ++s) {
    double sum = 0.0;
    for (const auto& row : r.bleu) sum += row[s];
    avg[s] = sum / static_cast<double>(r.bleu.size());
  }
  return avg;
}

void finalize(MetricsReport& r) {
  if (r.bleu.size() != r.styles.size() || r.unk_references.size() != r.styles.size()) {
    fail(ErrorKind::ShapeMismatch, "report rows do not match the style list");
  }
  std::vector<std::size_t> order(r.styles.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return r.styles[a] < r.styles[b]; });
  MetricsReport sorted = r;
  for (std::size_t i = 0; i < order.size(); ++i) {
    sorted.styles[i] = r.styles[order[i]];
    sorted.bleu[i] = r.bleu[order[i]];
    sorted.unk_references[i] = r.unk_references[order[i]];
  }
  sorted.average = row_average(sorted);
  r = std::move(sorted);
}

namespace {

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fixed2(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

std::string seed_list(const std::vector<std::uint64_t>& seeds, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(seeds[i]);
  }
  return out;
}

std::vector<std::string> split_on(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto p = s.find(sep, start);
    out.emplace_back(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start));
    if (p == std::string_view::npos) break;
    start = p + 1;
  }
  return out;
}

}  // namespace

std::string render_csv(const MetricsReport& r) {
  const auto names = system_names(r.k);
  std::string out = "# k=" + std::to_string(r.k) + " seeds=" + seed_list(r.seeds, ",") + "\n";
  out += "style";
  for (const auto& n : names) out += "," + n;
  out += ",unk_references\n";
  if (r.styles.empty()) return out;
  std::size_t unk_total = 0;
  for (std::size_t i = 0; i < r.styles.size(); ++i) {
    out += r.styles[i];
    for (double v : r.bleu[i]) out += "," + num(v);
    out += "," + std::to_string(r.unk_references[i]) + "\n";
    unk_total += r.unk_references[i];
  }
  out += "average";
  for (double v : r.average) out += "," + num(v);
  out += "," + std::to_string(unk_total) + "\n";
  return out;
}

std::string render_markdown(const MetricsReport& r) {
  const auto names = system_names(r.k);
  std::string out = "| Style |";
  for (const auto& n : names) out += " " + n + " |";
  out += " UNK refs |\n|---|";
  for (std::size_t s = 0; s < kNumSystems; ++s) out += "---:|";
  out += "---:|\n";
  if (r.styles.empty()) return out;
  std::size_t unk_total = 0;
  for (std::size_t i = 0; i < r.styles.size(); ++i) {
    out += "| " + r.styles[i] + " |";
    for (double v : r.bleu[i]) out += " " + fixed2(v) + " |";
    out += " " + std::to_string(r.unk_references[i]) + " |\n";
    unk_total += r.unk_references[i];
  }
  out += "| **Average** |";
  for (double v : r.average) out += " **" + fixed2(v) + "** |";
  out += " " + std::to_string(unk_total) + " |\n\nSeeds: " + seed_list(r.seeds, ", ") + "\n";
  return out;
}

MetricsReport parse_report_csv(std::string_view text) {
  using detail::parse_double;
  detail::LineReader in(text);
  MetricsReport r;
  const std::string_view meta = in.line();
  if (meta.rfind("# k=", 0) != 0) fail(ErrorKind::ParseError, "report: missing metadata line");
  const auto fields = tokenize(meta.substr(2));
  for (const auto& f : fields) {
    if (f.rfind("k=", 0) == 0) {
      r.k = std::stoul(f.substr(2));
    } else if (f.rfind("seeds=", 0) == 0) {
      if (f.size() > 6) {
        for (const auto& s : split_on(std::string_view(f).substr(6), ',')) r.seeds.push_back(std::stoull(s));
      }
    } else {
      fail(ErrorKind::ParseError, "report: unknown metadata '" + f + "'");
    }
  }
  const auto header = split_on(in.line(), ',');
  const auto names = system_names(r.k);
  if (header.size() != kNumSystems + 2 || header[0] != "style" ||
      !std::equal(names.begin(), names.end(), header.begin() + 1)) {
    fail(ErrorKind::ParseError, "report: unexpected header");
  }
  bool have_average = false;
  while (!in.done()) {
    const std::string_view line = in.line();
    if (line.empty()) continue;
    if (have_average) fail(ErrorKind::ParseError, "report: rows after the average row");
    const auto cells = split_on(line, ',');
    if (cells.size() != kNumSystems + 2) fail(ErrorKind::ParseError, "report: bad row '" + std::string(line) + "'");
    SystemScores row{};
    for (std::size_t s = 0; s < kNumSystems; ++s) row[s] = parse_double(cells[s + 1]);
    if (cells[0] == "average") {
      r.average = row;
      have_average = true;
    } else {
      r.styles.push_back(cells[0]);
      r.bleu.push_back(row);
      r.unk_references.push_back(std::stoul(cells.back()));
    }
  }
  if (!r.styles.empty() && !have_average) fail(ErrorKind::ParseError, "report: missing average row");
  return r;
}

void write_report(const MetricsReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / "report.csv", render_csv(r));
  write_file(dir / "report.md", render_markdown(r));
}

MetricsReport load_report(const std::filesystem::path& csv) {
  return parse_report_csv(read_file(csv));
}

MetricsReport median_report(std::span<const MetricsReport> runs) {
  if (runs.empty()) fail(ErrorKind::InvalidConfig, "median_report: no runs");
  MetricsReport out;
  out.k = runs[0].k;
  out.styles = runs[0].styles;
  for (const auto& r : runs) {
    if (r.styles != out.styles || r.k != out.k) {
      fail(ErrorKind::ShapeMismatch, "median_report: runs cover different styles");
    }
    out.seeds.insert(out.seeds.end(), r.seeds.begin(), r.seeds.end());
    out.wall_clock_seconds += r.wall_clock_seconds;
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  for (std::size_t i = 0; i < out.styles.size(); ++i) {
    SystemScores row{};
    for (std::size_t s = 0; s < kNumSystems; ++s) {
      std::vector<double> cell;
      for (const auto& r : runs) cell.push_back(r.bleu[i][s]);
      row[s] = median(std::move(cell));
    }
    std::vector<double> unk;
    for (const auto& r : runs) unk.push_back(static_cast<double>(r.unk_references[i]));
    out.bleu.push_back(row);
    out.unk_references.push_back(static_cast<std::size_t>(median(std::move(unk))));
  }
  out.average = row_average(out);
  return out;
}

}  // namespace mast
