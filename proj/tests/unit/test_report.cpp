#include "doctest.h"
#include "mast/error.hpp"
#include "mast/report.hpp"
#include "mast/rng.hpp"
#include "tmpdir.hpp"

using namespace mast;

namespace {

MetricsReport random_report(Rng& rng, std::size_t n_styles) {
  MetricsReport r;
  r.k = 2;
  r.seeds = {3, 1};
  for (std::size_t i = 0; i < n_styles; ++i) {
    r.styles.push_back("s" + std::to_string(n_styles - i));
    SystemScores row{};
    for (double& v : row) v = 100.0 * uniform01(rng);
    r.bleu.push_back(row);
    r.unk_references.push_back(uniform_index(rng, 5));
  }
  finalize(r);
  return r;
}

}  // namespace

TEST_CASE("system names carry k") {
  const auto n = system_names(3);
  CHECK(n[0] == "AttS2S");
  CHECK(n[1] == "Semi");
  CHECK(n[2] == "MAST:Rand-3");
  CHECK(n[3] == "MAST:SOS-3");
}

TEST_CASE("empty style list renders headers only") {
  MetricsReport r;
  finalize(r);
  CHECK(render_markdown(r) ==
        "| Style | AttS2S | Semi | MAST:Rand-2 | MAST:SOS-2 | UNK refs |\n|---|---:|---:|---:|---:|---:|\n");
  CHECK(render_csv(r) == "# k=2 seeds=\nstyle,AttS2S,Semi,MAST:Rand-2,MAST:SOS-2,unk_references\n");
  const MetricsReport back = parse_report_csv(render_csv(r));
  CHECK(back.styles.empty());
}

TEST_CASE("finalize sorts rows and averages") {
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const MetricsReport r = random_report(rng, 1 + uniform_index(rng, 6));
    CHECK(std::is_sorted(r.styles.begin(), r.styles.end()));
    for (std::size_t s = 0; s < kNumSystems; ++s) {
      double sum = 0.0;
      for (const auto& row : r.bleu) sum += row[s];
      CHECK(std::abs(r.average[s] - sum / static_cast<double>(r.bleu.size())) <= 1e-9);
    }
  }
}

TEST_CASE("csv round-trip reproduces both renderings") {
  Rng rng(6);
  for (int rep = 0; rep < 20; ++rep) {
    const MetricsReport r = random_report(rng, 1 + uniform_index(rng, 6));
    const std::string csv = render_csv(r);
    const MetricsReport back = parse_report_csv(csv);
    CHECK(render_csv(back) == csv);
    CHECK(render_markdown(back) == render_markdown(r));
    CHECK(back.bleu == r.bleu);
    CHECK(back.seeds == r.seeds);
  }
  mast::testing::TempDir dir;
  const MetricsReport r = random_report(rng, 3);
  write_report(r, dir.path);
  CHECK(render_csv(load_report(dir.path / "report.csv")) == render_csv(r));
}

TEST_CASE("malformed csv is rejected") {
  CHECK_THROWS_AS(parse_report_csv("style,AttS2S\n"), Error);
  CHECK_THROWS_AS(parse_report_csv("# k=2 seeds=1\nstyle,a,b,c,d,unk_references\n"), Error);
  CHECK_THROWS_AS(
      parse_report_csv("# k=2 seeds=1\nstyle,AttS2S,Semi,MAST:Rand-2,MAST:SOS-2,unk_references\nx,1,2,3,4,0\n"),
      Error);
}

TEST_CASE("median report") {
  MetricsReport a, b, c;
  for (MetricsReport* r : {&a, &b, &c}) {
    r->styles = {"x", "y"};
    r->unk_references = {0, 0};
  }
  a.seeds = {1};
  b.seeds = {2};
  c.seeds = {3};
  a.bleu = {{1, 2, 3, 4}, {10, 10, 10, 10}};
  b.bleu = {{5, 0, 3, 8}, {20, 20, 20, 20}};
  c.bleu = {{3, 9, 3, 0}, {30, 30, 30, 30}};
  const std::vector<MetricsReport> runs{a, b, c};
  const MetricsReport m = median_report(runs);
  CHECK(m.bleu[0] == SystemScores{3, 2, 3, 4});
  CHECK(m.bleu[1] == SystemScores{20, 20, 20, 20});
  CHECK(m.average == SystemScores{11.5, 11, 11.5, 12});
  CHECK(m.seeds == std::vector<std::uint64_t>{1, 2, 3});

  const std::vector<MetricsReport> two{a, b};
  CHECK(median_report(two).bleu[0] == SystemScores{3, 1, 3, 6});

  MetricsReport d = a;
  d.styles = {"x", "z"};
  const std::vector<MetricsReport> mixed{a, d};
  CHECK_THROWS_AS(median_report(mixed), Error);
  CHECK_THROWS_AS(median_report(std::span<const MetricsReport>{}), Error);
}
