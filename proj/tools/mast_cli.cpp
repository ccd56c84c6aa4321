// mast: command-line front end for preparing data, training the compared
// systems, and evaluating run directories.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mast/experiment.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string run_dir = "run";
  std::string preset = "desk";
  int jobs = 1;
};

mast::ExperimentConfig resolve_config(const Globals& g) {
  mast::ExperimentConfig cfg =
      g.config.empty() ? mast::preset_config(g.preset) : mast::load_config(g.config, g.preset);
  if (g.seed) cfg.seed = *g.seed;
  mast::validate(cfg);
  return cfg;
}

/// Reuses a prepared run directory; otherwise prepares it from the flags.
mast::Experiment open_run(const Globals& g) {
  if (fs::exists(fs::path(g.run_dir) / "config.json")) return mast::Experiment::open(g.run_dir, g.jobs);
  mast::Experiment e(resolve_config(g), g.run_dir, g.jobs);
  e.prepare();
  return e;
}

int error_record(const std::string& command, const std::string& kind, const std::string& message, int code) {
  json rec = {{"status", "error"}, {"command", command}, {"error", kind}, {"message", message}};
  std::cerr << rec.dump() << '\n';
  return code;
}

std::vector<mast::Sentence> read_sentences(std::istream& in) {
  std::vector<mast::Sentence> out;
  std::string line;
  while (std::getline(in, line)) out.push_back(mast::tokenize(line));
  return out;
}

mast::SystemId parse_system(const std::string& s) {
  if (s == "atts2s") return mast::SystemId::AttS2S;
  if (s == "semi") return mast::SystemId::Semi;
  if (s == "mast-rand") return mast::SystemId::MastRandom;
  if (s == "mast-sos") return mast::SystemId::MastSos;
  mast::fail(mast::ErrorKind::InvalidConfig, "unknown system '" + s + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent style transfer: training, neighbor selection and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Override the config seed");
  app.add_option("--run-dir", g.run_dir, "Run directory")->capture_default_str();
  app.add_option("--preset", g.preset, "Base preset")->check(CLI::IsMember({"desk", "paper"}))->capture_default_str();
  app.add_option("--jobs", g.jobs, "Parallel training jobs")->check(CLI::PositiveNumber)->capture_default_str();

  auto* prepare = app.add_subcommand("prepare", "Build corpus, split and config in the run directory");
  auto* synth = app.add_subcommand("synth", "Write the configured synthetic corpus to a directory");
  std::string synth_out = "synthetic";
  synth->add_option("--out", synth_out, "Output directory")->capture_default_str();
  auto* train_base = app.add_subcommand("train-base", "Train the supervised AttS2S agents");
  auto* train_semi = app.add_subcommand("train-semi", "Train the semi-supervised agents");
  auto* sos = app.add_subcommand("sos", "Train style classifiers and select neighbors");
  auto* train_mat = app.add_subcommand("train-mat", "Train controllers over frozen agents");
  std::string mat_mode = "both";
  train_mat->add_option("--mode", mat_mode, "Neighbor mode")
      ->check(CLI::IsMember({"sos", "random", "both"}))
      ->capture_default_str();
  auto* translate = app.add_subcommand("translate", "Translate source-style lines from a file or stdin");
  std::string tr_system = "mast-sos", tr_style, tr_input;
  translate->add_option("--system", tr_system, "atts2s | semi | mast-rand | mast-sos")
      ->check(CLI::IsMember({"atts2s", "semi", "mast-rand", "mast-sos"}))
      ->capture_default_str();
  translate->add_option("--style", tr_style, "Target style")->required();
  translate->add_option("--input", tr_input, "Input file (default stdin)")->check(CLI::ExistingFile);
  auto* evaluate = app.add_subcommand("evaluate", "Decode test sets from checkpoints and write the report");
  auto* run = app.add_subcommand("run", "Every stage from prepare to evaluate");
  auto* sweep_c = app.add_subcommand("sweep-candidates", "MAST:SOS-k over growing candidate pools");
  auto* sweep_l = app.add_subcommand("sweep-labeled", "All systems over labeled-set sizes");
  auto* report = app.add_subcommand("report", "Render a report; several run directories give per-cell medians");
  std::string format = "markdown";
  std::vector<std::string> report_dirs;
  report->add_option("--format", format, "csv | markdown")
      ->check(CLI::IsMember({"csv", "markdown"}))
      ->capture_default_str();
  report->add_option("runs", report_dirs, "Run directories (default --run-dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return error_record("", "UsageError", e.what(), 2);
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (*prepare) {
      mast::Experiment e(resolve_config(g), g.run_dir, g.jobs);
      e.prepare();
    } else if (*synth) {
      mast::ExperimentConfig cfg = resolve_config(g);
      mast::write_corpus(mast::synthesize_corpus(cfg), synth_out);
    } else if (*train_base) {
      open_run(g).train_base();
    } else if (*train_semi) {
      open_run(g).train_semi();
    } else if (*sos) {
      open_run(g).sos();
    } else if (*train_mat) {
      std::optional<mast::NeighborMode> mode;
      if (mat_mode == "sos") mode = mast::NeighborMode::TopK;
      if (mat_mode == "random") mode = mast::NeighborMode::Random;
      open_run(g).train_mat(mode);
    } else if (*translate) {
      mast::Experiment e = mast::Experiment::open(g.run_dir, g.jobs);
      std::vector<mast::Sentence> src;
      if (tr_input.empty()) {
        src = read_sentences(std::cin);
      } else {
        std::ifstream in(tr_input);
        src = read_sentences(in);
      }
      for (const auto& s : e.translate(parse_system(tr_system), tr_style, src)) {
        std::cout << mast::join(s) << '\n';
      }
    } else if (*evaluate) {
      std::cout << mast::render_markdown(mast::Experiment::open(g.run_dir, g.jobs).evaluate());
    } else if (*run) {
      mast::Experiment e(resolve_config(g), g.run_dir, g.jobs);
      std::cout << mast::render_markdown(e.run());
    } else if (*sweep_c) {
      const auto r = mast::sweep_candidates(resolve_config(g), g.run_dir, g.jobs);
      std::cout << mast::render_sweep_csv(r, resolve_config(g).k);
    } else if (*sweep_l) {
      const auto r = mast::sweep_labeled(resolve_config(g), g.run_dir, g.jobs);
      std::cout << mast::render_sweep_csv(r, resolve_config(g).k);
    } else if (*report) {
      if (report_dirs.empty()) report_dirs.push_back(g.run_dir);
      std::vector<mast::MetricsReport> runs;
      for (const auto& d : report_dirs) runs.push_back(mast::load_report(fs::path(d) / "report.csv"));
      const mast::MetricsReport r = runs.size() == 1 ? runs.front() : mast::median_report(runs);
      std::cout << (format == "csv" ? mast::render_csv(r) : mast::render_markdown(r));
    }
  } catch (const mast::Error& e) {
    return error_record(command, std::string(mast::to_string(e.kind())), e.what(), 1);
  } catch (const std::exception& e) {
    return error_record(command, "Internal", e.what(), 3);
  }
  return 0;
}
