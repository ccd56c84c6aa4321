#include "doctest.h"
#include "mast/config.hpp"
#include "tmpdir.hpp"

#include <fstream>

using namespace mast;

TEST_CASE("presets") {
  const ExperimentConfig desk = preset_config("desk");
  CHECK(desk.model.hidden == 64);
  CHECK(desk.split.train == 500);
  CHECK(desk.split.unlabeled == 2000);
  CHECK(desk.k == 2);
  CHECK(desk.alpha == 0.5);
  CHECK_NOTHROW(validate(desk));

  const ExperimentConfig paper = preset_config("paper");
  CHECK(paper.model.embed == 500);
  CHECK(paper.model.hidden == 500);
  CHECK(paper.model.layers == 2);
  CHECK(paper.model.dropout == 0.3);
  CHECK(paper.schedule.sgd.learning_rate == 1.0);
  CHECK_NOTHROW(validate(paper));

  CHECK_THROWS_AS(preset_config("laptop"), Error);
}

TEST_CASE("JSON round-trip and overrides") {
  ExperimentConfig c = preset_config("desk");
  c.seed = 42;
  c.alpha = 0.25;
  c.route_probs = {0.5, 0.25, 0.25};
  c.schedule.sgd.clip_norm.reset();
  c.synthetic.styles = {{"x", 1.0}, {"y", 0.3}, {"z", 0.1}};
  const std::string text = config_to_json(c);
  const ExperimentConfig back = parse_config(text);
  CHECK(config_to_json(back) == text);
  CHECK(back.seed == 42);
  CHECK(!back.schedule.sgd.clip_norm);
  CHECK(back.synthetic == c.synthetic);

  const ExperimentConfig partial = parse_config(R"({"seed": 7, "sos": {"k": 1}})");
  CHECK(partial.seed == 7);
  CHECK(partial.k == 1);
  CHECK(partial.model.hidden == 64);

  const ExperimentConfig on_paper = parse_config(R"({"preset": "paper"})");
  CHECK(on_paper.model.hidden == 500);

  mast::testing::TempDir dir;
  std::ofstream(dir.path / "c.json") << text;
  CHECK(config_to_json(load_config(dir.path / "c.json")) == text);
  CHECK_THROWS_AS(load_config(dir.path / "missing.json"), Error);
}

TEST_CASE("invalid configs are rejected") {
  CHECK_THROWS_AS(parse_config(R"({"sed": 1})"), Error);
  CHECK_THROWS_AS(parse_config(R"({"model": {"hidden": 4, "width": 3}})"), Error);
  CHECK_THROWS_AS(parse_config("{not json"), Error);
  CHECK_THROWS_AS(parse_config(R"({"semi": {"route_probs": [0.5, 0.5, 0.5]}})"), Error);
  CHECK_THROWS_AS(parse_config(R"({"sos": {"alpha": 2}})"), Error);

  ExperimentConfig c = preset_config("desk");
  c.synthetic.styles = {{"a", 1.0}, {"a", 0.5}};
  CHECK_THROWS_AS(validate(c), Error);
  c = preset_config("desk");
  c.synthetic.styles = {{"a/b", 1.0}, {"c", 0.5}};
  CHECK_THROWS_AS(validate(c), Error);
  c = preset_config("desk");
  c.split.unlabeled = 10000;
  CHECK_THROWS_AS(validate(c), Error);
  c = preset_config("desk");
  c.sweep.candidate_sizes = {2, 5};
  CHECK_THROWS_AS(validate(c), Error);
  c = preset_config("desk");
  c.sweep.candidate_sizes = {3, 6};
  CHECK_THROWS_AS(validate(c), Error);
  c = preset_config("desk");
  c.k = 0;
  CHECK_THROWS_AS(validate(c), Error);
}
