#include "mast/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include <json.hpp>

namespace mast {

using nlohmann::json;

ExperimentConfig preset_config(const std::string& preset) {
  ExperimentConfig c;
  c.preset = preset;
  if (preset == "desk") {
    c.model = {64, 64, 2, 0.1};
    c.schedule.epochs = 40;
    c.schedule.batch_size = 4;
    c.schedule.sgd = {1.0, 5.0};
    c.schedule.patience = 0;
    c.schedule.max_len = 60;
    c.schedule.per_sentence_loss = false;
    c.mat.max_len = 60;
    c.classifier = {32, 32, 0.2, 20, 16, {2.0, 5.0}};
  } else if (preset == "paper") {
    c.model = {500, 500, 2, 0.3};
    c.split = {2000, 500, 500, 20000};
    c.synthetic.sentences = 23000;
    c.vocab_max = 8000;
    c.schedule.epochs = 20;
    c.schedule.batch_size = 32;
    c.schedule.sgd = {1.0, 5.0};
    c.schedule.patience = 5;
    c.schedule.max_len = 100;
    c.schedule.per_sentence_loss = false;
    c.classifier = {500, 500, 0.3, 10, 32, {1.0, 5.0}};
    c.controller = {500, 500};
  } else {
    fail(ErrorKind::InvalidConfig, "unknown preset '" + preset + "' (desk|paper)");
  }
  return c;
}

void validate(const ExperimentConfig& c) {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) fail(ErrorKind::InvalidConfig, msg);
  };
  require(c.preset == "desk" || c.preset == "paper", "preset must be desk or paper");
  auto plain_name = [](const std::string& n) {
    return !n.empty() && std::all_of(n.begin(), n.end(), [](unsigned char ch) {
      return std::isalnum(ch) || ch == '_' || ch == '-' || ch == '.';
    });
  };
  if (!c.manifest) {
    require(plain_name(c.synthetic.source_name), "style names may only use [A-Za-z0-9_.-]");
    for (const auto& s : c.synthetic.styles) {
      require(plain_name(s.name), "style names may only use [A-Za-z0-9_.-]");
    }
    require(c.synthetic.styles.size() >= 2, "synthetic task needs at least two target styles");
    std::set<std::string> names{c.synthetic.source_name};
    for (const auto& s : c.synthetic.styles) {
      require(names.insert(s.name).second, "duplicate style name '" + s.name + "'");
      require(s.shared_fraction >= 0.0 && s.shared_fraction <= 1.0, "shared fraction outside [0,1]");
    }
    require(c.synthetic.sentences > 0, "synthetic sentence count must be positive");
    require(c.synthetic.sentences >= c.split.train + c.split.dev + c.split.test + c.split.unlabeled,
            "split sizes exceed the synthetic corpus");
  }
  require(c.split.train > 0, "labeled training size must be positive");
  require(c.split.dev > 0 && c.split.test > 0, "dev and test sets must be non-empty");
  require(c.vocab_max >= 4, "vocab_max must be at least 4");
  require(c.model.embed > 0 && c.model.hidden > 0 && c.model.layers > 0, "model dims must be positive");
  require(c.model.dropout >= 0.0 && c.model.dropout < 1.0, "dropout must lie in [0,1)");
  require(c.schedule.epochs >= 0 && c.semi_epochs >= 0, "epochs must be >= 0");
  require(c.schedule.batch_size > 0 && c.mat.batch_size > 0, "batch size must be positive");
  for (const SgdConfig* s : {&c.schedule.sgd, &c.classifier.sgd, &c.mat.sgd}) {
    require(s->learning_rate > 0.0, "learning rate must be positive");
    require(!s->clip_norm || *s->clip_norm > 0.0, "clip_norm must be positive");
  }
  validate_route_probs(c.route_probs);
  validate(c.noise);
  require(c.alpha >= 0.0 && c.alpha <= 1.0, "alpha must lie in [0,1]");
  require(c.k >= 1, "k must be at least 1");
  require(c.classifier.embed > 0 && c.classifier.hidden > 0, "classifier dims must be positive");
  require(c.controller.embed > 0 && c.controller.hidden > 0, "controller dims must be positive");
  require(c.mat.max_len > 0 && c.schedule.max_len > 0, "max_len must be positive");
  require(c.sweep.base_styles >= 1, "sweep base_styles must be positive");
  std::set<std::string> candidates;
  for (const auto& m : c.sweep.candidate_styles) {
    require(plain_name(m.name), "style names may only use [A-Za-z0-9_.-]");
    require(m.name != c.synthetic.source_name && candidates.insert(m.name).second,
            "candidate style names must be distinct");
  }
  for (auto s : c.sweep.candidate_sizes) {
    // Neighbor scoring rescales rows over at least two other styles.
    require(s >= 3 && s >= c.sweep.base_styles && s <= c.sweep.candidate_styles.size(),
            "candidate pool sizes must lie in [max(3, base_styles), candidate_styles]");
  }
}

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) fail(ErrorKind::InvalidConfig, where + " must be an object");
  std::set<std::string> known(keys.begin(), keys.end());
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) fail(ErrorKind::InvalidConfig, "unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json sgd_json(const SgdConfig& s) {
  return {{"learning_rate", s.learning_rate},
          {"clip_norm", s.clip_norm ? json(*s.clip_norm) : json(nullptr)}};
}

void read_sgd(const json& j, const std::string& where, SgdConfig& s) {
  check_keys(j, where, {"learning_rate", "clip_norm"});
  read(j, "learning_rate", s.learning_rate);
  if (j.contains("clip_norm")) {
    if (j["clip_norm"].is_null()) s.clip_norm.reset();
    else s.clip_norm = j["clip_norm"].get<double>();
  }
}

std::vector<StyleFamilyMember> read_family(const json& j, const std::string& where) {
  if (!j.is_array()) fail(ErrorKind::InvalidConfig, where + " must be an array");
  std::vector<StyleFamilyMember> out;
  for (const auto& m : j) {
    check_keys(m, where, {"name", "shared_fraction"});
    out.push_back({m.at("name").get<std::string>(), m.value("shared_fraction", 1.0)});
  }
  return out;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text, const std::string& preset) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, std::string("config: ") + e.what());
  }
  try {
    check_keys(j, "config", {"preset", "seed", "manifest", "synthetic", "split", "vocab_max", "model",
                             "schedule", "semi", "noise", "sos", "controller", "mat",
                             "bleu_smoothing", "sweep"});
    ExperimentConfig c = preset_config(j.value("preset", preset));
    read(j, "seed", c.seed);
    if (j.contains("manifest") && !j["manifest"].is_null()) {
      c.manifest = std::filesystem::path(j["manifest"].get<std::string>());
    }
    if (j.contains("synthetic")) {
      const json& s = j["synthetic"];
      check_keys(s, "synthetic", {"sentences", "rewrite_count", "source_name", "styles"});
      read(s, "sentences", c.synthetic.sentences);
      read(s, "rewrite_count", c.synthetic.rewrite_count);
      read(s, "source_name", c.synthetic.source_name);
      if (s.contains("styles")) c.synthetic.styles = read_family(s["styles"], "synthetic.styles[]");
    }
    if (j.contains("split")) {
      const json& s = j["split"];
      check_keys(s, "split", {"train", "dev", "test", "unlabeled"});
      read(s, "train", c.split.train);
      read(s, "dev", c.split.dev);
      read(s, "test", c.split.test);
      read(s, "unlabeled", c.split.unlabeled);
    }
    read(j, "vocab_max", c.vocab_max);
    if (j.contains("model")) {
      const json& m = j["model"];
      check_keys(m, "model", {"embed", "hidden", "layers", "dropout"});
      read(m, "embed", c.model.embed);
      read(m, "hidden", c.model.hidden);
      read(m, "layers", c.model.layers);
      read(m, "dropout", c.model.dropout);
    }
    if (j.contains("schedule")) {
      const json& s = j["schedule"];
      check_keys(s, "schedule", {"epochs", "batch_size", "sgd", "patience", "max_len", "eval_batch",
                                 "per_sentence_loss"});
      read(s, "epochs", c.schedule.epochs);
      read(s, "batch_size", c.schedule.batch_size);
      if (s.contains("sgd")) read_sgd(s["sgd"], "schedule.sgd", c.schedule.sgd);
      read(s, "patience", c.schedule.patience);
      read(s, "max_len", c.schedule.max_len);
      read(s, "eval_batch", c.schedule.eval_batch);
      read(s, "per_sentence_loss", c.schedule.per_sentence_loss);
    }
    if (j.contains("semi")) {
      const json& s = j["semi"];
      check_keys(s, "semi", {"epochs", "route_probs", "share_enc_j"});
      read(s, "epochs", c.semi_epochs);
      if (s.contains("route_probs")) {
        const auto v = s["route_probs"].get<std::vector<double>>();
        if (v.size() != 3) fail(ErrorKind::InvalidConfig, "route_probs needs three entries");
        c.route_probs = {v[0], v[1], v[2]};
      }
      read(s, "share_enc_j", c.share_enc_j);
    }
    if (j.contains("noise")) {
      const json& s = j["noise"];
      check_keys(s, "noise", {"drop_prob", "shuffle_window", "seed"});
      read(s, "drop_prob", c.noise.drop_prob);
      read(s, "shuffle_window", c.noise.shuffle_window);
      read(s, "seed", c.noise.seed);
    }
    if (j.contains("sos")) {
      const json& s = j["sos"];
      check_keys(s, "sos", {"alpha", "k", "classifier"});
      read(s, "alpha", c.alpha);
      read(s, "k", c.k);
      if (s.contains("classifier")) {
        const json& cl = s["classifier"];
        check_keys(cl, "sos.classifier", {"embed", "hidden", "dropout", "epochs", "batch_size", "sgd"});
        read(cl, "embed", c.classifier.embed);
        read(cl, "hidden", c.classifier.hidden);
        read(cl, "dropout", c.classifier.dropout);
        read(cl, "epochs", c.classifier.epochs);
        read(cl, "batch_size", c.classifier.batch_size);
        if (cl.contains("sgd")) read_sgd(cl["sgd"], "sos.classifier.sgd", c.classifier.sgd);
      }
    }
    if (j.contains("controller")) {
      const json& s = j["controller"];
      check_keys(s, "controller", {"embed", "hidden"});
      read(s, "embed", c.controller.embed);
      read(s, "hidden", c.controller.hidden);
    }
    if (j.contains("mat")) {
      const json& s = j["mat"];
      check_keys(s, "mat", {"epochs", "batch_size", "sgd", "patience", "max_len", "eval_batch"});
      read(s, "epochs", c.mat.epochs);
      read(s, "batch_size", c.mat.batch_size);
      if (s.contains("sgd")) read_sgd(s["sgd"], "mat.sgd", c.mat.sgd);
      read(s, "patience", c.mat.patience);
      read(s, "max_len", c.mat.max_len);
      read(s, "eval_batch", c.mat.eval_batch);
    }
    read(j, "bleu_smoothing", c.bleu_smoothing);
    if (j.contains("sweep")) {
      const json& s = j["sweep"];
      check_keys(s, "sweep", {"candidate_styles", "candidate_sizes", "base_styles", "labeled_sizes"});
      if (s.contains("candidate_styles")) {
        c.sweep.candidate_styles = read_family(s["candidate_styles"], "sweep.candidate_styles[]");
      }
      read(s, "candidate_sizes", c.sweep.candidate_sizes);
      read(s, "base_styles", c.sweep.base_styles);
      read(s, "labeled_sizes", c.sweep.labeled_sizes);
    }
    validate(c);
    return c;
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidConfig, std::string("config: ") + e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::string& preset) {
  return parse_config(read_file(path), preset);
}

std::string config_to_json(const ExperimentConfig& c) {
  auto family = [](const std::vector<StyleFamilyMember>& members) {
    json out = json::array();
    for (const auto& s : members) out.push_back({{"name", s.name}, {"shared_fraction", s.shared_fraction}});
    return out;
  };
  const json styles = family(c.synthetic.styles);
  json j = {
      {"preset", c.preset},
      {"seed", c.seed},
      {"manifest", c.manifest ? json(c.manifest->string()) : json(nullptr)},
      {"synthetic",
       {{"sentences", c.synthetic.sentences},
        {"rewrite_count", c.synthetic.rewrite_count},
        {"source_name", c.synthetic.source_name},
        {"styles", styles}}},
      {"split",
       {{"train", c.split.train}, {"dev", c.split.dev}, {"test", c.split.test},
        {"unlabeled", c.split.unlabeled}}},
      {"vocab_max", c.vocab_max},
      {"model",
       {{"embed", c.model.embed}, {"hidden", c.model.hidden}, {"layers", c.model.layers},
        {"dropout", c.model.dropout}}},
      {"schedule",
       {{"epochs", c.schedule.epochs},
        {"batch_size", c.schedule.batch_size},
        {"sgd", sgd_json(c.schedule.sgd)},
        {"patience", c.schedule.patience},
        {"max_len", c.schedule.max_len},
        {"eval_batch", c.schedule.eval_batch},
        {"per_sentence_loss", c.schedule.per_sentence_loss}}},
      {"semi",
       {{"epochs", c.semi_epochs},
        {"route_probs", std::vector<double>(c.route_probs.begin(), c.route_probs.end())},
        {"share_enc_j", c.share_enc_j}}},
      {"noise",
       {{"drop_prob", c.noise.drop_prob},
        {"shuffle_window", c.noise.shuffle_window},
        {"seed", c.noise.seed}}},
      {"sos",
       {{"alpha", c.alpha},
        {"k", c.k},
        {"classifier",
         {{"embed", c.classifier.embed},
          {"hidden", c.classifier.hidden},
          {"dropout", c.classifier.dropout},
          {"epochs", c.classifier.epochs},
          {"batch_size", c.classifier.batch_size},
          {"sgd", sgd_json(c.classifier.sgd)}}}}},
      {"controller", {{"embed", c.controller.embed}, {"hidden", c.controller.hidden}}},
      {"mat",
       {{"epochs", c.mat.epochs},
        {"batch_size", c.mat.batch_size},
        {"sgd", sgd_json(c.mat.sgd)},
        {"patience", c.mat.patience},
        {"max_len", c.mat.max_len},
        {"eval_batch", c.mat.eval_batch}}},
      {"bleu_smoothing", c.bleu_smoothing},
      {"sweep",
       {{"candidate_styles", family(c.sweep.candidate_styles)},
        {"candidate_sizes", c.sweep.candidate_sizes},
        {"base_styles", c.sweep.base_styles},
        {"labeled_sizes", c.sweep.labeled_sizes}}},
  };
  return j.dump(2) + "\n";
}

}  // namespace mast
