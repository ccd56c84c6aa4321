#include "mast/corpus.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace mast {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::LineCountMismatch: return "LineCountMismatch";
    case ErrorKind::EmptyFile: return "EmptyFile";
    case ErrorKind::FileNotFound: return "FileNotFound";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::InvalidId: return "InvalidId";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::NonScalarLoss: return "NonScalarLoss";
    case ErrorKind::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorKind::EmptyClass: return "EmptyClass";
    case ErrorKind::RowTooSmall: return "RowTooSmall";
    case ErrorKind::KTooLarge: return "KTooLarge";
    case ErrorKind::VocabMismatch: return "VocabMismatch";
    case ErrorKind::DigestMismatch: return "DigestMismatch";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::EmptyReference: return "EmptyReference";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::ParseError: return "ParseError";
  }
  return "Unknown";
}

int ParallelCorpus::style_index(std::string_view name) const {
  for (const auto& s : styles) {
    if (s.name == name) return s.index;
  }
  return -1;
}

Sentence tokenize(std::string_view line) {
  Sentence out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join(const Sentence& sentence) {
  std::string out;
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    if (i) out += ' ';
    out += sentence[i];
  }
  return out;
}

std::vector<std::pair<std::string, std::filesystem::path>> read_manifest(
    const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) fail(ErrorKind::FileNotFound, "cannot open manifest " + manifest.string());
  std::vector<std::pair<std::string, std::filesystem::path>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      fail(ErrorKind::ParseError,
           manifest.string() + ":" + std::to_string(lineno) + ": expected name<TAB>path");
    }
    std::filesystem::path path = line.substr(tab + 1);
    if (path.is_relative()) path = manifest.parent_path() / path;
    out.emplace_back(line.substr(0, tab), path);
  }
  return out;
}

ParallelCorpus ingest_aligned(
    const std::vector<std::pair<std::string, std::filesystem::path>>& manifest) {
  ParallelCorpus corpus;
  std::set<std::string> seen;
  for (const auto& [name, path] : manifest) {
    if (!seen.insert(name).second) {
      fail(ErrorKind::ParseError, "duplicate style name '" + name + "'");
    }
    std::ifstream in(path);
    if (!in) fail(ErrorKind::FileNotFound, "cannot open " + path.string());
    std::vector<Sentence> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(tokenize(line));
    if (lines.empty()) fail(ErrorKind::EmptyFile, path.string() + " is empty");
    if (!corpus.sentences.empty() && lines.size() != corpus.sentences.front().size()) {
      fail(ErrorKind::LineCountMismatch,
           path.string() + " has " + std::to_string(lines.size()) + " lines, expected " +
               std::to_string(corpus.sentences.front().size()));
    }
    corpus.styles.push_back({static_cast<int>(corpus.styles.size()), name});
    corpus.sentences.push_back(std::move(lines));
  }
  return corpus;
}

void write_corpus(const ParallelCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.tsv");
  for (std::size_t s = 0; s < corpus.num_styles(); ++s) {
    const std::string file = corpus.styles[s].name + ".txt";
    manifest << corpus.styles[s].name << '\t' << file << '\n';
    std::ofstream out(dir / file);
    for (const auto& sent : corpus.sentences[s]) out << join(sent) << '\n';
  }
}

DataSplit make_splits(const ParallelCorpus& corpus, SplitSizes sizes, std::uint64_t seed) {
  const std::size_t n = corpus.num_sentences();
  const std::size_t labeled = sizes.train + sizes.dev + sizes.test;
  if (labeled + sizes.unlabeled > n) {
    fail(ErrorKind::InsufficientData,
         "requested " + std::to_string(labeled + sizes.unlabeled) + " sentences, corpus has " +
             std::to_string(n));
  }
  DataSplit split;
  split.seed = seed;
  for (const auto& s : corpus.styles) split.style_names.push_back(s.name);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = make_rng(seed, "split");
  shuffle_range(order.begin(), order.end(), rng);

  auto take = [&](std::size_t from, std::size_t count) {
    std::vector<std::size_t> out(order.begin() + static_cast<std::ptrdiff_t>(from),
                                 order.begin() + static_cast<std::ptrdiff_t>(from + count));
    std::sort(out.begin(), out.end());
    return out;
  };
  split.labeled_train = take(0, sizes.train);
  split.dev = take(sizes.train, sizes.dev);
  split.test = take(sizes.train + sizes.dev, sizes.test);

  const std::vector<std::size_t> pool(order.begin() + static_cast<std::ptrdiff_t>(labeled),
                                      order.end());
  for (const auto& style : corpus.styles) {
    std::vector<std::size_t> draw = pool;
    Rng style_rng = make_rng(seed, "unlabeled/" + style.name);
    // Partial Fisher-Yates: the first `unlabeled` entries are a uniform sample.
    for (std::size_t i = 0; i < sizes.unlabeled; ++i) {
      std::swap(draw[i], draw[i + uniform_index(style_rng, draw.size() - i)]);
    }
    draw.resize(sizes.unlabeled);
    std::sort(draw.begin(), draw.end());
    split.unlabeled.push_back(std::move(draw));
  }
  return split;
}

namespace {

void write_list(std::ostringstream& out, const std::string& key,
                const std::vector<std::size_t>& values) {
  out << key << ' ' << values.size();
  for (auto v : values) out << ' ' << v;
  out << '\n';
}

std::vector<std::size_t> read_list(std::istringstream& in, const std::string& key) {
  std::string word;
  std::size_t count = 0;
  if (!(in >> word) || word != key || !(in >> count)) {
    fail(ErrorKind::ParseError, "split file: expected '" + key + "'");
  }
  std::vector<std::size_t> values(count);
  for (auto& v : values) {
    if (!(in >> v)) fail(ErrorKind::ParseError, "split file: truncated list '" + key + "'");
  }
  return values;
}

}  // namespace

std::string serialize_split(const DataSplit& split) {
  std::ostringstream out;
  out << "mast-split 1\n";
  out << "seed " << split.seed << '\n';
  out << "styles " << split.style_names.size();
  for (const auto& s : split.style_names) out << ' ' << s;
  out << '\n';
  write_list(out, "labeled_train", split.labeled_train);
  write_list(out, "dev", split.dev);
  write_list(out, "test", split.test);
  for (std::size_t s = 0; s < split.unlabeled.size(); ++s) {
    write_list(out, "unlabeled", split.unlabeled[s]);
  }
  return out.str();
}

DataSplit parse_split(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string word;
  int version = 0;
  if (!(in >> word >> version) || word != "mast-split" || version != 1) {
    fail(ErrorKind::ParseError, "split file: bad header");
  }
  DataSplit split;
  if (!(in >> word >> split.seed) || word != "seed") {
    fail(ErrorKind::ParseError, "split file: expected seed");
  }
  std::size_t n = 0;
  if (!(in >> word >> n) || word != "styles") {
    fail(ErrorKind::ParseError, "split file: expected styles");
  }
  split.style_names.resize(n);
  for (auto& s : split.style_names) in >> s;
  split.labeled_train = read_list(in, "labeled_train");
  split.dev = read_list(in, "dev");
  split.test = read_list(in, "test");
  for (std::size_t s = 0; s < n; ++s) split.unlabeled.push_back(read_list(in, "unlabeled"));
  return split;
}

void validate(const NoiseConfig& cfg) {
  if (!(cfg.drop_prob >= 0.0 && cfg.drop_prob < 1.0)) {
    fail(ErrorKind::InvalidConfig, "noise drop_prob must lie in [0, 1)");
  }
}

}  // namespace mast
