#pragma once

// Line-oriented reader shared by the checkpoint formats.

#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mast/corpus.hpp"
#include "mast/error.hpp"

namespace mast::detail {

class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}

  bool done() const { return pos_ >= text_.size(); }

  std::string_view line() {
    if (done()) fail(ErrorKind::ParseError, "checkpoint: unexpected end of input");
    const auto nl = text_.find('\n', pos_);
    const auto end = nl == std::string_view::npos ? text_.size() : nl;
    std::string_view out = text_.substr(pos_, end - pos_);
    pos_ = end + 1;
    return out;
  }

  /// Reads a line `key v1 v2 ...` and returns the values.
  std::vector<std::string> keyed(std::string_view key) {
    const std::string_view l = line();
    Sentence parts = tokenize(l);
    if (parts.empty() || parts[0] != key) {
      fail(ErrorKind::ParseError, "checkpoint: expected '" + std::string(key) + "', got '" +
                                      std::string(l) + "'");
    }
    parts.erase(parts.begin());
    return parts;
  }

  std::string_view take(std::size_t n) {
    if (n > text_.size() - std::min(pos_, text_.size())) {
      fail(ErrorKind::ParseError, "checkpoint: truncated block");
    }
    std::string_view out = text_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::string_view rest() const { return done() ? std::string_view{} : text_.substr(pos_); }

  Vocabulary vocab(std::string_view key) {
    const auto v = keyed(key);
    if (v.size() != 1) fail(ErrorKind::ParseError, "checkpoint: bad vocabulary header");
    const std::size_t n = std::stoul(v[0]);
    std::vector<std::string> tokens;
    tokens.reserve(n);
    for (std::size_t i = 0; i < n; ++i) tokens.emplace_back(line());
    return Vocabulary::from_tokens(std::move(tokens));
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

inline std::string hex_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", x);
  return buf;
}

inline double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') fail(ErrorKind::ParseError, "bad number '" + s + "'");
  return v;
}

}  // namespace mast::detail
