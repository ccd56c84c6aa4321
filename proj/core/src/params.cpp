#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>

#include "mast/numerics.hpp"

namespace mast {

LstmParams::LstmParams(const std::string& prefix, Eigen::Index input, Eigen::Index hidden)
    : wx(prefix + ".wx", input, 4 * hidden),
      wh(prefix + ".wh", hidden, 4 * hidden),
      bias(prefix + ".bias", 1, 4 * hidden) {}

void init_uniform(Parameter& p, Rng& rng, double scale) {
  for (Eigen::Index i = 0; i < p.value.size(); ++i) {
    p.value.data()[i] = (2.0 * uniform01(rng) - 1.0) * scale;
  }
  p.grad = Mat::Zero(p.value.rows(), p.value.cols());
}

void init_lstm(LstmParams& p, Rng& rng, double scale) {
  init_uniform(p.wx, rng, scale);
  init_uniform(p.wh, rng, scale);
  const Eigen::Index h = p.hidden();
  p.bias.value.setZero();
  p.bias.value.middleCols(h, h).setConstant(1.0);
  p.bias.grad = Mat::Zero(1, 4 * h);
}

double global_grad_norm(std::span<Parameter* const> params) {
  double sq = 0.0;
  for (const Parameter* p : params) {
    if (p->grad.size()) sq += p->grad.squaredNorm();
  }
  return std::sqrt(sq);
}

double sgd_step(std::span<Parameter* const> params, const SgdConfig& cfg) {
  if (!(cfg.learning_rate >= 0.0)) fail(ErrorKind::InvalidConfig, "learning rate must be >= 0");
  for (const Parameter* p : params) {
    if (p->grad.size() && (p->grad.rows() != p->value.rows() || p->grad.cols() != p->value.cols())) {
      fail(ErrorKind::ShapeMismatch, "sgd_step: gradient shape differs for " + p->name);
    }
  }
  const double norm = global_grad_norm(params);
  double factor = cfg.learning_rate;
  if (cfg.clip_norm && norm > *cfg.clip_norm) factor *= *cfg.clip_norm / norm;
  for (Parameter* p : params) {
    if (p->grad.size()) p->value -= factor * p->grad;
  }
  return norm;
}

void zero_grads(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->grad = Mat::Zero(p->value.rows(), p->value.cols());
}

namespace {

std::string hex(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", x);
  return buf;
}

}  // namespace

std::string serialize_params(std::span<const Parameter* const> params) {
  std::vector<const Parameter*> sorted(params.begin(), params.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const Parameter* a, const Parameter* b) { return a->name < b->name; });
  std::string out = "mast-params 1\n" + std::to_string(sorted.size()) + "\n";
  for (const Parameter* p : sorted) {
    out += p->name + ' ' + std::to_string(p->value.rows()) + ' ' +
           std::to_string(p->value.cols()) + '\n';
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      if (i) out += ' ';
      out += hex(p->value.data()[i]);
    }
    out += '\n';
  }
  return out;
}

std::vector<Parameter> parse_params(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string word;
  int version = 0;
  std::size_t count = 0;
  if (!(in >> word >> version) || word != "mast-params" || version != 1 || !(in >> count)) {
    fail(ErrorKind::ParseError, "parameter block: bad header");
  }
  std::vector<Parameter> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    Parameter p;
    Eigen::Index rows = 0, cols = 0;
    if (!(in >> p.name >> rows >> cols) || rows < 0 || cols < 0) {
      fail(ErrorKind::ParseError, "parameter block: bad record header");
    }
    p.value.resize(rows, cols);
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      if (!(in >> word)) fail(ErrorKind::ParseError, "parameter block: truncated " + p.name);
      char* end = nullptr;
      p.value.data()[i] = std::strtod(word.c_str(), &end);
      if (end == word.c_str() || *end != '\0') {
        fail(ErrorKind::ParseError, "parameter block: bad number in " + p.name);
      }
    }
    p.grad = Mat::Zero(rows, cols);
    out.push_back(std::move(p));
  }
  return out;
}

void load_params(std::string_view text, std::span<Parameter* const> params) {
  std::map<std::string, Parameter> parsed;
  for (auto& p : parse_params(text)) parsed.emplace(p.name, std::move(p));
  if (parsed.size() != params.size()) {
    fail(ErrorKind::ShapeMismatch, "parameter block has " + std::to_string(parsed.size()) +
                                       " records, model expects " + std::to_string(params.size()));
  }
  for (Parameter* p : params) {
    auto it = parsed.find(p->name);
    if (it == parsed.end()) fail(ErrorKind::ShapeMismatch, "parameter " + p->name + " missing");
    if (it->second.value.rows() != p->value.rows() || it->second.value.cols() != p->value.cols()) {
      fail(ErrorKind::ShapeMismatch, "parameter " + p->name + " has the wrong shape");
    }
    p->value = std::move(it->second.value);
    p->grad = Mat::Zero(p->value.rows(), p->value.cols());
  }
}

}  // namespace mast
