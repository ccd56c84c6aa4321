#include <cmath>
#include <string>

#include "mast/numerics.hpp"

namespace mast {

namespace {

std::string shape_str(const Mat& m) {
  return "[" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + "]";
}

void require_same_shape(const Mat& a, const Mat& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorKind::ShapeMismatch,
         std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b) + " differ");
  }
}

Mat logistic(const Mat& x) { return (1.0 + (-x.array()).exp()).inverse().matrix(); }

// tanh through the vectorized exp; the scalar std::tanh dominated LSTM steps.
Mat fast_tanh(const Mat& x) {
  return (2.0 * (1.0 + (-2.0 * x.array()).exp()).inverse() - 1.0).matrix();
}

}  // namespace

Var Graph::push(Mat value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = record_ && requires_grad;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size() - 1)};
}

Graph::Node& Graph::node(Var v) {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    fail(ErrorKind::IndexOutOfRange, "invalid graph variable");
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

const Graph::Node& Graph::node(Var v) const {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    fail(ErrorKind::IndexOutOfRange, "invalid graph variable");
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

Mat& Graph::grad(Var v) {
  Node& n = node(v);
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.val().rows(), n.val().cols());
  return n.grad;
}

void Graph::set_backward(Var out, std::function<void(Graph&)> fn) {
  Node& n = node(out);
  if (n.requires_grad) n.backward = std::move(fn);
}

Var Graph::constant(Mat value) { return push(std::move(value), false); }

Var Graph::param(const Parameter& p) {
  if (!record_) return frozen(p);
  auto it = bound_.find(&p);
  if (it != bound_.end()) return Var{it->second};
  Node n;
  n.external = &p.value;
  n.requires_grad = true;
  n.is_param = true;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size() - 1);
  bound_.emplace(&p, id);
  return Var{id};
}

Var Graph::frozen(const Parameter& p) {
  auto it = bound_frozen_.find(&p);
  if (it != bound_frozen_.end()) return Var{it->second};
  Node n;
  n.external = &p.value;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size() - 1);
  bound_frozen_.emplace(&p, id);
  return Var{id};
}

const Mat& Graph::value(Var v) const { return node(v).val(); }

double Graph::scalar(Var v) const {
  const Mat& m = value(v);
  if (m.size() != 1) fail(ErrorKind::NonScalarLoss, "value is not a scalar");
  return m(0, 0);
}

Var Graph::matmul(Var a, Var b) {
  const Mat& av = value(a);
  const Mat& bv = value(b);
  if (av.cols() != bv.rows()) {
    fail(ErrorKind::ShapeMismatch, "matmul: " + shape_str(av) + " x " + shape_str(bv));
  }
  Var out = push(av * bv, needs(a) || needs(b));
  set_backward(out, [a, b, out](Graph& g) {
    const Mat& go = g.grad(out);
    if (g.needs(a)) g.grad(a).noalias() += go * g.value(b).transpose();
    if (g.needs(b)) g.grad(b).noalias() += g.value(a).transpose() * go;
  });
  return out;
}

Var Graph::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "add");
  Var out = push(value(a) + value(b), needs(a) || needs(b));
  set_backward(out, [a, b, out](Graph& g) {
    if (g.needs(a)) g.grad(a) += g.grad(out);
    if (g.needs(b)) g.grad(b) += g.grad(out);
  });
  return out;
}

Var Graph::sub(Var a, Var b) {
  require_same_shape(value(a), value(b), "sub");
  Var out = push(value(a) - value(b), needs(a) || needs(b));
  set_backward(out, [a, b, out](Graph& g) {
    if (g.needs(a)) g.grad(a) += g.grad(out);
    if (g.needs(b)) g.grad(b) -= g.grad(out);
  });
  return out;
}

Var Graph::add_row(Var a, Var row) {
  const Mat& av = value(a);
  const Mat& rv = value(row);
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    fail(ErrorKind::ShapeMismatch, "add_row: " + shape_str(av) + " + " + shape_str(rv));
  }
  Mat v = av;
  v.rowwise() += rv.row(0);
  Var out = push(std::move(v), needs(a) || needs(row));
  set_backward(out, [a, row, out](Graph& g) {
    const Mat& go = g.grad(out);
    if (g.needs(a)) g.grad(a) += go;
    if (g.needs(row)) g.grad(row) += go.colwise().sum();
  });
  return out;
}

Var Graph::affine(Var x, Var w, Var bias) {
  const Mat& xv = value(x);
  const Mat& wv = value(w);
  const Mat& bv = value(bias);
  if (xv.cols() != wv.rows() || bv.rows() != 1 || bv.cols() != wv.cols()) {
    fail(ErrorKind::ShapeMismatch,
         "affine: x" + shape_str(xv) + " W" + shape_str(wv) + " b" + shape_str(bv));
  }
  Mat v = xv * wv;
  v.rowwise() += bv.row(0);
  Var out = push(std::move(v), needs(x) || needs(w) || needs(bias));
  set_backward(out, [x, w, bias, out](Graph& g) {
    const Mat& go = g.grad(out);
    if (g.needs(x)) g.grad(x).noalias() += go * g.value(w).transpose();
    if (g.needs(w)) g.grad(w).noalias() += g.value(x).transpose() * go;
    if (g.needs(bias)) g.grad(bias) += go.colwise().sum();
  });
  return out;
}

Var Graph::mul(Var a, Var b) {
  require_same_shape(value(a), value(b), "mul");
  Var out = push(value(a).cwiseProduct(value(b)), needs(a) || needs(b));
  set_backward(out, [a, b, out](Graph& g) {
    const Mat& go = g.grad(out);
    if (g.needs(a)) g.grad(a) += go.cwiseProduct(g.value(b));
    if (g.needs(b)) g.grad(b) += go.cwiseProduct(g.value(a));
  });
  return out;
}

Var Graph::scale(Var a, double s) {
  Var out = push(value(a) * s, needs(a));
  set_backward(out, [a, s, out](Graph& g) { g.grad(a) += g.grad(out) * s; });
  return out;
}

Var Graph::add_constant(Var a, const Mat& c) {
  require_same_shape(value(a), c, "add_constant");
  Var out = push(value(a) + c, needs(a));
  set_backward(out, [a, out](Graph& g) { g.grad(a) += g.grad(out); });
  return out;
}

Var Graph::sigmoid(Var a) {
  Var out = push(logistic(value(a)), needs(a));
  set_backward(out, [a, out](Graph& g) {
    const Mat& y = g.value(out);
    g.grad(a).array() += g.grad(out).array() * y.array() * (1.0 - y.array());
  });
  return out;
}

Var Graph::tanh(Var a) {
  Var out = push(fast_tanh(value(a)), needs(a));
  set_backward(out, [a, out](Graph& g) {
    const Mat& y = g.value(out);
    g.grad(a).array() += g.grad(out).array() * (1.0 - y.array().square());
  });
  return out;
}

Var Graph::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) fail(ErrorKind::ShapeMismatch, "concat_cols: no inputs");
  const Eigen::Index rows = value(parts[0]).rows();
  Eigen::Index cols = 0;
  bool req = false;
  for (Var p : parts) {
    if (value(p).rows() != rows) fail(ErrorKind::ShapeMismatch, "concat_cols: row mismatch");
    cols += value(p).cols();
    req = req || needs(p);
  }
  Mat v(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    v.middleCols(at, value(p).cols()) = value(p);
    at += value(p).cols();
  }
  Var out = push(std::move(v), req);
  std::vector<Var> inputs(parts.begin(), parts.end());
  set_backward(out, [inputs, out](Graph& g) {
    Eigen::Index at = 0;
    for (Var p : inputs) {
      const Eigen::Index c = g.value(p).cols();
      if (g.needs(p)) g.grad(p) += g.grad(out).middleCols(at, c);
      at += c;
    }
  });
  return out;
}

Var Graph::slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  const Mat& av = value(a);
  if (start < 0 || count < 0 || start + count > av.cols()) {
    fail(ErrorKind::ShapeMismatch, "slice_cols out of range on " + shape_str(av));
  }
  Var out = push(av.middleCols(start, count), needs(a));
  set_backward(out, [a, start, count, out](Graph& g) {
    g.grad(a).middleCols(start, count) += g.grad(out);
  });
  return out;
}

Var Graph::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) fail(ErrorKind::ShapeMismatch, "concat_rows: no inputs");
  const Eigen::Index cols = value(parts[0]).cols();
  Eigen::Index rows = 0;
  bool req = false;
  for (Var p : parts) {
    if (value(p).cols() != cols) fail(ErrorKind::ShapeMismatch, "concat_rows: column mismatch");
    rows += value(p).rows();
    req = req || needs(p);
  }
  Mat v(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    v.middleRows(at, value(p).rows()) = value(p);
    at += value(p).rows();
  }
  Var out = push(std::move(v), req);
  std::vector<Var> inputs(parts.begin(), parts.end());
  set_backward(out, [inputs, out](Graph& g) {
    Eigen::Index at = 0;
    for (Var p : inputs) {
      const Eigen::Index r = g.value(p).rows();
      if (g.needs(p)) g.grad(p) += g.grad(out).middleRows(at, r);
      at += r;
    }
  });
  return out;
}

Var Graph::slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  const Mat& av = value(a);
  if (start < 0 || count < 0 || start + count > av.rows()) {
    fail(ErrorKind::ShapeMismatch, "slice_rows out of range on " + shape_str(av));
  }
  Var out = push(av.middleRows(start, count), needs(a));
  set_backward(out, [a, start, count, out](Graph& g) {
    g.grad(a).middleRows(start, count) += g.grad(out);
  });
  return out;
}

Var Graph::softmax(Var a) {
  const Mat& av = value(a);
  if (av.cols() < 1) fail(ErrorKind::ShapeMismatch, "softmax over empty axis");
  Mat v(av.rows(), av.cols());
  for (Eigen::Index r = 0; r < av.rows(); ++r) {
    const double m = av.row(r).maxCoeff();
    v.row(r) = (av.row(r).array() - m).exp().matrix();
    v.row(r) /= v.row(r).sum();
  }
  Var out = push(std::move(v), needs(a));
  set_backward(out, [a, out](Graph& g) {
    const Mat& y = g.value(out);
    const Mat& go = g.grad(out);
    Mat& ga = g.grad(a);
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double dot = go.row(r).dot(y.row(r));
      ga.row(r).array() += y.row(r).array() * (go.row(r).array() - dot);
    }
  });
  return out;
}

Var Graph::embedding(Var table, std::span<const int> ids) {
  const Mat& tv = value(table);
  Mat v(static_cast<Eigen::Index>(ids.size()), tv.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= tv.rows()) {
      fail(ErrorKind::InvalidId, "embedding id " + std::to_string(ids[i]) +
                                     " outside table of " + std::to_string(tv.rows()) + " rows");
    }
    v.row(static_cast<Eigen::Index>(i)) = tv.row(ids[i]);
  }
  Var out = push(std::move(v), needs(table));
  std::vector<int> idx(ids.begin(), ids.end());
  set_backward(out, [table, idx = std::move(idx), out](Graph& g) {
    const Mat& go = g.grad(out);
    Mat& gt = g.grad(table);
    for (std::size_t i = 0; i < idx.size(); ++i) gt.row(idx[i]) += go.row(static_cast<Eigen::Index>(i));
  });
  return out;
}

Var Graph::dropout(Var a, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) fail(ErrorKind::InvalidConfig, "dropout rate must be in [0,1)");
  if (!training || rate == 0.0) return a;
  const Mat& av = value(a);
  Mat mask(av.rows(), av.cols());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = uniform01(rng) < rate ? 0.0 : keep_scale;
  }
  Var out = push(av.cwiseProduct(mask), needs(a));
  set_backward(out, [a, mask = std::move(mask), out](Graph& g) {
    g.grad(a) += g.grad(out).cwiseProduct(mask);
  });
  return out;
}

Var Graph::lstm_pointwise(Var gates, Var c_prev) {
  const Mat& z = value(gates);
  const Mat& cp = value(c_prev);
  const Eigen::Index h = cp.cols();
  if (z.cols() != 4 * h || z.rows() != cp.rows()) {
    fail(ErrorKind::ShapeMismatch, "lstm: gates " + shape_str(z) + " vs state " + shape_str(cp));
  }
  // Cache activated gates [i f o g] and tanh(c) alongside the output.
  Mat act(z.rows(), 5 * h);
  act.leftCols(3 * h) = logistic(z.leftCols(3 * h));
  act.middleCols(3 * h, h) = fast_tanh(z.rightCols(h));
  Mat v(z.rows(), 2 * h);
  const auto i = act.leftCols(h).array();
  const auto f = act.middleCols(h, h).array();
  const auto o = act.middleCols(2 * h, h).array();
  const auto cand = act.middleCols(3 * h, h).array();
  v.rightCols(h) = (f * cp.array() + i * cand).matrix();
  act.rightCols(h) = fast_tanh(v.rightCols(h));
  v.leftCols(h) = (o * act.rightCols(h).array()).matrix();
  Var out = push(std::move(v), needs(gates) || needs(c_prev));
  set_backward(out, [gates, c_prev, act = std::move(act), h, out](Graph& g) {
    const Mat& go = g.grad(out);
    const auto i = act.leftCols(h).array();
    const auto f = act.middleCols(h, h).array();
    const auto o = act.middleCols(2 * h, h).array();
    const auto cand = act.middleCols(3 * h, h).array();
    const auto tc = act.rightCols(h).array();
    const auto dh = go.leftCols(h).array();
    const Eigen::ArrayXXd dc = go.rightCols(h).array() + dh * o * (1.0 - tc.square());
    if (g.needs(gates)) {
      Mat& gz = g.grad(gates);
      gz.leftCols(h).array() += dc * cand * i * (1.0 - i);
      gz.middleCols(h, h).array() += dc * g.value(c_prev).array() * f * (1.0 - f);
      gz.middleCols(2 * h, h).array() += dh * tc * o * (1.0 - o);
      gz.rightCols(h).array() += dc * i * (1.0 - cand.square());
    }
    if (g.needs(c_prev)) g.grad(c_prev).array() += dc * f;
  });
  return out;
}

Var Graph::rowdot(Var a, Var b) {
  require_same_shape(value(a), value(b), "rowdot");
  Mat v = value(a).cwiseProduct(value(b)).rowwise().sum();
  Var out = push(std::move(v), needs(a) || needs(b));
  set_backward(out, [a, b, out](Graph& g) {
    const Mat& go = g.grad(out);
    if (g.needs(a)) g.grad(a) += (g.value(b).array().colwise() * go.col(0).array()).matrix();
    if (g.needs(b)) g.grad(b) += (g.value(a).array().colwise() * go.col(0).array()).matrix();
  });
  return out;
}

Var Graph::scale_rows(Var m, Var col) {
  const Mat& mv = value(m);
  const Mat& cv = value(col);
  if (cv.cols() != 1 || cv.rows() != mv.rows()) {
    fail(ErrorKind::ShapeMismatch, "scale_rows: " + shape_str(mv) + " by " + shape_str(cv));
  }
  Mat v = (mv.array().colwise() * cv.col(0).array()).matrix();
  Var out = push(std::move(v), needs(m) || needs(col));
  set_backward(out, [m, col, out](Graph& g) {
    const Mat& go = g.grad(out);
    if (g.needs(m)) g.grad(m) += (go.array().colwise() * g.value(col).col(0).array()).matrix();
    if (g.needs(col)) g.grad(col) += go.cwiseProduct(g.value(m)).rowwise().sum();
  });
  return out;
}

Var Graph::blend(Var fresh, Var old, const Mat& mask) {
  require_same_shape(value(fresh), value(old), "blend");
  if (mask.cols() != 1 || mask.rows() != value(fresh).rows()) {
    fail(ErrorKind::ShapeMismatch, "blend: mask must be a column");
  }
  Mat v = value(fresh);
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    if (mask(r, 0) == 0.0) v.row(r) = value(old).row(r);
  }
  Var out = push(std::move(v), needs(fresh) || needs(old));
  set_backward(out, [fresh, old, mask, out](Graph& g) {
    const Mat& go = g.grad(out);
    for (Eigen::Index r = 0; r < go.rows(); ++r) {
      if (mask(r, 0) != 0.0) {
        if (g.needs(fresh)) g.grad(fresh).row(r) += go.row(r);
      } else if (g.needs(old)) {
        g.grad(old).row(r) += go.row(r);
      }
    }
  });
  return out;
}

Var Graph::attention(Var query, std::span<const Var> keys, std::span<const Var> values,
                     const Mat& score_mask) {
  const Mat& q = value(query);
  const auto steps = static_cast<Eigen::Index>(keys.size());
  if (steps == 0 || keys.size() != values.size()) {
    fail(ErrorKind::ShapeMismatch, "attention: keys/values must be non-empty and paired");
  }
  if (score_mask.rows() != q.rows() || score_mask.cols() != steps) {
    fail(ErrorKind::ShapeMismatch, "attention: mask " + shape_str(score_mask));
  }
  const Eigen::Index dv = value(values[0]).cols();
  Mat scores(q.rows(), steps);
  bool req = needs(query);
  for (Eigen::Index t = 0; t < steps; ++t) {
    const Mat& k = value(keys[static_cast<std::size_t>(t)]);
    require_same_shape(q, k, "attention key");
    if (value(values[static_cast<std::size_t>(t)]).cols() != dv) {
      fail(ErrorKind::ShapeMismatch, "attention: ragged values");
    }
    scores.col(t) = q.cwiseProduct(k).rowwise().sum();
    req = req || needs(keys[static_cast<std::size_t>(t)]) || needs(values[static_cast<std::size_t>(t)]);
  }
  scores += score_mask;
  Mat v(q.rows(), dv + steps);
  for (Eigen::Index r = 0; r < q.rows(); ++r) {
    const double m = scores.row(r).maxCoeff();
    auto w = v.row(r).tail(steps);
    w = (scores.row(r).array() - m).exp().matrix();
    w /= w.sum();
  }
  v.leftCols(dv).setZero();
  for (Eigen::Index t = 0; t < steps; ++t) {
    v.leftCols(dv) += (value(values[static_cast<std::size_t>(t)]).array().colwise() *
                       v.col(dv + t).array())
                          .matrix();
  }
  Var out = push(std::move(v), req);
  std::vector<Var> ks(keys.begin(), keys.end());
  std::vector<Var> vs(values.begin(), values.end());
  set_backward(out, [query, ks, vs, dv, steps, out](Graph& g) {
    const Mat& y = g.value(out);
    const Mat& go = g.grad(out);
    const auto weights = y.rightCols(steps);
    const auto dctx = go.leftCols(dv);
    Mat dw = go.rightCols(steps);
    for (Eigen::Index t = 0; t < steps; ++t) {
      const Var vt = vs[static_cast<std::size_t>(t)];
      dw.col(t) += dctx.cwiseProduct(g.value(vt)).rowwise().sum();
      if (g.needs(vt)) g.grad(vt) += (dctx.array().colwise() * weights.col(t).array()).matrix();
    }
    Mat ds(dw.rows(), steps);
    for (Eigen::Index r = 0; r < dw.rows(); ++r) {
      const double dot = dw.row(r).dot(weights.row(r));
      ds.row(r) = (weights.row(r).array() * (dw.row(r).array() - dot)).matrix();
    }
    for (Eigen::Index t = 0; t < steps; ++t) {
      const Var kt = ks[static_cast<std::size_t>(t)];
      if (g.needs(query)) g.grad(query) += (g.value(kt).array().colwise() * ds.col(t).array()).matrix();
      if (g.needs(kt)) g.grad(kt) += (g.value(query).array().colwise() * ds.col(t).array()).matrix();
    }
  });
  return out;
}

Var Graph::mix(Var weights, std::span<const Mat> components) {
  const Mat& w = value(weights);
  if (static_cast<std::size_t>(w.cols()) != components.size() || components.empty()) {
    fail(ErrorKind::ShapeMismatch, "mix: weight columns must equal component count");
  }
  const Eigen::Index cols = components[0].cols();
  Mat v = Mat::Zero(w.rows(), cols);
  for (std::size_t j = 0; j < components.size(); ++j) {
    const Mat& c = components[j];
    if (c.rows() != w.rows() || c.cols() != cols) {
      fail(ErrorKind::ShapeMismatch, "mix: component " + std::to_string(j) + " " + shape_str(c));
    }
    v += (c.array().colwise() * w.col(static_cast<Eigen::Index>(j)).array()).matrix();
  }
  Var out = push(std::move(v), needs(weights));
  std::vector<Mat> comps(components.begin(), components.end());
  set_backward(out, [weights, comps = std::move(comps), out](Graph& g) {
    const Mat& go = g.grad(out);
    Mat& gw = g.grad(weights);
    for (std::size_t j = 0; j < comps.size(); ++j) {
      gw.col(static_cast<Eigen::Index>(j)) += go.cwiseProduct(comps[j]).rowwise().sum();
    }
  });
  return out;
}

Var Graph::cross_entropy(Var probs, std::span<const int> targets,
                         std::span<const double> weights) {
  const Mat& p = value(probs);
  if (static_cast<Eigen::Index>(targets.size()) != p.rows() || weights.size() != targets.size()) {
    fail(ErrorKind::ShapeMismatch, "cross_entropy: one target and weight per row required");
  }
  double loss = 0.0;
  for (std::size_t r = 0; r < targets.size(); ++r) {
    if (targets[r] < 0 || targets[r] >= p.cols()) {
      fail(ErrorKind::IndexOutOfRange, "cross_entropy: target " + std::to_string(targets[r]));
    }
    if (weights[r] == 0.0) continue;
    loss -= weights[r] * std::log(std::max(p(static_cast<Eigen::Index>(r), targets[r]),
                                           kProbabilityFloor));
  }
  Var out = push(Mat::Constant(1, 1, loss), needs(probs));
  std::vector<int> tg(targets.begin(), targets.end());
  std::vector<double> wt(weights.begin(), weights.end());
  set_backward(out, [probs, tg = std::move(tg), wt = std::move(wt), out](Graph& g) {
    const double go = g.grad(out)(0, 0);
    const Mat& p = g.value(probs);
    Mat& gp = g.grad(probs);
    for (std::size_t r = 0; r < tg.size(); ++r) {
      const auto row = static_cast<Eigen::Index>(r);
      const double pr = p(row, tg[r]);
      if (wt[r] != 0.0 && pr > kProbabilityFloor) gp(row, tg[r]) -= go * wt[r] / pr;
    }
  });
  return out;
}

Var Graph::softmax_cross_entropy(Var logits, std::span<const int> targets,
                                 std::span<const double> weights) {
  const Mat& z = value(logits);
  if (static_cast<Eigen::Index>(targets.size()) != z.rows() || weights.size() != targets.size()) {
    fail(ErrorKind::ShapeMismatch, "softmax_cross_entropy: one target and weight per row");
  }
  Mat probs(z.rows(), z.cols());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const int t = targets[static_cast<std::size_t>(r)];
    if (t < 0 || t >= z.cols()) {
      fail(ErrorKind::IndexOutOfRange, "softmax_cross_entropy: target " + std::to_string(t));
    }
    const double m = z.row(r).maxCoeff();
    probs.row(r) = (z.row(r).array() - m).exp().matrix();
    const double total = probs.row(r).sum();
    probs.row(r) /= total;
    const double w = weights[static_cast<std::size_t>(r)];
    if (w != 0.0) loss += w * (std::log(total) - (z(r, t) - m));
  }
  Var out = push(Mat::Constant(1, 1, loss), needs(logits));
  std::vector<int> tg(targets.begin(), targets.end());
  std::vector<double> wt(weights.begin(), weights.end());
  set_backward(out, [logits, probs = std::move(probs), tg = std::move(tg), wt = std::move(wt),
                     out](Graph& g) {
    const double go = g.grad(out)(0, 0);
    Mat& gz = g.grad(logits);
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
      const double w = wt[static_cast<std::size_t>(r)];
      if (w == 0.0) continue;
      gz.row(r) += (go * w) * probs.row(r);
      gz(r, tg[static_cast<std::size_t>(r)]) -= go * w;
    }
  });
  return out;
}

Var Graph::sum(Var a) {
  Var out = push(Mat::Constant(1, 1, value(a).sum()), needs(a));
  set_backward(out, [a, out](Graph& g) { g.grad(a).array() += g.grad(out)(0, 0); });
  return out;
}

void Graph::backward(Var loss) {
  if (!record_) fail(ErrorKind::NonScalarLoss, "backward on an inference-only graph");
  if (value(loss).size() != 1) {
    fail(ErrorKind::NonScalarLoss, "backward requires a scalar loss, got " + shape_str(value(loss)));
  }
  for (auto& n : nodes_) {
    if (!n.is_param) n.grad.resize(0, 0);
  }
  if (!node(loss).requires_grad) return;
  grad(loss)(0, 0) += 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.backward && n.grad.size() != 0) n.backward(*this);
  }
}

const Mat* Graph::param_grad(const Parameter& p) const {
  auto it = bound_.find(&p);
  if (it == bound_.end()) return nullptr;
  const Node& n = nodes_[static_cast<std::size_t>(it->second)];
  return n.grad.size() == 0 ? nullptr : &n.grad;
}

void Graph::accumulate(std::span<Parameter* const> params) const {
  for (Parameter* p : params) {
    if (const Mat* gr = param_grad(*p)) {
      if (p->grad.rows() != gr->rows() || p->grad.cols() != gr->cols()) {
        p->grad = Mat::Zero(p->value.rows(), p->value.cols());
      }
      p->grad += *gr;
    }
  }
}

LstmState lstm_cell(Graph& g, const LstmParams& p, Var x, LstmState prev) {
  const Eigen::Index h = p.hidden();
  if (g.value(x).cols() != p.wx.value.rows() || g.value(prev.h).cols() != h ||
      g.value(prev.c).cols() != h) {
    fail(ErrorKind::ShapeMismatch, "lstm_cell: input or state width inconsistent with params");
  }
  Var gates = g.add(g.matmul(x, g.param(p.wx)), g.affine(prev.h, g.param(p.wh), g.param(p.bias)));
  Var hc = g.lstm_pointwise(gates, prev.c);
  return {g.slice_cols(hc, 0, h), g.slice_cols(hc, h, h)};
}

LstmState lstm_cell_projected(Graph& g, const LstmParams& p, Var x_wx, LstmState prev) {
  const Eigen::Index h = p.hidden();
  if (g.value(x_wx).cols() != 4 * h || g.value(prev.h).cols() != h || g.value(prev.c).cols() != h) {
    fail(ErrorKind::ShapeMismatch, "lstm_cell_projected: projection or state width inconsistent");
  }
  Var gates = g.add(x_wx, g.affine(prev.h, g.param(p.wh), g.param(p.bias)));
  Var hc = g.lstm_pointwise(gates, prev.c);
  return {g.slice_cols(hc, 0, h), g.slice_cols(hc, h, h)};
}

}  // namespace mast
