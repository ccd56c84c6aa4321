#pragma once

// Reverse-mode automatic differentiation over row-major matrices.
//
// A Graph is a tape: every operation appends a node holding its forward
// value and a closure that pushes the node's gradient to its inputs. Nodes
// are appended in evaluation order, so reverse index order is a valid
// reverse-topological order. Parameters are bound into a graph by reference;
// the graph accumulates their gradients internally and never writes to the
// Parameter itself, which keeps frozen models immutable by construction.

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mast/error.hpp"
#include "mast/rng.hpp"

namespace mast {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A named trainable tensor with its gradient accumulator.
struct Parameter {
  std::string name;
  Mat value;
  Mat grad;

  Parameter() = default;
  Parameter(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), value(Mat::Zero(rows, cols)), grad(Mat::Zero(rows, cols)) {}
};

/// Handle to a node of a Graph.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Graph {
 public:
  /// With record_gradients false the graph is inference-only: no closures
  /// are stored and backward() is rejected.
  explicit Graph(bool record_gradients = true) : record_(record_gradients) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool records_gradients() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Mat value);
  /// Binds a parameter; repeated binds of the same parameter share a node.
  Var param(const Parameter& p);
  /// Binds a parameter without gradient tracking.
  Var frozen(const Parameter& p);

  const Mat& value(Var v) const;
  double scalar(Var v) const;

  // Linear algebra.
  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  /// a (m×n) + row (1×n) broadcast over rows.
  Var add_row(Var a, Var row);
  /// x·W + bias, bias broadcast over rows.
  Var affine(Var x, Var w, Var bias);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var add_constant(Var a, const Mat& c);

  // Pointwise nonlinearities.
  Var sigmoid(Var a);
  Var tanh(Var a);

  // Shape manipulation.
  Var concat_cols(std::span<const Var> parts);
  Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
  Var concat_rows(std::span<const Var> parts);
  Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);

  /// Row-wise softmax, max-shifted.
  Var softmax(Var a);

  /// Gathers table rows; ids outside the table raise InvalidId.
  Var embedding(Var table, std::span<const int> ids);

  /// Inverted dropout; identity when !training or rate == 0.
  Var dropout(Var a, double rate, bool training, Rng& rng);

  /// Fused LSTM pointwise stage. `gates` is [m × 4H] ordered (input, forget,
  /// output, candidate); returns [h | c] as an [m × 2H] node.
  Var lstm_pointwise(Var gates, Var c_prev);

  /// out[r] = <a[r], b[r]> as an [m × 1] column.
  Var rowdot(Var a, Var b);
  /// out[r, :] = m[r, :] * col[r].
  Var scale_rows(Var m, Var col);
  /// mask[r] ? fresh[r, :] : old[r, :], with mask a 0/1 column.
  Var blend(Var fresh, Var old, const Mat& mask);

  /// Global (Luong "general") attention with precomputed keys.
  /// score_t = <query, keys[t]> + mask(:, t); weights = softmax over t;
  /// returns [context | weights] of shape [m × (D + T)].
  Var attention(Var query, std::span<const Var> keys, std::span<const Var> values,
                const Mat& score_mask);

  /// Mixture of constant per-component distributions:
  /// out[r, :] = sum_j w[r, j] * components[j][r, :].
  Var mix(Var weights, std::span<const Mat> components);

  /// sum_r weight[r] * -log(max(p[r, target[r]], 1e-12)).
  Var cross_entropy(Var probs, std::span<const int> targets, std::span<const double> weights);

  /// sum_r weight[r] * -log softmax(logits)[r, target[r]].
  Var softmax_cross_entropy(Var logits, std::span<const int> targets,
                            std::span<const double> weights);

  Var sum(Var a);

  /// Propagates d(loss)/d(node) for every node. Intermediate gradients are
  /// reset on each call; parameter gradients accumulate, so calling twice
  /// doubles them.
  void backward(Var loss);

  /// Accumulated gradient of a bound parameter, or nullptr when the
  /// parameter was not bound or received no gradient.
  const Mat* param_grad(const Parameter& p) const;

  /// Adds the accumulated gradient of every bound parameter in `params`
  /// into Parameter::grad.
  void accumulate(std::span<Parameter* const> params) const;

 private:
  struct Node {
    Mat value;
    const Mat* external = nullptr;
    Mat grad;
    bool requires_grad = false;
    bool is_param = false;
    std::function<void(Graph&)> backward;

    const Mat& val() const { return external ? *external : value; }
  };

  Var push(Mat value, bool requires_grad);
  Node& node(Var v);
  const Node& node(Var v) const;
  Mat& grad(Var v);
  bool needs(Var v) const { return node(v).requires_grad; }
  void set_backward(Var out, std::function<void(Graph&)> fn);

  bool record_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> bound_;
  std::unordered_map<const Parameter*, int> bound_frozen_;
};

constexpr double kProbabilityFloor = 1e-12;

// ---------------------------------------------------------------------------
// LSTM cell

struct LstmParams {
  Parameter wx;    // [input × 4H]
  Parameter wh;    // [H × 4H]
  Parameter bias;  // [1 × 4H]

  LstmParams() = default;
  LstmParams(const std::string& prefix, Eigen::Index input, Eigen::Index hidden);
  Eigen::Index hidden() const { return wh.value.rows(); }

  template <class F>
  void for_each(F&& f) {
    f(wx);
    f(wh);
    f(bias);
  }
  template <class F>
  void for_each(F&& f) const {
    f(wx);
    f(wh);
    f(bias);
  }
};

struct LstmState {
  Var h;
  Var c;
};

/// One LSTM step over a batch: gates = x·Wx + h·Wh + b.
LstmState lstm_cell(Graph& g, const LstmParams& p, Var x, LstmState prev);

/// Same step with x·Wx already computed (batched over time by the caller).
LstmState lstm_cell_projected(Graph& g, const LstmParams& p, Var x_wx, LstmState prev);

// ---------------------------------------------------------------------------
// Initialization and optimization

/// uniform(-scale, scale) for weights, zeros for biases; LSTM forget-gate
/// biases start at +1.
void init_uniform(Parameter& p, Rng& rng, double scale = 0.08);
void init_lstm(LstmParams& p, Rng& rng, double scale = 0.08);

struct SgdConfig {
  double learning_rate = 1.0;
  std::optional<double> clip_norm = 5.0;
};

double global_grad_norm(std::span<Parameter* const> params);

/// Clips the global gradient norm to clip_norm, then p -= lr * grad.
/// Returns the pre-clipping norm.
double sgd_step(std::span<Parameter* const> params, const SgdConfig& cfg);

void zero_grads(std::span<Parameter* const> params);

// ---------------------------------------------------------------------------
// Serialization: (name, shape, values) records in name order, values as
// hexadecimal floating point so a round trip is bit-exact.

std::string serialize_params(std::span<const Parameter* const> params);

/// Parses records and assigns them to `params` by name. Every parameter
/// must be present with a matching shape.
void load_params(std::string_view text, std::span<Parameter* const> params);

/// Parses records into a name-ordered list without a target schema.
std::vector<Parameter> parse_params(std::string_view text);

}  // namespace mast
