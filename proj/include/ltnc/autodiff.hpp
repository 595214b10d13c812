#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ltnc/rng.hpp"

namespace ltnc {

using node_id = std::uint32_t;

struct GraphError : std::runtime_error {
  explicit GraphError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class Op : std::uint8_t {
  leaf,       // externally supplied value; the only mutable node kind
  constant,   // fixed value, stored in aux
  add,        // a + b
  sub,        // a - b
  mul,        // a * b
  div,        // a / b
  neg,        // -a
  exp,        // e^a
  log,        // ln a
  sigmoid,    // 1/(1+e^-a), output clamped into (0,1)
  elu,        // a > 0 ? a : e^a - 1
  pow_const,  // a ^ aux
  clamp_unit, // clamp(a, aux, 1); gradient is zero outside [aux, 1]
  sum,        // n-ary sum
  dot,        // n-ary pairwise product sum: args a0,b0,a1,b1,... -> sum a_i*b_i
};

// Sigmoid outputs are kept strictly inside (0,1) so that downstream
// fractional powers of (1 - value) stay finite.
constexpr double k_sigmoid_lo = 1e-15;
constexpr double k_sigmoid_hi = 1.0 - 1e-15;

inline double stable_sigmoid(double x) {
  double s;
  if (x >= 0.0) {
    s = 1.0 / (1.0 + std::exp(-x));
  } else {
    double e = std::exp(x);
    s = e / (1.0 + e);
  }
  if (s < k_sigmoid_lo) s = k_sigmoid_lo;
  if (s > k_sigmoid_hi) s = k_sigmoid_hi;
  return s;
}

/// Append-only scalar computation graph (a tape). Node inputs always refer to
/// earlier nodes, so insertion order is a valid evaluation order. Values are
/// cached per node; re-running forward() with unchanged leaves reproduces
/// them bit-for-bit.
class CompGraph {
 public:
  std::size_t size() const { return ops_.size(); }

  node_id leaf() {
    node_id id = push(Op::leaf, 0.0);
    has_leaf_value_.resize(ops_.size(), 1);
    has_leaf_value_[id] = 0;
    return id;
  }

  node_id constant(double v) {
    auto it = const_pool_.find(v);
    if (it != const_pool_.end()) return it->second;
    node_id id = push(Op::constant, v);
    val_[id] = v;
    const_pool_.emplace(v, id);
    return id;
  }

  node_id add(node_id a, node_id b) { return push2(Op::add, a, b); }
  node_id sub(node_id a, node_id b) { return push2(Op::sub, a, b); }
  node_id mul(node_id a, node_id b) { return push2(Op::mul, a, b); }
  node_id div(node_id a, node_id b) { return push2(Op::div, a, b); }
  node_id neg(node_id a) { return push1(Op::neg, a); }
  node_id exp(node_id a) { return push1(Op::exp, a); }
  node_id log(node_id a) { return push1(Op::log, a); }
  node_id sigmoid(node_id a) { return push1(Op::sigmoid, a); }
  node_id elu(node_id a) { return push1(Op::elu, a); }

  node_id pow_const(node_id a, double exponent) {
    node_id id = push1(Op::pow_const, a);
    aux_[id] = exponent;
    return id;
  }

  node_id clamp_unit(node_id a, double lo) {
    node_id id = push1(Op::clamp_unit, a);
    aux_[id] = lo;
    return id;
  }

  node_id sum(std::span<const node_id> terms) { return push_nary(Op::sum, terms); }

  /// args come in (a0, b0, a1, b1, ...) order.
  node_id dot(std::span<const node_id> pairs) {
    if (pairs.size() % 2 != 0) throw GraphError("dot node requires an even argument count");
    return push_nary(Op::dot, pairs);
  }

  bool is_leaf(node_id id) const { return ops_[id] == Op::leaf; }

  void set_leaf(node_id id, double v) {
    check_id(id);
    if (ops_[id] != Op::leaf) throw GraphError("set_leaf on non-leaf node " + std::to_string(id));
    val_[id] = v;
    has_leaf_value_[id] = 1;
    evaluated_ = 0;  // cached downstream values are stale now
  }

  double value(node_id id) const {
    check_id(id);
    if (id >= evaluated_ && ops_[id] != Op::leaf && ops_[id] != Op::constant)
      throw GraphError("node " + std::to_string(id) + " has not been evaluated");
    return val_[id];
  }

  double gradient(node_id id) const {
    check_id(id);
    return grad_[id];
  }

  /// Evaluate every node in insertion order. Throws if some leaf was never set.
  void forward() {
    const std::size_t n = ops_.size();
    for (std::size_t i = 0; i < n; ++i) {
      const node_id* a = args_.data() + arg_off_[i];
      switch (ops_[i]) {
        case Op::leaf:
          if (!has_leaf_value_[i])
            throw GraphError("leaf node " + std::to_string(i) + " has no value");
          break;
        case Op::constant: break;
        case Op::add: val_[i] = val_[a[0]] + val_[a[1]]; break;
        case Op::sub: val_[i] = val_[a[0]] - val_[a[1]]; break;
        case Op::mul: val_[i] = val_[a[0]] * val_[a[1]]; break;
        case Op::div: val_[i] = val_[a[0]] / val_[a[1]]; break;
        case Op::neg: val_[i] = -val_[a[0]]; break;
        case Op::exp: val_[i] = std::exp(val_[a[0]]); break;
        case Op::log: val_[i] = std::log(val_[a[0]]); break;
        case Op::sigmoid: val_[i] = stable_sigmoid(val_[a[0]]); break;
        case Op::elu: {
          double x = val_[a[0]];
          val_[i] = x > 0.0 ? x : std::exp(x) - 1.0;
          break;
        }
        case Op::pow_const: val_[i] = std::pow(val_[a[0]], aux_[i]); break;
        case Op::clamp_unit: {
          double x = val_[a[0]];
          double lo = aux_[i];
          val_[i] = x < lo ? lo : (x > 1.0 ? 1.0 : x);
          break;
        }
        case Op::sum: {
          double acc = 0.0;
          for (std::uint32_t k = 0; k < arg_cnt_[i]; ++k) acc += val_[a[k]];
          val_[i] = acc;
          break;
        }
        case Op::dot: {
          double acc = 0.0;
          for (std::uint32_t k = 0; k < arg_cnt_[i]; k += 2) acc += val_[a[k]] * val_[a[k + 1]];
          val_[i] = acc;
          break;
        }
      }
    }
    evaluated_ = n;
  }

  void zero_grad() {
    grad_.assign(ops_.size(), 0.0);
  }

  /// Reverse sweep from a scalar root; accumulates d(root)/d(node) into every
  /// node's gradient slot. Requires a completed forward pass covering root.
  void backward(node_id root) {
    check_id(root);
    if (root >= evaluated_)
      throw GraphError("backward from unevaluated node " + std::to_string(root));
    if (grad_.size() != ops_.size()) zero_grad();
    grad_[root] += 1.0;
    for (std::size_t i = root + 1; i-- > 0;) {
      const double g = grad_[i];
      if (g == 0.0) continue;
      const node_id* a = args_.data() + arg_off_[i];
      switch (ops_[i]) {
        case Op::leaf:
        case Op::constant: break;
        case Op::add:
          grad_[a[0]] += g;
          grad_[a[1]] += g;
          break;
        case Op::sub:
          grad_[a[0]] += g;
          grad_[a[1]] -= g;
          break;
        case Op::mul:
          grad_[a[0]] += g * val_[a[1]];
          grad_[a[1]] += g * val_[a[0]];
          break;
        case Op::div: {
          double denom = val_[a[1]];
          grad_[a[0]] += g / denom;
          grad_[a[1]] -= g * val_[a[0]] / (denom * denom);
          break;
        }
        case Op::neg: grad_[a[0]] -= g; break;
        case Op::exp: grad_[a[0]] += g * val_[i]; break;
        case Op::log: grad_[a[0]] += g / val_[a[0]]; break;
        case Op::sigmoid: {
          double s = val_[i];
          grad_[a[0]] += g * s * (1.0 - s);
          break;
        }
        case Op::elu: {
          double x = val_[a[0]];
          grad_[a[0]] += x > 0.0 ? g : g * (val_[i] + 1.0);
          break;
        }
        case Op::pow_const: {
          double p = aux_[i];
          double x = val_[a[0]];
          grad_[a[0]] += g * p * std::pow(x, p - 1.0);
          break;
        }
        case Op::clamp_unit: {
          double x = val_[a[0]];
          if (x >= aux_[i] && x <= 1.0) grad_[a[0]] += g;
          break;
        }
        case Op::sum:
          for (std::uint32_t k = 0; k < arg_cnt_[i]; ++k) grad_[a[k]] += g;
          break;
        case Op::dot:
          for (std::uint32_t k = 0; k < arg_cnt_[i]; k += 2) {
            grad_[a[k]] += g * val_[a[k + 1]];
            grad_[a[k + 1]] += g * val_[a[k]];
          }
          break;
      }
    }
  }

  /// Drop every node at index >= n. Constants survive only if they were
  /// created before the cut, which the constant pool tracks.
  void truncate(std::size_t n) {
    if (n >= ops_.size()) return;
    ops_.resize(n);
    arg_off_.resize(n);
    arg_cnt_.resize(n);
    args_.resize(args_watermark(n));
    aux_.resize(n);
    val_.resize(n);
    has_leaf_value_.resize(n);
    if (grad_.size() > n) grad_.resize(n);
    for (auto it = const_pool_.begin(); it != const_pool_.end();) {
      if (it->second >= n) it = const_pool_.erase(it);
      else ++it;
    }
    if (evaluated_ > n) evaluated_ = n;
  }

 private:
  std::size_t args_watermark(std::size_t n) const {
    return n == 0 ? 0 : static_cast<std::size_t>(arg_off_[n - 1]) + arg_cnt_[n - 1];
  }

  void check_id(node_id id) const {
    if (id >= ops_.size()) throw GraphError("node id out of range: " + std::to_string(id));
  }

  node_id push(Op op, double aux) {
    node_id id = static_cast<node_id>(ops_.size());
    ops_.push_back(op);
    arg_off_.push_back(static_cast<std::uint32_t>(args_.size()));
    arg_cnt_.push_back(0);
    aux_.push_back(aux);
    val_.push_back(0.0);
    return id;
  }

  node_id push1(Op op, node_id a) {
    check_id(a);
    node_id id = push(op, 0.0);
    args_.push_back(a);
    arg_cnt_[id] = 1;
    return id;
  }

  node_id push2(Op op, node_id a, node_id b) {
    check_id(a);
    check_id(b);
    node_id id = push(op, 0.0);
    args_.push_back(a);
    args_.push_back(b);
    arg_cnt_[id] = 2;
    return id;
  }

  node_id push_nary(Op op, std::span<const node_id> terms) {
    if (terms.empty()) throw GraphError("n-ary node with no arguments");
    for (node_id t : terms) check_id(t);
    node_id id = push(op, 0.0);
    args_.insert(args_.end(), terms.begin(), terms.end());
    arg_cnt_[id] = static_cast<std::uint32_t>(terms.size());
    return id;
  }

  std::vector<Op> ops_;
  std::vector<std::uint32_t> arg_off_;
  std::vector<std::uint32_t> arg_cnt_;
  std::vector<node_id> args_;
  std::vector<double> aux_;
  std::vector<double> val_;
  std::vector<double> grad_;
  std::vector<std::uint8_t> has_leaf_value_;
  std::map<double, node_id> const_pool_;
  std::size_t evaluated_ = 0;
};

/// Set the given leaves, evaluate, and return all cached values indexed by
/// node id.
inline std::vector<double> graph_forward(CompGraph& g,
                                         const std::vector<std::pair<node_id, double>>& leaves) {
  for (const auto& [id, v] : leaves) g.set_leaf(id, v);
  g.forward();
  std::vector<double> out(g.size());
  for (node_id i = 0; i < out.size(); ++i) out[i] = g.value(i);
  return out;
}

/// d(root)/d(node) for every node, indexed by node id. Leaf entries are the
/// leaf gradients.
inline std::vector<double> graph_backward(CompGraph& g, node_id root) {
  g.zero_grad();
  g.backward(root);
  std::vector<double> out(g.size());
  for (node_id i = 0; i < out.size(); ++i) out[i] = g.gradient(i);
  return out;
}

// ---------------------------------------------------------------------------
// Dense networks used as predicate groundings.

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  std::span<const double> row(int r) const {
    return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
  }
};

enum class Activation : std::uint8_t { elu, sigmoid, identity };

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::elu: return "elu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::identity: return "identity";
  }
  return "?";
}

struct DenseLayer {
  Matrix weight;  // out x in
  std::vector<double> bias;
  Activation act = Activation::identity;
};

/// Small fully connected network. With a sigmoid head every output lies
/// strictly inside (0,1).
struct DenseNetwork {
  std::vector<DenseLayer> layers;

  int input_dim() const { return layers.empty() ? 0 : layers.front().weight.cols; }
  int output_dim() const { return layers.empty() ? 0 : layers.back().weight.rows; }

  /// dims = {in, h1, ..., out}. Weights get Glorot-uniform init from rng.
  static DenseNetwork make(const std::vector<int>& dims, Rng& rng,
                           Activation hidden = Activation::elu,
                           Activation out = Activation::sigmoid) {
    if (dims.size() < 2) throw GraphError("network needs at least input and output dims");
    DenseNetwork net;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      DenseLayer layer;
      layer.weight = Matrix(dims[l + 1], dims[l]);
      layer.bias.assign(static_cast<std::size_t>(dims[l + 1]), 0.0);
      layer.act = (l + 2 == dims.size()) ? out : hidden;
      net.layers.push_back(std::move(layer));
    }
    net.reinit(rng);
    return net;
  }

  void reinit(Rng& rng) {
    for (auto& layer : layers) {
      double bound = std::sqrt(6.0 / (layer.weight.cols + layer.weight.rows));
      for (double& w : layer.weight.data) w = uniform_in(rng, -bound, bound);
      for (double& b : layer.bias) b = 0.0;
    }
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.data.size() + l.bias.size();
    return n;
  }

  /// Visit parameters in canonical order: per layer, weights row-major, then
  /// biases. The graph binding uses the same order.
  template <typename F>
  void for_each_parameter(F&& f) {
    for (auto& l : layers) {
      for (double& w : l.weight.data) f(w);
      for (double& b : l.bias) f(b);
    }
  }
  template <typename F>
  void for_each_parameter(F&& f) const {
    for (const auto& l : layers) {
      for (const double& w : l.weight.data) f(w);
      for (const double& b : l.bias) f(b);
    }
  }

  /// Single-row forward. Accumulation order matches the graph emission in
  /// sat.hpp exactly, so both paths agree bit-for-bit.
  std::vector<double> apply_row(std::span<const double> input) const {
    if (static_cast<int>(input.size()) != input_dim())
      throw GraphError("network input dim mismatch: expected " + std::to_string(input_dim()) +
                       ", got " + std::to_string(input.size()));
    std::vector<double> cur(input.begin(), input.end());
    std::vector<double> next;
    for (const auto& layer : layers) {
      next.assign(static_cast<std::size_t>(layer.weight.rows), 0.0);
      for (int j = 0; j < layer.weight.rows; ++j) {
        double acc = 0.0;
        for (int i = 0; i < layer.weight.cols; ++i) acc += layer.weight.at(j, i) * cur[i];
        acc = acc + layer.bias[j];
        switch (layer.act) {
          case Activation::identity: break;
          case Activation::elu: acc = acc > 0.0 ? acc : std::exp(acc) - 1.0; break;
          case Activation::sigmoid: acc = stable_sigmoid(acc); break;
        }
        next[j] = acc;
      }
      cur.swap(next);
    }
    return cur;
  }
};

/// Batched application of a single-output network: one value per input row.
inline std::vector<double> network_apply(const DenseNetwork& net, const Matrix& rows) {
  if (rows.cols != net.input_dim())
    throw GraphError("network input dim mismatch: expected " + std::to_string(net.input_dim()) +
                     ", got " + std::to_string(rows.cols));
  if (net.output_dim() != 1)
    throw GraphError("network_apply expects a single-output network");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(rows.rows));
  for (int r = 0; r < rows.rows; ++r) out.push_back(net.apply_row(rows.row(r))[0]);
  return out;
}

// ---------------------------------------------------------------------------
// Adam.

struct AdamState {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;

  static AdamState make(std::size_t n, double lr = 0.001) {
    AdamState st;
    st.lr = lr;
    st.m.assign(n, 0.0);
    st.v.assign(n, 0.0);
    return st;
  }
};

/// One Adam step with bias correction; mutates params and state in place.
inline void adam_update(std::span<double> params, std::span<const double> grads, AdamState& st) {
  if (params.size() != grads.size() || params.size() != st.m.size() ||
      params.size() != st.v.size())
    throw GraphError("adam_update: parameter/gradient/state length mismatch");
  st.step += 1;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    if (!std::isfinite(g))
      throw GraphError("non-finite gradient for parameter " + std::to_string(i));
    st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * g;
    st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * g * g;
    const double mhat = st.m[i] / bc1;
    const double vhat = st.v[i] / bc2;
    params[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
  }
}

}  // namespace ltnc
