#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ltnc/autodiff.hpp"
#include "ltnc/fuzzy.hpp"
#include "ltnc/kb.hpp"

namespace ltnc {

struct Query {
  std::string id;
  FormulaPtr formula;
};
using QuerySet = std::vector<Query>;

namespace detail {

struct VecHash {
  std::size_t operator()(const std::vector<std::uint64_t>& v) const {
    std::uint64_t h = 1469598103934665603ull;
    for (std::uint64_t x : v) {
      h ^= x;
      h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
  }
};

}  // namespace detail

/// Differentiable satisfiability graph for a knowledge base: one scalar sat
/// node per rule and per query, sharing predicate-network applications via an
/// atom cache. Trainable parameters (network weights and embedding rows) are
/// bound to leaf nodes in a canonical order: predicates by name (per layer,
/// weights row-major, then biases), then trainable sources by index, row-major.
///
/// The tape built by the constructor is the fixed prefix; per-step loss
/// aggregations over a rule subset are appended behind it and discarded with
/// reset_appendix().
class SatGraph {
 public:
  SatGraph(const KnowledgeBase& kb, const QuerySet& queries, const ConnectiveConfig& cfg)
      : kb_(kb), cfg_(cfg) {
    cfg_.validate();
    bind_parameters();
    for (const auto& rule : kb_.rules)
      rule_sat.push_back(emit_formula(rule.formula, {}));
    for (const auto& q : queries)
      query_sat.push_back(emit_formula(q.formula, {}));
    prefix_size_ = graph.size();
  }

  CompGraph graph;
  std::vector<node_id> rule_sat;
  std::vector<node_id> query_sat;

  std::size_t prefix_size() const { return prefix_size_; }
  std::size_t parameter_count() const { return trainable_.size(); }
  const std::vector<node_id>& trainable_leaves() const { return trainable_; }

  /// Current parameter values of the underlying KB in canonical order.
  std::vector<double> initial_parameters() const { return initial_params_; }

  void write_parameters(std::span<const double> params) {
    if (params.size() != trainable_.size())
      throw GraphError("parameter vector length mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) graph.set_leaf(trainable_[i], params[i]);
  }

  void read_gradients(std::vector<double>& out) const {
    out.resize(trainable_.size());
    for (std::size_t i = 0; i < trainable_.size(); ++i) out[i] = graph.gradient(trainable_[i]);
  }

  /// Copy parameter values back into a KB with the same shape (networks and
  /// trainable sources).
  void export_parameters(std::span<const double> params, KnowledgeBase& out) const {
    if (params.size() != trainable_.size())
      throw GraphError("parameter vector length mismatch");
    std::size_t k = 0;
    for (auto& [name, net] : out.groundings.predicates)
      net.for_each_parameter([&](double& p) { p = params[k++]; });
    for (auto& src : out.groundings.sources) {
      if (!src.trainable) continue;
      for (double& x : src.rows.data) x = params[k++];
    }
    if (k != params.size()) throw GraphError("parameter export shape mismatch");
  }

  /// Append loss = 1 - pmean_error(rule sats of the active subset) and return
  /// the loss node. Call reset_appendix() before re-appending.
  node_id append_loss(std::span<const std::size_t> active_rules) {
    if (active_rules.empty()) throw GraphError("append_loss with no active rules");
    std::vector<node_id> sats;
    sats.reserve(active_rules.size());
    for (std::size_t idx : active_rules) sats.push_back(rule_sat.at(idx));
    node_id sat = emit_pmean_error(sats, cfg_.p_kb);
    return graph.sub(graph.constant(1.0), sat);
  }

  void reset_appendix() { graph.truncate(prefix_size_); }

  /// Recursive Real Logic emission; env binds quantified variables to
  /// partition rows. Exposed for query-at-a-time use.
  node_id emit_formula(const FormulaPtr& f,
                       std::vector<std::pair<std::string, int>> env = {}) {
    return emit(f, env);
  }

 private:
  using Env = std::vector<std::pair<std::string, int>>;  // variable -> tuple row

  void bind_parameters() {
    for (const auto& [name, net] : kb_.groundings.predicates) {
      NetBinding binding;
      for (const auto& layer : net.layers) {
        LayerBinding lb;
        for (double w : layer.weight.data) lb.weights.push_back(bind_leaf(w));
        for (double b : layer.bias) lb.biases.push_back(bind_leaf(b));
        lb.act = layer.act;
        lb.out_dim = layer.weight.rows;
        lb.in_dim = layer.weight.cols;
        binding.layers.push_back(std::move(lb));
      }
      net_bindings_.emplace(name, std::move(binding));
    }
    source_nodes_.resize(kb_.groundings.sources.size());
    for (std::size_t s = 0; s < kb_.groundings.sources.size(); ++s) {
      const auto& src = kb_.groundings.sources[s];
      if (!src.trainable) continue;  // fixed rows become constants on demand
      source_nodes_[s].resize(src.rows.data.size());
      for (std::size_t i = 0; i < src.rows.data.size(); ++i)
        source_nodes_[s][i] = bind_leaf(src.rows.data[i]);
    }
  }

  node_id bind_leaf(double value) {
    node_id id = graph.leaf();
    graph.set_leaf(id, value);
    trainable_.push_back(id);
    initial_params_.push_back(value);
    return id;
  }

  node_id source_entry(int source, std::int32_t row, int col) {
    const auto& src = kb_.groundings.sources[source];
    if (src.trainable)
      return source_nodes_[source][static_cast<std::size_t>(row) * src.rows.cols + col];
    return graph.constant(src.rows.at(row, col));
  }

  node_id emit(const FormulaPtr& f, Env& env) {
    switch (f->kind) {
      case FormulaKind::atom: return emit_atom(f, env);
      case FormulaKind::negation:
        return graph.sub(graph.constant(1.0), emit(f->left, env));
      case FormulaKind::conjunction: {
        node_id a = emit(f->left, env);
        node_id b = emit(f->right, env);
        return graph.mul(a, b);
      }
      case FormulaKind::disjunction: {
        node_id a = emit(f->left, env);
        node_id b = emit(f->right, env);
        // a + b - a*b
        return graph.sub(graph.add(a, b), graph.mul(a, b));
      }
      case FormulaKind::implication: {
        node_id a = emit(f->left, env);
        node_id b = emit(f->right, env);
        // 1 - a + a*b
        return graph.add(graph.sub(graph.constant(1.0), a), graph.mul(a, b));
      }
      case FormulaKind::forall:
      case FormulaKind::exists: {
        const auto pit = kb_.groundings.partitions.find(f->bound_var);
        if (pit == kb_.groundings.partitions.end())
          throw ValidationError("no partition named '" + f->bound_var + "' while grounding '" +
                                formula_to_text(f) + "'");
        int n = pit->second.size();
        if (n == 0)
          throw ValidationError("partition '" + f->bound_var + "' is empty");
        std::vector<node_id> body;
        body.reserve(static_cast<std::size_t>(n));
        env.emplace_back(f->bound_var, 0);
        for (int r = 0; r < n; ++r) {
          env.back().second = r;
          body.push_back(emit(f->left, env));
        }
        env.pop_back();
        return f->kind == FormulaKind::forall ? emit_pmean_error(body, cfg_.p_forall)
                                              : emit_pmean(body, cfg_.p_exists);
      }
    }
    throw ValidationError("unhandled formula kind");
  }

  node_id emit_atom(const FormulaPtr& f, const Env& env) {
    auto nit = net_bindings_.find(f->predicate);
    if (nit == net_bindings_.end())
      throw ValidationError("unknown predicate '" + f->predicate + "' in '" +
                            formula_to_text(f) + "'");
    // Resolve every argument to (source, individual) pairs; the cache key is
    // that resolution, so the same application shared across rules, queries
    // and overlapping partitions is emitted once.
    std::vector<std::uint64_t> key;
    key.push_back(reinterpret_cast<std::uintptr_t>(&nit->second));
    std::vector<std::pair<int, std::int32_t>> cells;  // (source, individual row)
    for (const auto& var : f->variables) {
      const Partition* part = nullptr;
      int row = -1;
      for (auto it = env.rbegin(); it != env.rend(); ++it) {
        if (it->first == var) {
          part = &kb_.groundings.partitions.at(var);
          row = it->second;
          break;
        }
      }
      if (!part)
        throw ValidationError("unbound variable '" + var + "' in '" + formula_to_text(f) + "'");
      for (std::int32_t idx : part->tuples[row]) {
        cells.emplace_back(part->source, idx);
        key.push_back((static_cast<std::uint64_t>(part->source) << 32) |
                      static_cast<std::uint32_t>(idx));
      }
    }
    auto cached = atom_cache_.find(key);
    if (cached != atom_cache_.end()) return cached->second;

    std::vector<node_id> input;
    for (const auto& [source, row] : cells) {
      int cols = kb_.groundings.sources[source].rows.cols;
      for (int c = 0; c < cols; ++c) input.push_back(source_entry(source, row, c));
    }
    node_id out = emit_network(nit->second, input, f->predicate);
    atom_cache_.emplace(std::move(key), out);
    return out;
  }

  struct LayerBinding {
    std::vector<node_id> weights;  // row-major
    std::vector<node_id> biases;
    Activation act = Activation::identity;
    int out_dim = 0;
    int in_dim = 0;
  };
  struct NetBinding {
    std::vector<LayerBinding> layers;
  };

  node_id emit_network(const NetBinding& net, std::span<const node_id> input,
                       const std::string& name) {
    if (net.layers.empty() || static_cast<int>(input.size()) != net.layers.front().in_dim)
      throw ValidationError("predicate '" + name + "' expects input width " +
                            std::to_string(net.layers.empty() ? 0 : net.layers.front().in_dim) +
                            ", got " + std::to_string(input.size()));
    std::vector<node_id> cur(input.begin(), input.end());
    std::vector<node_id> next;
    std::vector<node_id> pairs;
    for (const auto& layer : net.layers) {
      next.clear();
      for (int j = 0; j < layer.out_dim; ++j) {
        pairs.clear();
        for (int i = 0; i < layer.in_dim; ++i) {
          pairs.push_back(layer.weights[static_cast<std::size_t>(j) * layer.in_dim + i]);
          pairs.push_back(cur[i]);
        }
        node_id z = graph.add(graph.dot(pairs), layer.biases[j]);
        switch (layer.act) {
          case Activation::identity: break;
          case Activation::elu: z = graph.elu(z); break;
          case Activation::sigmoid: z = graph.sigmoid(z); break;
        }
        next.push_back(z);
      }
      cur = next;
    }
    if (cur.size() != 1)
      throw ValidationError("predicate '" + name + "' must have a single output");
    return cur[0];
  }

  // 1 - ((1/n) sum clamp(1-a_i)^p)^(1/p)
  node_id emit_pmean_error(std::span<const node_id> values, double p) {
    node_id one = graph.constant(1.0);
    std::vector<node_id> terms;
    terms.reserve(values.size());
    for (node_id v : values)
      terms.push_back(graph.pow_const(graph.clamp_unit(graph.sub(one, v), cfg_.eps), p));
    node_id mean = graph.div(graph.sum(terms), graph.constant(static_cast<double>(values.size())));
    return graph.sub(one, graph.pow_const(mean, 1.0 / p));
  }

  // ((1/n) sum clamp(a_i)^p)^(1/p)
  node_id emit_pmean(std::span<const node_id> values, double p) {
    std::vector<node_id> terms;
    terms.reserve(values.size());
    for (node_id v : values)
      terms.push_back(graph.pow_const(graph.clamp_unit(v, cfg_.eps), p));
    node_id mean = graph.div(graph.sum(terms), graph.constant(static_cast<double>(values.size())));
    return graph.pow_const(mean, 1.0 / p);
  }

  const KnowledgeBase& kb_;
  ConnectiveConfig cfg_;
  std::size_t prefix_size_ = 0;
  std::vector<node_id> trainable_;
  std::vector<double> initial_params_;
  std::map<std::string, NetBinding> net_bindings_;
  std::vector<std::vector<node_id>> source_nodes_;
  std::unordered_map<std::vector<std::uint64_t>, node_id, detail::VecHash> atom_cache_;
};

/// Truth value of one formula under the KB's current parameters.
inline double formula_sat(const FormulaPtr& f, const KnowledgeBase& kb,
                          const ConnectiveConfig& cfg = {}) {
  SatGraph sg(kb, {{"q", f}}, cfg);
  sg.graph.forward();
  return sg.graph.value(sg.query_sat[0]);
}

}  // namespace ltnc
