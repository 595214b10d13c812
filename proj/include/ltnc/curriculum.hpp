#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ltnc/kb.hpp"
#include "ltnc/rng.hpp"
#include "ltnc/sat.hpp"

namespace ltnc {

struct StageConfig {
  int epochs = 400;
  double lr = 0.001;
  double recall_fraction = 0.5;  // rho: share of prior rules rehearsed per epoch
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs <= 0) throw std::invalid_argument("epochs must be positive");
    if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (recall_fraction < 0.0 || recall_fraction > 1.0)
      throw std::invalid_argument("recall fraction must lie in [0, 1]");
  }
};

/// Optional per-stage overrides of the run defaults.
struct StageOverride {
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<double> recall_fraction;
};

struct CurriculumStage {
  std::vector<std::string> rule_ids;
  /// Multiplies the configured epoch count. The single-stage baseline uses 3
  /// so every curriculum gets the same total optimization budget.
  int epochs_scale = 1;
  StageOverride overrides;
};

struct Curriculum {
  std::string name;
  std::vector<CurriculumStage> stages;
};

inline std::vector<std::string> validate_curriculum(const Curriculum& cur,
                                                    const KnowledgeBase& kb) {
  std::vector<std::string> errors;
  if (cur.stages.empty()) errors.push_back("curriculum '" + cur.name + "' has no stages");
  for (std::size_t s = 0; s < cur.stages.size(); ++s) {
    if (cur.stages[s].rule_ids.empty())
      errors.push_back("curriculum '" + cur.name + "' stage " + std::to_string(s + 1) +
                       " is empty");
    for (const auto& id : cur.stages[s].rule_ids)
      if (!kb.find_rule(id))
        errors.push_back("curriculum '" + cur.name + "' stage " + std::to_string(s + 1) +
                         " references unknown rule '" + id + "'");
  }
  return errors;
}

// ---------------------------------------------------------------------------
// Curriculum file format: `stage <k>: id1, id2, ...` per line, '#' comments
// and blank lines ignored; stages must be numbered 1..n in order.

inline Curriculum parse_curriculum(const std::string& text, std::string name) {
  Curriculum cur;
  cur.name = std::move(name);
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string::size_type hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word)) continue;
    int stage_no = 0;
    char colon = 0;
    if (word != "stage" || !(ls >> stage_no) || !(ls >> colon) || colon != ':')
      throw ParseError("expected 'stage <k>: id, id, ...'", line_no, 1);
    if (stage_no != static_cast<int>(cur.stages.size()) + 1)
      throw ParseError("stages must be numbered consecutively from 1", line_no, 1);
    CurriculumStage stage;
    std::string rest;
    std::getline(ls, rest);
    std::istringstream ids(rest);
    std::string id;
    while (std::getline(ids, id, ',')) {
      std::string::size_type a = id.find_first_not_of(" \t");
      std::string::size_type b = id.find_last_not_of(" \t");
      if (a == std::string::npos) continue;
      stage.rule_ids.push_back(id.substr(a, b - a + 1));
    }
    if (stage.rule_ids.empty())
      throw ParseError("stage " + std::to_string(stage_no) + " lists no rules", line_no, 1);
    cur.stages.push_back(std::move(stage));
  }
  return cur;
}

inline std::string curriculum_to_text(const Curriculum& cur) {
  std::string out;
  for (std::size_t s = 0; s < cur.stages.size(); ++s) {
    out += "stage " + std::to_string(s + 1) + ": ";
    for (std::size_t i = 0; i < cur.stages[s].rule_ids.size(); ++i) {
      if (i) out += ", ";
      out += cur.stages[s].rule_ids[i];
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rehearsal and random curricula.

/// Uniform sample without replacement of ceil(rho * |prior|) previously
/// learned rules; drawn fresh every epoch.
inline std::vector<std::string> rehearsal_sample(const std::vector<std::string>& prior,
                                                 double rho, Rng& rng) {
  if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("recall fraction must lie in [0, 1]");
  if (prior.empty()) return {};
  auto k = static_cast<std::size_t>(std::ceil(rho * static_cast<double>(prior.size())));
  return sample_without_replacement(prior, k, rng);
}

/// Uniformly shuffle the rules, then split them at a uniformly chosen
/// composition into n_stages non-empty ordered groups.
inline Curriculum make_random_curriculum(const std::vector<std::string>& rule_ids, int n_stages,
                                         Rng& rng) {
  if (n_stages < 1) throw std::invalid_argument("need at least one stage");
  if (static_cast<int>(rule_ids.size()) < n_stages)
    throw std::invalid_argument("fewer rules (" + std::to_string(rule_ids.size()) +
                                ") than stages (" + std::to_string(n_stages) + ")");
  std::vector<std::string> perm = rule_ids;
  shuffle_in_place(perm, rng);
  // cut points: n_stages-1 distinct positions among the n-1 gaps
  std::vector<std::size_t> gaps(perm.size() - 1);
  for (std::size_t i = 0; i < gaps.size(); ++i) gaps[i] = i + 1;
  std::vector<std::size_t> cuts = sample_without_replacement(gaps, n_stages - 1, rng);
  std::sort(cuts.begin(), cuts.end());
  cuts.push_back(perm.size());
  Curriculum cur;
  cur.name = "random";
  std::size_t begin = 0;
  for (std::size_t cut : cuts) {
    CurriculumStage stage;
    stage.rule_ids.assign(perm.begin() + begin, perm.begin() + cut);
    cur.stages.push_back(std::move(stage));
    begin = cut;
  }
  return cur;
}

// ---------------------------------------------------------------------------
// Training.

struct TraceRecord {
  int epoch;   // global, 1-based, strictly increasing across stages
  int stage;   // 1-based
  int query;   // index into the query set
  double sat;
};

struct TrainingTrace {
  std::vector<TraceRecord> records;
  std::vector<int> stage_end_epochs;
};

struct DivergenceError : std::runtime_error {
  explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

struct RunResult {
  TrainingTrace trace;
  std::vector<std::vector<double>> stage_end_sats;  // [stage][query], post-update
  std::vector<double> final_sats;                   // == stage_end_sats.back()
  KnowledgeBase trained;
};

/// Stage-wise trainer over one satisfiability graph. Parameters persist
/// across stages; the Adam state is fresh per stage. Trace rows record the
/// query sats seen by each epoch's forward pass (before that epoch's update);
/// stage-end sats are evaluated after the stage's last update.
class Trainer {
 public:
  Trainer(const KnowledgeBase& kb, const QuerySet& queries, const ConnectiveConfig& cfg,
          std::uint64_t seed)
      : kb_(kb), queries_(queries), cfg_(cfg), rng_(seed) {
    require_valid(kb_);
    for (const auto& q : queries_) {
      auto free = free_variables(q.formula);
      if (!free.empty())
        throw ValidationError("query '" + q.id + "' has unbound variable '" + *free.begin() +
                              "'");
    }
    // Fresh parameter init from the run seed: Glorot for every predicate
    // network (map order = name order), standard normal for embeddings.
    for (auto& [name, net] : kb_.groundings.predicates) net.reinit(rng_);
    for (auto& src : kb_.groundings.sources) {
      if (!src.trainable) continue;
      for (double& x : src.rows.data) x = normal01(rng_);
    }
    graph_ = std::make_unique<SatGraph>(kb_, queries_, cfg_);
    params_ = graph_->initial_parameters();
  }

  int global_epoch() const { return global_epoch_; }
  const KnowledgeBase& kb() const { return kb_; }

  /// One curriculum stage: per epoch the active set is the stage's rules plus
  /// a fresh rehearsal sample of prior rules, and one Adam step is taken on
  /// loss = 1 - sat(active).
  void train_stage(const std::vector<std::string>& stage_rules,
                   const std::vector<std::string>& prior_rules, const StageConfig& cfg,
                   TrainingTrace& trace) {
    cfg.validate();
    if (stage_rules.empty()) throw std::invalid_argument("stage with no rules");
    ++stage_index_;
    if (cfg.seed != 0) rng_.seed(cfg.seed);
    AdamState adam = AdamState::make(params_.size(), cfg.lr);
    std::vector<std::size_t> active;
    std::vector<double> grads;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
      active.clear();
      for (const auto& id : stage_rules) active.push_back(rule_index(id));
      for (const auto& id : rehearsal_sample(prior_rules, cfg.recall_fraction, rng_)) {
        std::size_t idx = rule_index(id);
        if (std::find(active.begin(), active.end(), idx) == active.end()) active.push_back(idx);
      }
      graph_->reset_appendix();
      node_id loss_node = graph_->append_loss(active);
      graph_->write_parameters(params_);
      graph_->graph.forward();
      ++global_epoch_;
      for (std::size_t q = 0; q < queries_.size(); ++q)
        trace.records.push_back({global_epoch_, stage_index_, static_cast<int>(q),
                                 graph_->graph.value(graph_->query_sat[q])});
      double loss = graph_->graph.value(loss_node);
      if (!std::isfinite(loss)) throw DivergenceError(divergence_message(epoch, loss));
      graph_->graph.zero_grad();
      graph_->graph.backward(loss_node);
      graph_->read_gradients(grads);
      adam_update(params_, grads, adam);
    }
    trace.stage_end_epochs.push_back(global_epoch_);
  }

  /// Query sats under the current parameters.
  std::vector<double> query_sats() {
    refresh();
    std::vector<double> out;
    out.reserve(graph_->query_sat.size());
    for (node_id q : graph_->query_sat) out.push_back(graph_->graph.value(q));
    return out;
  }

  std::vector<double> rule_sats() {
    refresh();
    std::vector<double> out;
    out.reserve(graph_->rule_sat.size());
    for (node_id r : graph_->rule_sat) out.push_back(graph_->graph.value(r));
    return out;
  }

  /// KB with the trained parameter values filled back in.
  KnowledgeBase export_kb() const {
    KnowledgeBase out = kb_;
    graph_->export_parameters(params_, out);
    return out;
  }

 private:
  void refresh() {
    graph_->reset_appendix();
    graph_->write_parameters(params_);
    graph_->graph.forward();
  }

  std::size_t rule_index(const std::string& id) const {
    for (std::size_t i = 0; i < kb_.rules.size(); ++i)
      if (kb_.rules[i].id == id) return i;
    throw ValidationError("unknown rule id '" + id + "'");
  }

  std::string divergence_message(int epoch, double loss) {
    std::string msg = "non-finite loss (" + std::to_string(loss) + ") at stage " +
                      std::to_string(stage_index_) + ", epoch " + std::to_string(epoch) +
                      "; rule sats:";
    for (std::size_t i = 0; i < graph_->rule_sat.size(); ++i)
      msg += " " + kb_.rules[i].id + "=" +
             std::to_string(graph_->graph.value(graph_->rule_sat[i]));
    return msg;
  }

  KnowledgeBase kb_;
  QuerySet queries_;
  ConnectiveConfig cfg_;
  Rng rng_;
  std::unique_ptr<SatGraph> graph_;
  std::vector<double> params_;
  int global_epoch_ = 0;
  int stage_index_ = 0;
};

/// Run a whole curriculum from a fresh seed-determined init. The prior set
/// accumulates stage rules in curriculum order.
inline RunResult run_curriculum(const KnowledgeBase& kb, const Curriculum& curriculum,
                                const StageConfig& defaults, const QuerySet& queries,
                                std::uint64_t seed, const ConnectiveConfig& cfg = {}) {
  defaults.validate();
  {
    auto errors = validate_curriculum(curriculum, kb);
    if (!errors.empty()) {
      std::string msg = "curriculum failed validation:";
      for (const auto& e : errors) msg += "\n  " + e;
      throw ValidationError(msg);
    }
  }
  Trainer trainer(kb, queries, cfg, seed);
  RunResult result;
  std::vector<std::string> prior;
  for (const auto& stage : curriculum.stages) {
    StageConfig sc = defaults;
    sc.epochs = stage.overrides.epochs.value_or(defaults.epochs) * stage.epochs_scale;
    sc.lr = stage.overrides.lr.value_or(defaults.lr);
    sc.recall_fraction = stage.overrides.recall_fraction.value_or(defaults.recall_fraction);
    trainer.train_stage(stage.rule_ids, prior, sc, result.trace);
    result.stage_end_sats.push_back(trainer.query_sats());
    for (const auto& id : stage.rule_ids)
      if (std::find(prior.begin(), prior.end(), id) == prior.end()) prior.push_back(id);
  }
  result.final_sats = result.stage_end_sats.back();
  result.trained = trainer.export_kb();
  return result;
}

/// Pure evaluation of a query set against the KB's current parameters.
inline std::map<std::string, double> evaluate_queries(const KnowledgeBase& kb,
                                                      const QuerySet& queries,
                                                      const ConnectiveConfig& cfg = {}) {
  require_valid(kb);
  SatGraph sg(kb, queries, cfg);
  sg.graph.forward();
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < queries.size(); ++i)
    out[queries[i].id] = sg.graph.value(sg.query_sat[i]);
  return out;
}

}  // namespace ltnc
