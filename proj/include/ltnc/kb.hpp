#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ltnc/autodiff.hpp"
#include "ltnc/formula.hpp"

namespace ltnc {

struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A block of individual rows. Trainable sources (embeddings) receive
/// gradients during training; fixed sources are plain data.
struct SourceMatrix {
  Matrix rows;
  bool trainable = false;
};

/// A named data partition: a list of index tuples into one source. A tuple
/// (i, j) grounds to the concatenation of source rows i and j, so pair
/// partitions for binary predicates are just 2-tuples.
struct Partition {
  int source = 0;
  std::vector<std::vector<std::int32_t>> tuples;

  int size() const { return static_cast<int>(tuples.size()); }
  int arity() const { return tuples.empty() ? 0 : static_cast<int>(tuples.front().size()); }
};

/// Grounding of the logical language: variables to data partitions,
/// predicates to trainable networks.
struct GroundingTable {
  std::vector<SourceMatrix> sources;
  std::map<std::string, Partition> partitions;
  std::map<std::string, DenseNetwork> predicates;

  int add_source(Matrix m, bool trainable) {
    sources.push_back({std::move(m), trainable});
    return static_cast<int>(sources.size()) - 1;
  }

  /// Partition backed by its own fixed matrix, one singleton tuple per row.
  void add_matrix_partition(const std::string& name, Matrix m) {
    int src = add_source(std::move(m), false);
    Partition p;
    p.source = src;
    for (int r = 0; r < sources[src].rows.rows; ++r) p.tuples.push_back({r});
    partitions[name] = std::move(p);
  }

  void add_index_partition(const std::string& name, int source,
                           std::vector<std::vector<std::int32_t>> tuples) {
    partitions[name] = Partition{source, std::move(tuples)};
  }

  bool has_partition(const std::string& name) const { return partitions.count(name) > 0; }

  /// Feature width of a partition row: tuple arity times source row width.
  int partition_dim(const std::string& name) const {
    const Partition& p = partitions.at(name);
    return p.arity() * sources[p.source].rows.cols;
  }

  int partition_size(const std::string& name) const {
    return partitions.at(name).size();
  }

  /// Materialize a partition as a dense matrix (tuple rows concatenated).
  Matrix partition_rows(const std::string& name) const {
    const Partition& p = partitions.at(name);
    const Matrix& src = sources[p.source].rows;
    Matrix out(p.size(), p.arity() * src.cols);
    for (int r = 0; r < p.size(); ++r) {
      int c = 0;
      for (std::int32_t idx : p.tuples[r])
        for (int k = 0; k < src.cols; ++k) out.at(r, c++) = src.at(idx, k);
    }
    return out;
  }
};

struct Rule {
  std::string id;
  std::string label;  // human-readable gloss, defaults to id
  FormulaPtr formula;
};

struct KnowledgeBase {
  std::vector<Rule> rules;
  GroundingTable groundings;

  const Rule* find_rule(const std::string& id) const {
    for (const auto& r : rules)
      if (r.id == id) return &r;
    return nullptr;
  }

  std::vector<std::string> rule_ids() const {
    std::vector<std::string> out;
    out.reserve(rules.size());
    for (const auto& r : rules) out.push_back(r.id);
    return out;
  }
};

// ---------------------------------------------------------------------------
// KB file format: one rule per line, `id : formula`, '#' comments and blank
// lines ignored. The id charset is [A-Za-z0-9_.-]; everything after the first
// ':' is formula text.

inline KnowledgeBase parse_kb(const std::string& text) {
  KnowledgeBase kb;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string::size_type hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string::size_type first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    std::string::size_type colon = line.find(':');
    if (colon == std::string::npos)
      throw ParseError("missing ':' between rule id and formula", line_no,
                       static_cast<int>(line.size()) + 1);
    std::string id = line.substr(first, colon - first);
    while (!id.empty() && (id.back() == ' ' || id.back() == '\t')) id.pop_back();
    if (id.empty()) throw ParseError("empty rule id", line_no, 1);
    for (char c : id)
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-'))
        throw ParseError("invalid character '" + std::string(1, c) + "' in rule id '" + id + "'",
                         line_no, 1);
    if (!seen.insert(id).second)
      throw ParseError("duplicate rule id '" + id + "'", line_no, 1);
    // Hand the remainder to the formula parser; error columns are approximate
    // because the prefix is stripped.
    FormulaPtr f = parse_formula(line.substr(colon + 1), line_no);
    kb.rules.push_back(Rule{id, id, std::move(f)});
  }
  return kb;
}

inline std::string kb_to_text(const KnowledgeBase& kb) {
  std::string out;
  for (const auto& r : kb.rules) {
    out += r.id;
    out += " : ";
    out += formula_to_text(r.formula);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Validation.

namespace detail {

inline void validate_formula_against(const GroundingTable& gt, const FormulaPtr& f,
                                     const std::string& context,
                                     std::map<std::string, int>& pred_dims,
                                     std::vector<std::string>& errors) {
  switch (f->kind) {
    case FormulaKind::atom: {
      int dim = 0;
      bool dims_known = true;
      for (const auto& v : f->variables) {
        if (!gt.has_partition(v)) {
          dims_known = false;
          continue;  // unbound/missing partition reported by the scoping pass
        }
        dim += gt.partition_dim(v);
      }
      if (!dims_known) break;
      auto [it, inserted] = pred_dims.emplace(f->predicate, dim);
      if (!inserted && it->second != dim)
        errors.push_back(context + ": predicate '" + f->predicate +
                         "' used with input width " + std::to_string(dim) +
                         " but previously with " + std::to_string(it->second));
      auto pit = gt.predicates.find(f->predicate);
      if (pit == gt.predicates.end()) {
        errors.push_back(context + ": unknown predicate '" + f->predicate + "'");
      } else if (pit->second.input_dim() != dim) {
        errors.push_back(context + ": predicate '" + f->predicate + "' expects input width " +
                         std::to_string(pit->second.input_dim()) + ", atom provides " +
                         std::to_string(dim));
      }
      break;
    }
    case FormulaKind::negation:
      validate_formula_against(gt, f->left, context, pred_dims, errors);
      break;
    case FormulaKind::conjunction:
    case FormulaKind::disjunction:
    case FormulaKind::implication:
      validate_formula_against(gt, f->left, context, pred_dims, errors);
      validate_formula_against(gt, f->right, context, pred_dims, errors);
      break;
    case FormulaKind::forall:
    case FormulaKind::exists: {
      if (!gt.has_partition(f->bound_var))
        errors.push_back(context + ": no partition named '" + f->bound_var + "'");
      else if (gt.partition_size(f->bound_var) == 0)
        errors.push_back(context + ": partition '" + f->bound_var + "' is empty");
      validate_formula_against(gt, f->left, context, pred_dims, errors);
      break;
    }
  }
}

}  // namespace detail

/// Scoping check only (usable before any grounding table exists): every
/// variable in an atom must be bound by an enclosing quantifier.
inline std::vector<std::string> validate_scoping(const KnowledgeBase& kb) {
  std::vector<std::string> errors;
  for (const auto& r : kb.rules) {
    for (const auto& v : free_variables(r.formula))
      errors.push_back("rule '" + r.id + "': unbound variable '" + v + "'");
  }
  return errors;
}

/// Full validation. Scoping always; partition existence and predicate input
/// widths when a grounding table is attached. Returns one message per
/// violation; empty means valid.
inline std::vector<std::string> validate_kb(const KnowledgeBase& kb) {
  std::vector<std::string> errors = validate_scoping(kb);
  if (kb.groundings.partitions.empty() && kb.groundings.predicates.empty()) return errors;
  std::map<std::string, int> pred_dims;
  for (const auto& r : kb.rules)
    detail::validate_formula_against(kb.groundings, r.formula, "rule '" + r.id + "'", pred_dims,
                                     errors);
  return errors;
}

inline void require_valid(const KnowledgeBase& kb) {
  auto errors = validate_kb(kb);
  if (!errors.empty()) {
    std::string msg = "knowledge base failed validation:";
    for (const auto& e : errors) {
      msg += "\n  ";
      msg += e;
    }
    throw ValidationError(msg);
  }
}

}  // namespace ltnc
