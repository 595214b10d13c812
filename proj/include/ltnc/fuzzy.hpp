#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ltnc {

/// Differentiable fuzzy operator configuration. The connective family is
/// fixed (product t-norm, probabilistic sum, Reichenbach implication,
/// p-mean / p-mean-error aggregators); the exponents are tunable.
struct ConnectiveConfig {
  double p_forall = 2.0;
  double p_exists = 2.0;
  double p_kb = 2.0;
  /// Aggregator bases are clamped to [eps, 1] before fractional powers so
  /// gradients stay finite when truth values saturate.
  double eps = 1e-7;

  void validate() const {
    if (p_forall < 1.0 || p_exists < 1.0 || p_kb < 1.0)
      throw std::invalid_argument("aggregator exponents must be >= 1");
    if (!(eps > 0.0) || eps >= 1.0)
      throw std::invalid_argument("aggregator guard eps must lie in (0, 1)");
  }
};

// Truth values live in [0, 1]; the functions below preserve that interval.

inline double fuzzy_not(double a) { return 1.0 - a; }

inline double fuzzy_and(double a, double b) { return a * b; }

inline double fuzzy_or(double a, double b) { return a + b - a * b; }

/// Reichenbach implication.
inline double fuzzy_implies(double a, double b) { return 1.0 - a + a * b; }

inline double clamp_unit(double x, double lo) {
  return x < lo ? lo : (x > 1.0 ? 1.0 : x);
}

/// p-mean-error aggregation: 1 - ((1/n) sum (1-a_i)^p)^(1/p). Approaches min
/// as p grows; equals the plain mean complement at p = 1. The arithmetic
/// sequence here mirrors the graph emission in sat.hpp exactly.
inline double agg_forall(std::span<const double> values, double p, double eps = 1e-7) {
  if (values.empty()) throw std::invalid_argument("agg_forall over an empty list");
  double s = 0.0;
  for (double a : values) s += std::pow(clamp_unit(1.0 - a, eps), p);
  double m = s / static_cast<double>(values.size());
  return 1.0 - std::pow(m, 1.0 / p);
}

/// p-mean aggregation: ((1/n) sum a_i^p)^(1/p). At p >= 1 this is at least
/// the arithmetic mean, approaching max as p grows.
inline double agg_exists(std::span<const double> values, double p, double eps = 1e-7) {
  if (values.empty()) throw std::invalid_argument("agg_exists over an empty list");
  double s = 0.0;
  for (double a : values) s += std::pow(clamp_unit(a, eps), p);
  double m = s / static_cast<double>(values.size());
  return std::pow(m, 1.0 / p);
}

/// Knowledge-base satisfiability: p-mean-error over the rule truth values.
inline double kb_sat(std::span<const double> rule_sats, const ConnectiveConfig& cfg) {
  if (rule_sats.empty()) throw std::invalid_argument("kb_sat over an empty rule list");
  return agg_forall(rule_sats, cfg.p_kb, cfg.eps);
}

inline double kb_loss(double sat) { return 1.0 - sat; }

}  // namespace ltnc
