#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "ltnc/curriculum.hpp"
#include "ltnc/tasks.hpp"

namespace ltnc {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ExperimentConfig {
  std::string task = "pet";  // pet | sf
  std::vector<std::string> curricula{"baseline", "random", "ts", "kc"};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  int epochs = 400;
  double lr = 0.008;
  double recall = 0.5;
  double p = 2.0;     // quantifier aggregator exponent
  double p_kb = 1.0;  // rule-set aggregator exponent
  std::string out = "results";
  int jobs = 1;
  std::uint64_t task_seed = 1234;  // dataset / bundle seed, fixed across runs

  ConnectiveConfig connectives() const {
    ConnectiveConfig cfg;
    cfg.p_forall = p;
    cfg.p_exists = p;
    cfg.p_kb = p_kb;
    return cfg;
  }

  StageConfig stage_defaults() const {
    StageConfig sc;
    sc.epochs = epochs;
    sc.lr = lr;
    sc.recall_fraction = recall;
    return sc;
  }

  void validate() const {
    if (task != "pet" && task != "sf") throw ConfigError("unknown task '" + task + "'");
    if (curricula.empty()) throw ConfigError("no curricula selected");
    if (seeds.empty()) throw ConfigError("need at least one seed");
    if (epochs <= 0) throw ConfigError("epochs must be positive");
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");
    if (recall < 0.0 || recall > 1.0) throw ConfigError("recall must lie in [0, 1]");
    if (p < 1.0 || p_kb < 1.0) throw ConfigError("aggregator exponents must be >= 1");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    if (out.empty()) throw ConfigError("output directory must not be empty");
  }
};

// ---------------------------------------------------------------------------
// Config file: `key = value` lines, '#' comments. Every key is also a CLI
// flag; flags win over the file.

inline void apply_config_entry(ExperimentConfig& cfg, const std::string& key,
                               const std::string& value) {
  auto parse_u64_list = [&](const std::string& v) {
    std::vector<std::uint64_t> out;
    std::istringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.find_first_not_of(" \t") == std::string::npos) continue;
      out.push_back(std::stoull(item));
    }
    return out;
  };
  try {
    if (key == "task") cfg.task = value;
    else if (key == "curricula") {
      cfg.curricula.clear();
      std::istringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ',')) {
        std::string::size_type a = item.find_first_not_of(" \t");
        std::string::size_type b = item.find_last_not_of(" \t");
        if (a != std::string::npos) cfg.curricula.push_back(item.substr(a, b - a + 1));
      }
    } else if (key == "seeds") {
      // either a count N (meaning 1..N) or an explicit comma list
      if (value.find(',') == std::string::npos) {
        std::uint64_t n = std::stoull(value);
        if (n == 0) throw ConfigError("seed count must be >= 1");
        cfg.seeds.clear();
        for (std::uint64_t s = 1; s <= n; ++s) cfg.seeds.push_back(s);
      } else {
        cfg.seeds = parse_u64_list(value);
      }
    } else if (key == "epochs") cfg.epochs = std::stoi(value);
    else if (key == "lr") cfg.lr = std::stod(value);
    else if (key == "recall") cfg.recall = std::stod(value);
    else if (key == "p") cfg.p = std::stod(value);
    else if (key == "p_kb") cfg.p_kb = std::stod(value);
    else if (key == "out") cfg.out = value;
    else if (key == "jobs") cfg.jobs = std::stoi(value);
    else if (key == "task_seed") cfg.task_seed = std::stoull(value);
    else throw ConfigError("unknown config key '" + key + "'");
  } catch (const std::invalid_argument&) {
    throw ConfigError("bad value '" + value + "' for config key '" + key + "'");
  } catch (const std::out_of_range&) {
    throw ConfigError("bad value '" + value + "' for config key '" + key + "'");
  }
}

inline ExperimentConfig parse_config_text(const std::string& text,
                                          ExperimentConfig base = {}) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string::size_type hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string::size_type eq = line.find('=');
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    auto trim = [](std::string s) {
      std::string::size_type a = s.find_first_not_of(" \t\r");
      std::string::size_type b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    apply_config_entry(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

inline std::string config_to_text(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "task = " << cfg.task << '\n';
  out << "curricula = ";
  for (std::size_t i = 0; i < cfg.curricula.size(); ++i)
    out << (i ? "," : "") << cfg.curricula[i];
  out << '\n';
  out << "seeds = ";
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) out << (i ? "," : "") << cfg.seeds[i];
  out << '\n';
  out << "epochs = " << cfg.epochs << '\n';
  out << "lr = " << cfg.lr << '\n';
  out << "recall = " << cfg.recall << '\n';
  out << "p = " << cfg.p << '\n';
  out << "p_kb = " << cfg.p_kb << '\n';
  out << "out = " << cfg.out << '\n';
  out << "jobs = " << cfg.jobs << '\n';
  out << "task_seed = " << cfg.task_seed << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Aggregation and reports.

/// Arithmetic mean and sample standard deviation (n-1 denominator, 0 for a
/// single value).
inline std::pair<double, double> aggregate_seeds(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("aggregate_seeds over an empty list");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

struct ReportRow {
  std::string curriculum;
  int stage = 0;
  std::string query;
  double mean_sat = 0.0;
  double std_sat = 0.0;
  int n_seeds = 0;

  bool operator==(const ReportRow&) const = default;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;

  bool operator==(const ExperimentReport&) const = default;

  void sort() {
    std::sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
      if (a.curriculum != b.curriculum) return a.curriculum < b.curriculum;
      if (a.stage != b.stage) return a.stage < b.stage;
      return a.query < b.query;
    });
  }
};

/// Per-run trace plus identifying coordinates, for the trace CSV.
struct TraceRun {
  std::uint64_t seed = 0;
  std::string curriculum;
  std::vector<std::string> query_ids;
  TrainingTrace trace;
};

namespace detail {

inline std::string format_real6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

inline void atomic_write_file(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  try {
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
      out << contents;
      if (!out) throw IoError("write failed for '" + tmp.string() + "'");
    }
    fs::rename(tmp, target);
  } catch (const fs::filesystem_error& e) {
    throw IoError(std::string("filesystem error: ") + e.what());
  }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

inline constexpr const char* k_results_header = "curriculum,stage,query,mean_sat,std_sat,n_seeds";
inline constexpr const char* k_trace_header = "seed,curriculum,stage,epoch,query,sat";

inline std::string results_csv_text(const ExperimentReport& report) {
  ExperimentReport sorted = report;
  sorted.sort();
  std::string out = k_results_header;
  out += '\n';
  for (const auto& r : sorted.rows) {
    out += r.curriculum;
    out += ',';
    out += std::to_string(r.stage);
    out += ',';
    out += r.query;
    out += ',';
    out += detail::format_real6(r.mean_sat);
    out += ',';
    out += detail::format_real6(r.std_sat);
    out += ',';
    out += std::to_string(r.n_seeds);
    out += '\n';
  }
  return out;
}

inline ExperimentReport parse_results_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.substr(0, line.find('\r')) != k_results_header)
    throw IoError("results CSV: bad header");
  ExperimentReport report;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = detail::split_csv_line(line);
    if (f.size() != 6) throw IoError("results CSV: expected 6 fields, got " + line);
    report.rows.push_back(
        {f[0], std::stoi(f[1]), f[2], std::stod(f[3]), std::stod(f[4]), std::stoi(f[5])});
  }
  return report;
}

inline void write_results_csv(const ExperimentReport& report, const std::string& path) {
  detail::atomic_write_file(path, results_csv_text(report));
}

inline std::string trace_csv_text(const std::vector<TraceRun>& runs) {
  std::vector<const TraceRun*> order;
  order.reserve(runs.size());
  for (const auto& r : runs) order.push_back(&r);
  std::sort(order.begin(), order.end(), [](const TraceRun* a, const TraceRun* b) {
    if (a->curriculum != b->curriculum) return a->curriculum < b->curriculum;
    return a->seed < b->seed;
  });
  std::string out = k_trace_header;
  out += '\n';
  for (const TraceRun* run : order) {
    for (const auto& rec : run->trace.records) {
      out += std::to_string(run->seed);
      out += ',';
      out += run->curriculum;
      out += ',';
      out += std::to_string(rec.stage);
      out += ',';
      out += std::to_string(rec.epoch);
      out += ',';
      out += run->query_ids.at(static_cast<std::size_t>(rec.query));
      out += ',';
      out += detail::format_real6(rec.sat);
      out += '\n';
    }
  }
  return out;
}

inline void write_trace_csv(const std::vector<TraceRun>& runs, const std::string& path) {
  detail::atomic_write_file(path, trace_csv_text(runs));
}

struct TraceCsvRow {
  std::uint64_t seed;
  std::string curriculum;
  int stage;
  int epoch;
  std::string query;
  double sat;
};

inline std::vector<TraceCsvRow> parse_trace_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.substr(0, line.find('\r')) != k_trace_header)
    throw IoError("trace CSV: bad header");
  std::vector<TraceCsvRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = detail::split_csv_line(line);
    if (f.size() != 6) throw IoError("trace CSV: expected 6 fields, got " + line);
    rows.push_back({std::stoull(f[0]), f[1], std::stoi(f[2]), std::stoi(f[3]), f[4],
                    std::stod(f[5])});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Experiment driver.

struct ExperimentResult {
  ExperimentReport report;
  std::vector<TraceRun> traces;
};

namespace detail {

inline TaskBundle build_task(const ExperimentConfig& cfg) {
  if (cfg.task == "pet") {
    PetConfig pc;
    pc.seed = cfg.task_seed;
    return build_pet(pc);
  }
  SfConfig sc;
  sc.seed = cfg.task_seed;
  return build_sf(sc);
}

/// The curriculum a given (name, seed) run trains on. "random" is generated
/// from the run seed; built-ins come from the bundle.
inline Curriculum resolve_curriculum(const TaskBundle& bundle, const std::string& name,
                                     std::uint64_t seed) {
  if (name == "random") {
    Rng rng(seed);
    return make_random_curriculum(bundle.kb.rule_ids(), 3, rng);
  }
  auto it = bundle.curricula.find(name);
  if (it == bundle.curricula.end())
    throw ConfigError("unknown curriculum '" + name + "' for this task");
  return it->second;
}

}  // namespace detail

/// Run every (curriculum, seed) combination and aggregate end-of-stage query
/// sats to mean +- sample std per (curriculum, stage, query). Runs are
/// independent; with jobs > 1 they execute on a small thread pool, and the
/// output is identical regardless of scheduling.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  cfg.connectives().validate();
  TaskBundle bundle = detail::build_task(cfg);
  for (const auto& name : cfg.curricula)
    if (name != "random" && !bundle.curricula.count(name))
      throw ConfigError("unknown curriculum '" + name + "' for task '" + cfg.task + "'");

  struct RunSpec {
    std::string curriculum;
    std::uint64_t seed;
  };
  std::vector<RunSpec> specs;
  for (const auto& name : cfg.curricula)
    for (std::uint64_t seed : cfg.seeds) specs.push_back({name, seed});

  std::vector<RunResult> results(specs.size());
  std::vector<Curriculum> resolved(specs.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= specs.size()) return;
      {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (first_error) return;
      }
      try {
        resolved[i] = detail::resolve_curriculum(bundle, specs[i].curriculum, specs[i].seed);
        results[i] = run_curriculum(bundle.kb, resolved[i], cfg.stage_defaults(), bundle.queries,
                                    specs[i].seed, cfg.connectives());
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) {
          try {
            std::rethrow_exception(std::current_exception());
          } catch (const std::exception& e) {
            first_error = std::make_exception_ptr(DivergenceError(
                "run " + cfg.task + "/" + specs[i].curriculum + " seed " +
                std::to_string(specs[i].seed) + ": " + e.what()));
          }
        }
        return;
      }
    }
  };

  int n_threads = std::min<int>(cfg.jobs, static_cast<int>(specs.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  // curriculum -> stage -> query -> per-seed sats, in seed order
  ExperimentResult out;
  std::map<std::string, std::map<int, std::map<std::string, std::vector<double>>>> cells;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& spec = specs[i];
    const auto& rr = results[i];
    for (std::size_t s = 0; s < rr.stage_end_sats.size(); ++s)
      for (std::size_t q = 0; q < bundle.queries.size(); ++q)
        cells[spec.curriculum][static_cast<int>(s) + 1][bundle.queries[q].id].push_back(
            rr.stage_end_sats[s][q]);
    TraceRun tr;
    tr.seed = spec.seed;
    tr.curriculum = spec.curriculum;
    for (const auto& q : bundle.queries) tr.query_ids.push_back(q.id);
    tr.trace = std::move(results[i].trace);
    out.traces.push_back(std::move(tr));
  }
  for (const auto& [cur, stages] : cells)
    for (const auto& [stage, queries] : stages)
      for (const auto& [query, sats] : queries) {
        auto [mean, sd] = aggregate_seeds(sats);
        out.report.rows.push_back(
            {cur, stage, query, mean, sd, static_cast<int>(sats.size())});
      }
  out.report.sort();
  return out;
}

/// Full CLI-facing run: execute, then write results.csv, trace.csv and a
/// provenance copy of the resolved config into the output directory.
inline ExperimentResult run_experiment_to_files(const ExperimentConfig& cfg) {
  ExperimentResult result = run_experiment(cfg);
  namespace fs = std::filesystem;
  fs::path dir(cfg.out);
  write_results_csv(result.report, (dir / "results.csv").string());
  write_trace_csv(result.traces, (dir / "trace.csv").string());
  detail::atomic_write_file((dir / "resolved_config.txt").string(), config_to_text(cfg));
  return result;
}

}  // namespace ltnc
