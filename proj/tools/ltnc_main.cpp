// Command-line harness: run curricula over seed sweeps, validate KB and
// curriculum files, and re-emit trace slices.
//
// Exit codes: 0 ok, 1 validation failure, 2 bad config, 3 training
// divergence, 4 I/O failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ltnc/ltnc.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ltnc::IoError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cmd_run(const ltnc::ExperimentConfig& cfg) {
  try {
    cfg.validate();
  } catch (const ltnc::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  try {
    ltnc::ExperimentResult result = ltnc::run_experiment_to_files(cfg);
    std::cout << "wrote " << cfg.out << "/results.csv (" << result.report.rows.size()
              << " rows), trace.csv, resolved_config.txt\n";
    return 0;
  } catch (const ltnc::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ltnc::DivergenceError& e) {
    std::cerr << "error: training diverged: " << e.what() << "\n";
    return 3;
  } catch (const ltnc::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}

int cmd_check(const std::string& kb_path, const std::vector<std::string>& curriculum_paths,
              const std::string& task) {
  std::string kb_text;
  try {
    kb_text = read_file(kb_path);
  } catch (const ltnc::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  ltnc::KnowledgeBase kb;
  try {
    kb = ltnc::parse_kb(kb_text);
  } catch (const ltnc::ParseError& e) {
    std::cerr << kb_path << ": " << e.what() << "\n";
    return 1;
  }
  if (!task.empty()) {
    // Borrow the task's groundings so partition and predicate widths are
    // checked too, not just scoping.
    try {
      ltnc::TaskBundle bundle =
          task == "pet" ? ltnc::build_pet() : task == "sf" ? ltnc::build_sf()
                                                           : throw ltnc::ConfigError("unknown task '" + task + "'");
      kb.groundings = std::move(bundle.kb.groundings);
    } catch (const ltnc::ConfigError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    }
  }
  std::vector<std::string> errors = ltnc::validate_kb(kb);
  for (const auto& e : errors) std::cerr << kb_path << ": " << e << "\n";
  std::cout << kb_path << ": " << kb.rules.size() << " rules\n";

  bool curricula_ok = true;
  for (const auto& path : curriculum_paths) {
    try {
      ltnc::Curriculum cur =
          ltnc::parse_curriculum(read_file(path), std::filesystem::path(path).stem().string());
      auto errs = ltnc::validate_curriculum(cur, kb);
      for (const auto& e : errs) std::cerr << path << ": " << e << "\n";
      if (!errs.empty()) curricula_ok = false;
      std::cout << path << ": " << cur.stages.size() << " stages";
      std::size_t n = 0;
      for (const auto& s : cur.stages) n += s.rule_ids.size();
      std::cout << ", " << n << " rule assignments\n";
    } catch (const ltnc::IoError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 4;
    } catch (const ltnc::ParseError& e) {
      std::cerr << path << ": " << e.what() << "\n";
      curricula_ok = false;
    }
  }
  return (errors.empty() && curricula_ok) ? 0 : 1;
}

int cmd_trace(const std::string& in_path, const std::string& out_path,
              const std::string& curriculum, std::int64_t seed, int stage,
              const std::string& query) {
  try {
    auto rows = ltnc::parse_trace_csv(read_file(in_path));
    std::string out = ltnc::k_trace_header;
    out += '\n';
    std::size_t kept = 0;
    for (const auto& r : rows) {
      if (!curriculum.empty() && r.curriculum != curriculum) continue;
      if (seed >= 0 && r.seed != static_cast<std::uint64_t>(seed)) continue;
      if (stage > 0 && r.stage != stage) continue;
      if (!query.empty() && r.query != query) continue;
      out += std::to_string(r.seed) + ',' + r.curriculum + ',' + std::to_string(r.stage) + ',' +
             std::to_string(r.epoch) + ',' + r.query + ',' + ltnc::detail::format_real6(r.sat) +
             '\n';
      ++kept;
    }
    if (out_path == "-") {
      std::cout << out;
    } else {
      ltnc::detail::atomic_write_file(out_path, out);
      std::cout << "wrote " << kept << " rows to " << out_path << "\n";
    }
    return 0;
  } catch (const ltnc::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Train fuzzy first-order rule bases in staged curricula with rehearsal"};
  app.require_subcommand(1);

  // --- run ---------------------------------------------------------------
  auto* run = app.add_subcommand("run", "Run curricula over a seed sweep and write CSV reports");
  std::string config_path;
  std::string curricula_arg, seeds_arg;
  ltnc::ExperimentConfig cfg;
  run->add_option("--config", config_path, "key = value config file; flags override it");
  auto* opt_task = run->add_option("--task", cfg.task, "Task: pet or sf");
  auto* opt_curricula =
      run->add_option("--curricula", curricula_arg, "Comma list: baseline,random,ts,kc");
  auto* opt_seeds =
      run->add_option("--seeds", seeds_arg, "Seed count N (runs 1..N) or comma list");
  auto* opt_epochs = run->add_option("--epochs", cfg.epochs, "Epochs per stage");
  auto* opt_lr = run->add_option("--lr", cfg.lr, "Adam learning rate");
  auto* opt_recall = run->add_option("--recall", cfg.recall, "Rehearsal fraction in [0,1]");
  auto* opt_p = run->add_option("--p", cfg.p, "Quantifier aggregator exponent (>= 1)");
  auto* opt_p_kb = run->add_option("--p-kb", cfg.p_kb, "Rule-set aggregator exponent (>= 1)");
  auto* opt_out = run->add_option("--out", cfg.out, "Output directory");
  auto* opt_jobs = run->add_option("--jobs", cfg.jobs, "Concurrent runs");
  auto* opt_task_seed = run->add_option("--task-seed", cfg.task_seed, "Dataset seed");

  // --- check ---------------------------------------------------------------
  auto* check = app.add_subcommand("check", "Parse and validate a KB file (and curricula)");
  std::string kb_path, check_task;
  std::vector<std::string> curriculum_paths;
  check->add_option("kb", kb_path, "KB file (`id : formula` lines)")->required();
  check->add_option("curriculum", curriculum_paths, "Curriculum files (`stage k: ids` lines)");
  check->add_option("--task", check_task, "Validate against this task's groundings (pet|sf)");

  // --- trace ---------------------------------------------------------------
  auto* trace = app.add_subcommand("trace", "Re-emit slices of a trace CSV");
  std::string trace_in, trace_out = "-", trace_cur, trace_query;
  std::int64_t trace_seed = -1;
  int trace_stage = 0;
  trace->add_option("--in", trace_in, "trace.csv to read")->required();
  trace->add_option("--out", trace_out, "Output file, or - for stdout");
  trace->add_option("--curriculum", trace_cur, "Keep only this curriculum");
  trace->add_option("--seed", trace_seed, "Keep only this seed");
  trace->add_option("--stage", trace_stage, "Keep only this stage");
  trace->add_option("--query", trace_query, "Keep only this query");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    // Precedence: built-in defaults < config file < explicit flags.
    if (!config_path.empty()) {
      ltnc::ExperimentConfig from_file;
      try {
        from_file = ltnc::parse_config_text(read_file(config_path));
      } catch (const ltnc::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
      } catch (const ltnc::ConfigError& e) {
        std::cerr << "error: " << config_path << ": " << e.what() << "\n";
        return 2;
      }
      if (!*opt_task) cfg.task = from_file.task;
      if (!*opt_curricula) cfg.curricula = from_file.curricula;
      if (!*opt_seeds) cfg.seeds = from_file.seeds;
      if (!*opt_epochs) cfg.epochs = from_file.epochs;
      if (!*opt_lr) cfg.lr = from_file.lr;
      if (!*opt_recall) cfg.recall = from_file.recall;
      if (!*opt_p) cfg.p = from_file.p;
      if (!*opt_p_kb) cfg.p_kb = from_file.p_kb;
      if (!*opt_out) cfg.out = from_file.out;
      if (!*opt_jobs) cfg.jobs = from_file.jobs;
      if (!*opt_task_seed) cfg.task_seed = from_file.task_seed;
    }
    try {
      if (*opt_curricula) ltnc::apply_config_entry(cfg, "curricula", curricula_arg);
      if (*opt_seeds) ltnc::apply_config_entry(cfg, "seeds", seeds_arg);
    } catch (const ltnc::ConfigError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    }
    return cmd_run(cfg);
  }
  if (check->parsed()) return cmd_check(kb_path, curriculum_paths, check_task);
  if (trace->parsed()) return cmd_trace(trace_in, trace_out, trace_cur, trace_seed, trace_stage,
                                        trace_query);
  return 2;
}
