#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cdpg/metrics.hpp"
#include "cdpg/task.hpp"
#include "cdpg/trainers.hpp"

namespace cdpg {

struct LedgerRow {
  int iteration = 0;
  IterationStats stats;  // zeroed on the iteration-0 row
  std::optional<MetricsReport> metrics;
};

struct RunLedger {
  std::vector<LedgerRow> rows;  // strictly ordered by iteration
  MetricsReport final_metrics;
  uint64_t config_hash = 0;
  std::string config_echo;
  std::vector<std::string> checkpoint_paths;
  std::vector<std::string> token_names;  // for zipf emission
  std::vector<int> infeasible_dropped;
};

// Full metrics pass over the configured eval pool. Exact oracles are used
// whenever the space is enumerable; estimators always run.
MetricsReport compute_metrics(const ExperimentConfig& cfg, const TaskBundle& task,
                              const Policy& pi, int iteration);

// Deterministic end-to-end run: ledger is a pure function of the config
// (which includes the seed). Checkpoints land in cfg.out_dir.
RunLedger run_experiment(const ExperimentConfig& cfg);

// metrics.csv, zipf.csv, config.echo, report.json.
void emit(const RunLedger& ledger, const std::string& dir);

// Subcommands: train, eval, oracle, sweep, compare.
// Exit codes: 0 success, 2 config error, 3 runtime error.
int cli_dispatch(int argc, const char* const* argv);

}  // namespace cdpg
