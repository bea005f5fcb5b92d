#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dlbs/harness/config.hpp"
#include "dlbs/harness/record.hpp"

namespace dlbs {

struct HarnessOptions {
  std::string out_dir = "runs";
  int workers = 1;
  bool resume = false;
  std::uint64_t seed_offset = 0;
};

// One search run: executes (or, with resume, reloads) the configured search,
// writes records/<hash>-<seed>.json plus an optional trace file, and
// rebuilds results.csv.
RunRecord harness_search(const RunSpec& spec, const HarnessOptions& options);

// Axes x seeds sweep. Completed (config_hash, seed) pairs are skipped when
// resuming; a failing run is recorded with status=failed and the sweep
// continues.
std::vector<RunRecord> harness_sweep(const RunSpec& spec,
                                     const HarnessOptions& options);

struct AblateRow {
  int T_prime = 0;
  double mean_error = 0.0;
  double mean_reward = 0.0;
};

// For each configured T_prime: mean lookahead estimator error against the
// full deterministic endpoint at sampled mid-trajectory latents, and mean
// end-to-end dlbs_la final reward over the configured seeds. Writes
// ablate.csv.
std::vector<AblateRow> harness_ablate(const RunSpec& spec,
                                      const HarnessOptions& options);

// Executes one run without touching the filesystem.
RunRecord execute_run(const RunSpec& spec, const SearchConfig& search,
                      int workers, bool want_trace,
                      std::vector<SearchTraceStep>* trace_out = nullptr);

}  // namespace dlbs
