#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dlbs/harness/record.hpp"

namespace dlbs {

struct GroupStats {
  std::vector<std::string> key_values;  // one per grouping field
  double mean = 0.0;
  double stderr_mean = 0.0;  // unbiased sample variance based
  int count = 0;
};

struct PairStats {
  std::string method_a;
  std::string method_b;
  int n = 0;
  double mean_diff = 0.0;  // mean(final_reward_a - final_reward_b)
  double p_value = 1.0;    // one-sided sign-flip permutation test
};

struct AggregateReport {
  std::vector<std::string> group_fields;
  std::vector<GroupStats> groups;
  std::vector<PairStats> pairs;
};

// Grouping fields: method, solver, problem_name, K, B, T_prime, KB, eta,
// seed. Pairs are method names compared on seed-matched final rewards
// within each problem; unmatched or ambiguous seeds are an error. Records
// with status != ok are excluded from statistics.
AggregateReport aggregate(
    const std::vector<RunRecord>& records,
    const std::vector<std::string>& group_fields,
    const std::vector<std::pair<std::string, std::string>>& method_pairs);

// report.json plus plotdata/*.csv (x, mean, stderr rows over the first
// grouping field, one file per combination of the remaining fields).
void write_report(const std::string& out_dir, const AggregateReport& report);

}  // namespace dlbs
