#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dlbs {

struct RunRecord {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string method;
  int K = 1;
  int B = 1;
  int T_prime = 1;
  double eta = 1.0;
  std::string solver;
  std::string problem_name;
  double final_reward = 0.0;
  std::int64_t nfe = 0;
  double wall_clock_s = 0.0;
  std::string trace_path;  // empty when no trace was written
  std::string status = "ok";
  std::optional<double> diversity;  // final-beam diversity, B >= 2 only
  std::vector<std::string> warnings;
};

// Shortest decimal rendering that round-trips the exact double.
std::string format_double(double value);

std::string record_to_json(const RunRecord& record);
RunRecord record_from_json(const std::string& text);

// records/<config_hash>-<seed>.json under dir.
std::string record_path(const std::string& dir, const RunRecord& record);
std::string record_path(const std::string& dir, const std::string& config_hash,
                        std::uint64_t seed);
void write_record(const std::string& dir, const RunRecord& record);

// Every record under <dir>/records, sorted by (config_hash, seed).
std::vector<RunRecord> scan_records(const std::string& dir);

// Rebuilds <dir>/results.csv from the given records (tmp file + rename).
// Columns are the scalar RunRecord fields.
void write_results_csv(const std::string& dir,
                       const std::vector<RunRecord>& records);

std::vector<RunRecord> load_results_csv(const std::string& path);

}  // namespace dlbs
