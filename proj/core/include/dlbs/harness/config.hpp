#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dlbs/metrics.hpp"
#include "dlbs/oracle.hpp"
#include "dlbs/schedule.hpp"
#include "dlbs/search.hpp"

namespace dlbs {

struct ProblemSpec {
  std::string name;  // preset mixture name
};

struct ScheduleSpec {
  double beta_start = 0.002;
  double beta_end = 0.18;
  int T = 50;
};

struct RewardSpec {
  TestbedRewardKind kind = TestbedRewardKind::kModeDistance;
  // mode_distance: explicit target, or a component index resolved against
  // the problem mixture's mean.
  std::vector<double> target;
  int component = -1;
  double region_radius = 0.0;
  std::vector<double> weights;  // linear
};

struct OutputSpec {
  std::string dir;
  bool trace = false;
};

struct SweepSpec {
  bool present = false;
  Axes axes;
  std::vector<std::uint64_t> seeds;
};

struct AblateSpec {
  bool present = false;
  std::vector<int> T_primes = {1, 2, 3, 6, 12};
  int latents = 200;
  int mid_step = -1;  // -1: T/2
  std::vector<std::uint64_t> seeds;
};

struct RunSpec {
  ProblemSpec problem;
  ScheduleSpec schedule;
  SearchConfig search;
  RewardSpec reward;
  OutputSpec output;
  SweepSpec sweep;
  AblateSpec ablate;
};

// Strict parse: named sections, unknown keys rejected, values type-checked.
// Errors carry the config path and the offending key.
RunSpec load_config(const std::string& path);
RunSpec parse_config(const std::string& text, const std::string& origin);

// Canonical text rendering of the semantic configuration (problem, schedule,
// search minus seed, reward with references resolved), with defaults filled
// and keys sorted; equivalent configs render identically.
std::string canonical_config_text(const RunSpec& spec);

// SHA-256 hex digest of canonical_config_text.
std::string config_hash(const RunSpec& spec);

std::string sha256_hex(const std::string& bytes);

// Problem plumbing resolved from a spec.
GaussianMixture problem_mixture(const RunSpec& spec);
NoiseSchedule problem_schedule(const RunSpec& spec);
Reward problem_reward(const RunSpec& spec);

}  // namespace dlbs
