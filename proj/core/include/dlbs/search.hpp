#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "dlbs/oracle.hpp"
#include "dlbs/sampler.hpp"
#include "dlbs/schedule.hpp"

namespace dlbs {

enum class Method { kBon, kGreedy, kDlbs, kDlbsLa };
enum class Solver { kDdim, kDpmpp };

Method method_from_string(const std::string& name);
Solver solver_from_string(const std::string& name);
std::string to_string(Method method);
std::string to_string(Solver solver);

struct SearchConfig {
  Method method = Method::kDlbs;
  int K = 1;   // candidates per beam
  int B = 1;   // beams
  int T_prime = 1;  // lookahead steps (dlbs_la only)
  double eta = 1.0;
  Solver solver = Solver::kDdim;
  // Inclusive timestep interval [step_low, step_high] where candidate
  // selection is active; step_high = -1 means the full trajectory.
  int step_high = -1;
  int step_low = 1;
  std::uint64_t seed = 0;
};

void validate(const SearchConfig& config, int T);

struct SearchTraceStep {
  int step = 0;
  std::vector<double> rewards;   // candidate rewards, beam-major (j*K + i)
  std::vector<int> selected;     // chosen candidate indices, ascending
};

struct SearchResult {
  Latent best_sample;
  double best_reward = 0.0;
  std::int64_t nfe = 0;
  double wall_clock_s = 0.0;
  std::vector<Latent> final_beams;
  std::vector<double> final_rewards;
  std::vector<SearchTraceStep> trace;  // filled only when requested
  std::vector<std::string> warnings;
};

// Greedy argmax-then-remove with ties broken by ascending candidate index.
// The returned indices are sorted ascending so that surviving candidates
// keep their beam-slot order (with K=1 every beam survives in place, which
// is what makes dlbs degenerate to bon bit-for-bit).
std::vector<int> select_top_b_indices(const std::vector<double>& rewards, int B);

std::vector<Latent> select_top_b(
    const std::vector<std::pair<Latent, CleanEstimate>>& candidates,
    const std::vector<double>& rewards, int B);

// Closed-form model-call count; matches the audited counter exactly.
// bon: T*B. greedy/dlbs: one estimate call per candidate at each
// selection-active step. dlbs_la: T_prime calls per candidate instead.
std::int64_t nfe_estimate(Method method, int K, int B, int T, int T_prime,
                          Solver solver);
std::int64_t nfe_estimate(const SearchConfig& config, int T);

SearchResult run_search(const SearchConfig& config, const Denoiser& denoiser,
                        const NoiseSchedule& schedule, const Reward& reward,
                        int workers = 1, bool want_trace = false);

using AxisValue = std::variant<std::int64_t, double, std::string>;
using Axes = std::vector<std::pair<std::string, std::vector<AxisValue>>>;

// Cartesian product of axis values applied onto the base config, first axis
// slowest. Axis names: method, K, B, T_prime, eta, solver, step_high,
// step_low. Unknown names or mistyped values throw before any run starts.
std::vector<SearchConfig> expand_axes(const SearchConfig& base,
                                      const Axes& axes);

std::vector<SearchResult> sweep(
    const SearchConfig& base, const Axes& axes,
    const std::vector<std::uint64_t>& seeds, const Denoiser& denoiser,
    const NoiseSchedule& schedule, const Reward& reward, int workers = 1,
    const std::function<void(const SearchConfig&, const SearchResult&)>&
        on_result = nullptr);

// Mean over ordered pairs of (1 - <v_i, v_j>) with unit-norm embeddings.
using Embed = std::function<Eigen::VectorXd(const Latent&)>;
double diversity_of_results(const std::vector<Latent>& samples,
                            const Embed& embed);

}  // namespace dlbs
