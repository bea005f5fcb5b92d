#include "dlbs/search.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>

#include "dlbs/parallel.hpp"
#include "dlbs/rng.hpp"

namespace dlbs {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Audits every model call, including the ones inside estimator chains.
class CountingDenoiser final : public Denoiser {
 public:
  CountingDenoiser(const Denoiser& inner, std::atomic<std::int64_t>& count)
      : inner_(inner), count_(count) {}

  Eigen::VectorXd epsilon(const Eigen::VectorXd& z, int t) const override {
    count_.fetch_add(1, std::memory_order_relaxed);
    return inner_.epsilon(z, t);
  }

  int dim() const override { return inner_.dim(); }

 private:
  const Denoiser& inner_;
  std::atomic<std::int64_t>& count_;
};

}  // namespace

Method method_from_string(const std::string& name) {
  if (name == "bon") return Method::kBon;
  if (name == "greedy") return Method::kGreedy;
  if (name == "dlbs") return Method::kDlbs;
  if (name == "dlbs_la") return Method::kDlbsLa;
  throw std::invalid_argument("unknown method: " + name);
}

Solver solver_from_string(const std::string& name) {
  if (name == "ddim") return Solver::kDdim;
  if (name == "dpmpp") return Solver::kDpmpp;
  throw std::invalid_argument("unknown solver: " + name);
}

std::string to_string(Method method) {
  switch (method) {
    case Method::kBon: return "bon";
    case Method::kGreedy: return "greedy";
    case Method::kDlbs: return "dlbs";
    case Method::kDlbsLa: return "dlbs_la";
  }
  throw std::logic_error("bad method enum");
}

std::string to_string(Solver solver) {
  switch (solver) {
    case Solver::kDdim: return "ddim";
    case Solver::kDpmpp: return "dpmpp";
  }
  throw std::logic_error("bad solver enum");
}

void validate(const SearchConfig& config, int T) {
  if (T < 1) throw std::invalid_argument("schedule length must be >= 1");
  if (config.K < 1) throw std::invalid_argument("K must be >= 1");
  if (config.B < 1) throw std::invalid_argument("B must be >= 1");
  if (config.method == Method::kBon && config.K != 1) {
    throw std::invalid_argument("bon requires K = 1");
  }
  if (config.method == Method::kGreedy && config.B != 1) {
    throw std::invalid_argument("greedy requires B = 1");
  }
  if (config.method == Method::kDlbsLa && config.T_prime < 1) {
    throw std::invalid_argument("dlbs_la requires T_prime >= 1");
  }
  if (config.T_prime < 1) throw std::invalid_argument("T_prime must be >= 1");
  if (!(config.eta >= 0.0 && config.eta <= 1.0)) {
    throw std::invalid_argument("eta must lie in [0, 1]");
  }
  if (config.step_low < 0) throw std::invalid_argument("step_low must be >= 0");
  if (config.step_high >= 0 && config.step_high < config.step_low) {
    throw std::invalid_argument("step_high must be >= step_low");
  }
}

std::vector<int> select_top_b_indices(const std::vector<double>& rewards,
                                      int B) {
  const int n = static_cast<int>(rewards.size());
  if (B < 1) throw std::invalid_argument("B must be >= 1");
  if (n < B) throw std::invalid_argument("fewer candidates than beams");
  std::vector<bool> taken(rewards.size(), false);
  std::vector<int> chosen;
  chosen.reserve(static_cast<std::size_t>(B));
  for (int round = 0; round < B; ++round) {
    int best = -1;
    for (int i = 0; i < n; ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      if (best < 0 || rewards[static_cast<std::size_t>(i)] >
                          rewards[static_cast<std::size_t>(best)]) {
        best = i;
      }
    }
    taken[static_cast<std::size_t>(best)] = true;
    chosen.push_back(best);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

std::vector<Latent> select_top_b(
    const std::vector<std::pair<Latent, CleanEstimate>>& candidates,
    const std::vector<double>& rewards, int B) {
  if (candidates.size() != rewards.size()) {
    throw std::invalid_argument("candidate/reward length mismatch");
  }
  std::vector<Latent> out;
  out.reserve(static_cast<std::size_t>(B));
  for (int i : select_top_b_indices(rewards, B)) {
    out.push_back(candidates[static_cast<std::size_t>(i)].first);
  }
  return out;
}

std::int64_t nfe_estimate(const SearchConfig& config, int T) {
  validate(config, T);
  const std::int64_t base = static_cast<std::int64_t>(T) * config.B;
  if (config.method == Method::kBon) return base;
  const int hi = config.step_high < 0 ? T : std::min(config.step_high, T);
  const int lo = std::max(config.step_low, 1);
  const std::int64_t active = hi >= lo ? hi - lo + 1 : 0;
  const std::int64_t per_candidate =
      config.method == Method::kDlbsLa ? config.T_prime : 1;
  return base + active * config.K * config.B * per_candidate;
}

std::int64_t nfe_estimate(Method method, int K, int B, int T, int T_prime,
                          Solver solver) {
  SearchConfig config;
  config.method = method;
  config.K = K;
  config.B = B;
  config.T_prime = T_prime;
  config.solver = solver;
  return nfe_estimate(config, T);
}

SearchResult run_search(const SearchConfig& config, const Denoiser& denoiser,
                        const NoiseSchedule& schedule, const Reward& reward,
                        int workers, bool want_trace) {
  validate(config, schedule.T);
  const auto start = std::chrono::steady_clock::now();

  const int T = schedule.T;
  const int B = config.B;
  const int d = denoiser.dim();
  const int hi = config.step_high < 0 ? T : config.step_high;
  const int lo = std::max(config.step_low, 1);
  const bool lookahead = config.method == Method::kDlbsLa;
  const bool ddim = config.solver == Solver::kDdim;

  std::atomic<std::int64_t> nfe{0};
  CountingDenoiser counted(denoiser, nfe);

  DdimNoiseScale noise;
  DpmCoefficients dpm;
  if (ddim) {
    noise = ddim_noise_scale(schedule, config.eta);
  } else {
    dpm = dpm_coefficients(schedule);
  }

  std::vector<Eigen::VectorXd> beams(static_cast<std::size_t>(B));
  for (int j = 0; j < B; ++j) {
    RandomStream init(config.seed, StreamPurpose::kInit,
                      static_cast<uint32_t>(T), static_cast<uint32_t>(j), 0);
    beams[static_cast<std::size_t>(j)] = init.normal_vector(d);
  }

  SearchResult result;
  std::vector<double> final_rewards(static_cast<std::size_t>(B), 0.0);
  bool have_final_rewards = false;
  // Non-finite flags are gathered per slot and reported in index order, so
  // the warning list does not depend on worker scheduling.
  auto flush_warnings = [&](const std::vector<unsigned char>& flags, int step) {
    for (std::size_t c = 0; c < flags.size(); ++c) {
      if (!flags[c]) continue;
      result.warnings.push_back("non-finite reward for candidate " +
                                std::to_string(c) + " at step " +
                                std::to_string(step) + "; treated as -inf");
    }
  };

  for (int t = T; t >= 1; --t) {
    const bool selecting =
        config.method != Method::kBon && t >= lo && t <= hi;
    const int Kc = selecting ? config.K : 1;

    std::vector<TransitionMean> means(static_cast<std::size_t>(B));
    parallel_for(static_cast<std::size_t>(B), workers, [&](std::size_t j) {
      means[j] = ddim ? ddim_transition_mean(beams[j], t, counted, schedule,
                                             noise)
                      : dpmpp_transition_mean(beams[j], t, t - 1, counted, dpm);
    });

    const double h_t =
        ddim ? 0.0
             : dpm.half_log_snr[static_cast<std::size_t>(t - 1)] -
                   dpm.half_log_snr[static_cast<std::size_t>(t)];
    std::vector<Latent> cands(static_cast<std::size_t>(B) * Kc);
    parallel_for(static_cast<std::size_t>(B), workers, [&](std::size_t j) {
      const CandidateKey key{config.seed, static_cast<uint32_t>(t),
                             static_cast<uint32_t>(j)};
      auto drawn =
          ddim ? ddim_sample_candidates(
                     means[j], noise.sigma[static_cast<std::size_t>(t)], Kc,
                     key)
               : dpmpp_sample_candidates(means[j], t - 1, h_t, Kc, dpm, key);
      for (int i = 0; i < Kc; ++i) {
        cands[j * Kc + static_cast<std::size_t>(i)] =
            std::move(drawn[static_cast<std::size_t>(i)]);
      }
    });

    if (!selecting) {
      for (int j = 0; j < B; ++j) {
        beams[static_cast<std::size_t>(j)] =
            std::move(cands[static_cast<std::size_t>(j)].values);
      }
      continue;
    }

    const std::size_t n = cands.size();
    std::vector<double> rewards(n, 0.0);
    std::vector<unsigned char> nonfinite(n, 0);
    parallel_for(n, workers, [&](std::size_t c) {
      const CleanEstimate est =
          ddim ? ddim_selection_estimate(cands[c].values, t - 1, lookahead,
                                         config.T_prime, counted, schedule)
               : dpmpp_selection_estimate(cands[c].values, t - 1, lookahead,
                                          config.T_prime, counted, dpm);
      const double r = reward(est.value.values);
      if (std::isfinite(r)) {
        rewards[c] = r;
      } else {
        rewards[c] = kNegInf;
        nonfinite[c] = 1;
      }
    });
    flush_warnings(nonfinite, t);

    std::vector<int> chosen;
    if (t > 1) {
      chosen = select_top_b_indices(rewards, B);
      std::vector<Eigen::VectorXd> next(static_cast<std::size_t>(B));
      for (int j = 0; j < B; ++j) {
        next[static_cast<std::size_t>(j)] = std::move(
            cands[static_cast<std::size_t>(chosen[static_cast<std::size_t>(j)])]
                .values);
      }
      beams = std::move(next);
    } else {
      // sigma_1 = 0 makes the Kc candidates of each beam identical; the
      // beams pass through unselected and the final argmax decides.
      chosen.reserve(static_cast<std::size_t>(B));
      for (int j = 0; j < B; ++j) {
        const std::size_t slot = static_cast<std::size_t>(j) * Kc;
        beams[static_cast<std::size_t>(j)] = std::move(cands[slot].values);
        final_rewards[static_cast<std::size_t>(j)] = rewards[slot];
        chosen.push_back(static_cast<int>(slot));
      }
      have_final_rewards = true;
    }
    if (want_trace) {
      result.trace.push_back(SearchTraceStep{t, rewards, chosen});
    }
  }

  if (!have_final_rewards) {
    std::vector<unsigned char> nonfinite(static_cast<std::size_t>(B), 0);
    parallel_for(static_cast<std::size_t>(B), workers, [&](std::size_t j) {
      const double r = reward(beams[j]);
      if (std::isfinite(r)) {
        final_rewards[j] = r;
      } else {
        final_rewards[j] = kNegInf;
        nonfinite[j] = 1;
      }
    });
    flush_warnings(nonfinite, 0);
  }

  int best = 0;
  for (int j = 1; j < B; ++j) {
    if (final_rewards[static_cast<std::size_t>(j)] >
        final_rewards[static_cast<std::size_t>(best)]) {
      best = j;
    }
  }
  result.final_beams.reserve(static_cast<std::size_t>(B));
  for (int j = 0; j < B; ++j) {
    result.final_beams.push_back(
        Latent{std::move(beams[static_cast<std::size_t>(j)]), 0});
  }
  result.final_rewards = final_rewards;
  result.best_sample = result.final_beams[static_cast<std::size_t>(best)];
  result.best_reward = final_rewards[static_cast<std::size_t>(best)];
  result.nfe = nfe.load();
  result.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return result;
}

std::vector<SearchConfig> expand_axes(const SearchConfig& base,
                                      const Axes& axes) {
  auto apply = [](SearchConfig& config, const std::string& name,
                  const AxisValue& value) {
    auto as_int = [&]() -> int {
      if (const auto* v = std::get_if<std::int64_t>(&value)) {
        return static_cast<int>(*v);
      }
      throw std::invalid_argument("axis " + name + " expects an integer");
    };
    auto as_double = [&]() -> double {
      if (const auto* v = std::get_if<std::int64_t>(&value)) {
        return static_cast<double>(*v);
      }
      if (const auto* v = std::get_if<double>(&value)) return *v;
      throw std::invalid_argument("axis " + name + " expects a number");
    };
    auto as_string = [&]() -> const std::string& {
      if (const auto* v = std::get_if<std::string>(&value)) return *v;
      throw std::invalid_argument("axis " + name + " expects a string");
    };
    if (name == "method") {
      config.method = method_from_string(as_string());
    } else if (name == "solver") {
      config.solver = solver_from_string(as_string());
    } else if (name == "K") {
      config.K = as_int();
    } else if (name == "B") {
      config.B = as_int();
    } else if (name == "T_prime") {
      config.T_prime = as_int();
    } else if (name == "eta") {
      config.eta = as_double();
    } else if (name == "step_high") {
      config.step_high = as_int();
    } else if (name == "step_low") {
      config.step_low = as_int();
    } else {
      throw std::invalid_argument("unknown sweep axis: " + name);
    }
  };

  std::size_t total = 1;
  for (const auto& axis : axes) {
    if (axis.second.empty()) {
      throw std::invalid_argument("empty sweep axis: " + axis.first);
    }
    total *= axis.second.size();
  }
  std::vector<SearchConfig> out;
  out.reserve(total);
  for (std::size_t combo = 0; combo < total; ++combo) {
    SearchConfig config = base;
    std::size_t stride = total;
    for (const auto& axis : axes) {
      stride /= axis.second.size();
      const std::size_t pick = (combo / stride) % axis.second.size();
      apply(config, axis.first, axis.second[pick]);
    }
    out.push_back(config);
  }
  return out;
}

std::vector<SearchResult> sweep(
    const SearchConfig& base, const Axes& axes,
    const std::vector<std::uint64_t>& seeds, const Denoiser& denoiser,
    const NoiseSchedule& schedule, const Reward& reward, int workers,
    const std::function<void(const SearchConfig&, const SearchResult&)>&
        on_result) {
  const std::vector<SearchConfig> configs = expand_axes(base, axes);
  std::vector<SearchResult> results;
  results.reserve(configs.size() * seeds.size());
  for (const SearchConfig& expanded : configs) {
    for (const std::uint64_t seed : seeds) {
      SearchConfig config = expanded;
      config.seed = seed;
      results.push_back(
          run_search(config, denoiser, schedule, reward, workers));
      if (on_result) on_result(config, results.back());
    }
  }
  return results;
}

double diversity_of_results(const std::vector<Latent>& samples,
                            const Embed& embed) {
  const std::size_t n = samples.size();
  if (n < 2) throw std::domain_error("diversity needs at least two samples");
  std::vector<Eigen::VectorXd> vs;
  vs.reserve(n);
  for (const Latent& sample : samples) {
    Eigen::VectorXd v = embed(sample);
    if (v.norm() == 0.0) throw std::domain_error("zero-norm embedding");
    vs.push_back(std::move(v));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      total += 1.0 - vs[i].dot(vs[j]);
    }
  }
  return total / (static_cast<double>(n) * static_cast<double>(n - 1));
}

}  // namespace dlbs
