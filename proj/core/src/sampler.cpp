#include "dlbs/sampler.hpp"

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include "dlbs/rng.hpp"

namespace dlbs {

namespace {

void check_step(int t, int T, int lo, const char* what) {
  if (t < lo || t > T) {
    throw std::invalid_argument(std::string(what) + " out of range: " +
                                std::to_string(t));
  }
}

// Deterministic DDIM along a decreasing timestep grid. One model call per
// grid point except the last: the output produced at grid[i] is reused for
// the update into grid[i+1].
CleanEstimate ddim_chain(const Eigen::VectorXd& z0, const std::vector<int>& grid,
                         const Denoiser& denoiser,
                         const NoiseSchedule& schedule) {
  CleanEstimate est;
  est.kind = CleanEstimate::Kind::kLookahead;
  Eigen::VectorXd z = z0;
  int nfe = 0;
  if (grid.size() >= 2) {
    Eigen::VectorXd eps = denoiser.epsilon(z, grid[0]);
    ++nfe;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
      const int src = grid[i];
      const int dst = grid[i + 1];
      const Eigen::VectorXd clean =
          clean_from_epsilon(z, eps, schedule.alpha_bar[src]);
      z = std::sqrt(schedule.alpha_bar[dst]) * clean +
          std::sqrt(1.0 - schedule.alpha_bar[dst]) * eps;
      if (i + 2 < grid.size()) {
        eps = denoiser.epsilon(z, dst);
        ++nfe;
      }
    }
  }
  est.value = Latent{z, grid.empty() ? 0 : grid.back()};
  est.nfe_cost = nfe;
  return est;
}

// Deterministic first-order DPMSolver++ update. The src == dst guard keeps
// degenerate grid transitions exact even where lambda is infinite.
Eigen::VectorXd dpm_ode_step(const Eigen::VectorXd& z, int src, int dst,
                             const Eigen::VectorXd& eps,
                             const DpmCoefficients& dpm) {
  if (src == dst) return z;
  const Eigen::VectorXd clean = clean_from_epsilon(
      z, eps, dpm.marginal_alpha[src], dpm.marginal_sigma[src]);
  const double h = dpm.half_log_snr[dst] - dpm.half_log_snr[src];
  return (dpm.marginal_sigma[dst] / dpm.marginal_sigma[src]) * z +
         dpm.marginal_alpha[dst] * (1.0 - std::exp(-h)) * clean;
}

CleanEstimate dpm_chain(const Eigen::VectorXd& z0, const std::vector<int>& grid,
                        const Denoiser& denoiser, const DpmCoefficients& dpm) {
  CleanEstimate est;
  est.kind = CleanEstimate::Kind::kLookahead;
  Eigen::VectorXd z = z0;
  int nfe = 0;
  if (grid.size() >= 2) {
    Eigen::VectorXd eps = denoiser.epsilon(z, grid[0]);
    ++nfe;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
      z = dpm_ode_step(z, grid[i], grid[i + 1], eps, dpm);
      if (i + 2 < grid.size()) {
        eps = denoiser.epsilon(z, grid[i + 1]);
        ++nfe;
      }
    }
  }
  est.value = Latent{z, grid.empty() ? 0 : grid.back()};
  est.nfe_cost = nfe;
  return est;
}

// Index-space interpolation between the entry step and the terminal step:
// M_prime + 1 grid points, consecutive duplicates kept or dropped by the
// caller. With dedup = true this mirrors lookahead_grid.
std::vector<int> dpm_index_grid(int entry, int M_prime, int T, bool dedup) {
  check_step(entry, T, 0, "entry step");
  if (M_prime < 1) throw std::invalid_argument("M_prime must be >= 1");
  const std::int64_t s = static_cast<std::int64_t>(T) - entry;
  std::vector<int> grid;
  grid.reserve(static_cast<std::size_t>(M_prime) + 1);
  for (int u = 0; u <= M_prime; ++u) {
    const std::int64_t idx =
        (s * (M_prime - u) + static_cast<std::int64_t>(T) * u) / M_prime;
    const int t = T - static_cast<int>(idx);
    if (dedup && !grid.empty() && grid.back() == t) continue;
    grid.push_back(t);
  }
  return grid;
}

}  // namespace

TransitionMean ddim_transition_mean(const Eigen::VectorXd& z, int t,
                                    const Denoiser& denoiser,
                                    const NoiseSchedule& schedule,
                                    const DdimNoiseScale& noise) {
  check_step(t, schedule.T, 1, "transition step");
  const double abar_t = schedule.alpha_bar[static_cast<std::size_t>(t)];
  const double abar_prev = schedule.alpha_bar[static_cast<std::size_t>(t - 1)];
  const double sigma_t = noise.sigma[static_cast<std::size_t>(t)];
  double radicand = 1.0 - abar_prev - sigma_t * sigma_t;
  if (radicand < -1e-12) {
    throw std::invalid_argument(
        "negative direction coefficient: schedule/eta configuration error");
  }
  if (radicand < 0.0) radicand = 0.0;

  TransitionMean mean;
  mean.model_output = denoiser.epsilon(z, t);
  const Eigen::VectorXd clean = clean_from_epsilon(z, mean.model_output, abar_t);
  mean.latent.values =
      std::sqrt(abar_prev) * clean + std::sqrt(radicand) * mean.model_output;
  mean.latent.step = t - 1;
  mean.source_step = t;
  return mean;
}

std::vector<Latent> ddim_sample_candidates(const TransitionMean& mean,
                                           double sigma_t, int K,
                                           const CandidateKey& key) {
  if (K < 1) throw std::invalid_argument("K must be >= 1");
  std::vector<Latent> out;
  out.reserve(static_cast<std::size_t>(K));
  const auto d = mean.latent.values.size();
  for (int i = 0; i < K; ++i) {
    RandomStream stream(key.seed, StreamPurpose::kCandidate, key.step, key.beam,
                        static_cast<uint32_t>(i));
    out.push_back(Latent{mean.latent.values + sigma_t * stream.normal_vector(d),
                         mean.latent.step});
  }
  return out;
}

CleanEstimate tweedie_estimate(const Eigen::VectorXd& z, int t,
                               const Denoiser& denoiser,
                               const NoiseSchedule& schedule) {
  check_step(t, schedule.T, 0, "estimate step");
  CleanEstimate est;
  est.kind = CleanEstimate::Kind::kTweedie;
  if (t == 0) {
    est.value = Latent{z, 0};
    est.nfe_cost = 0;
    return est;
  }
  const Eigen::VectorXd eps = denoiser.epsilon(z, t);
  est.value = Latent{clean_from_epsilon(
                         z, eps, schedule.alpha_bar[static_cast<std::size_t>(t)]),
                     0};
  est.nfe_cost = 1;
  return est;
}

CleanEstimate lookahead_estimate(const Eigen::VectorXd& z, int entry_step,
                                 int T_prime, const Denoiser& denoiser,
                                 const NoiseSchedule& schedule) {
  check_step(entry_step, schedule.T, 0, "entry step");
  const LookaheadGrid grid = lookahead_grid(entry_step, T_prime);
  CleanEstimate est = ddim_chain(z, grid.steps, denoiser, schedule);
  est.effective_T_prime = grid.effective_T_prime;
  return est;
}

TransitionMean dpmpp_transition_mean(const Eigen::VectorXd& z, int src, int dst,
                                     const Denoiser& denoiser,
                                     const DpmCoefficients& dpm) {
  const int T = static_cast<int>(dpm.half_log_snr.size()) - 1;
  check_step(src, T, 1, "source step");
  check_step(dst, T, 0, "destination step");
  if (src == dst) {
    TransitionMean mean;
    mean.model_output = denoiser.epsilon(z, src);
    mean.latent.values = z;
    mean.latent.step = dst;
    mean.source_step = src;
    return mean;
  }
  const double h = dpm.half_log_snr[static_cast<std::size_t>(dst)] -
                   dpm.half_log_snr[static_cast<std::size_t>(src)];
  if (!(h > 0.0)) {
    throw std::invalid_argument("dpm transition requires increasing half-log-SNR");
  }
  TransitionMean mean;
  mean.model_output = denoiser.epsilon(z, src);
  const Eigen::VectorXd clean =
      clean_from_epsilon(z, mean.model_output, dpm.marginal_alpha[src],
                         dpm.marginal_sigma[src]);
  mean.latent.values =
      (dpm.marginal_sigma[dst] / dpm.marginal_sigma[src]) * std::exp(-h) * z +
      dpm.marginal_alpha[dst] * (1.0 - std::exp(-2.0 * h)) * clean;
  mean.latent.step = dst;
  mean.source_step = src;
  return mean;
}

std::vector<Latent> dpmpp_sample_candidates(const TransitionMean& mean, int dst,
                                            double h, int K,
                                            const DpmCoefficients& dpm,
                                            const CandidateKey& key) {
  if (K < 1) throw std::invalid_argument("K must be >= 1");
  const double scale = dpm.marginal_sigma[static_cast<std::size_t>(dst)] *
                       std::sqrt(1.0 - std::exp(-2.0 * h));
  std::vector<Latent> out;
  out.reserve(static_cast<std::size_t>(K));
  const auto d = mean.latent.values.size();
  for (int i = 0; i < K; ++i) {
    RandomStream stream(key.seed, StreamPurpose::kCandidate, key.step, key.beam,
                        static_cast<uint32_t>(i));
    out.push_back(Latent{mean.latent.values + scale * stream.normal_vector(d),
                         dst});
  }
  return out;
}

CleanEstimate dpmpp_jump_estimate(const Eigen::VectorXd& z, int src,
                                  const Denoiser& denoiser,
                                  const DpmCoefficients& dpm) {
  const int T = static_cast<int>(dpm.half_log_snr.size()) - 1;
  check_step(src, T, 0, "source step");
  CleanEstimate est;
  est.kind = CleanEstimate::Kind::kTweedie;
  if (src == 0) {
    est.value = Latent{z, 0};
    est.nfe_cost = 0;
    return est;
  }
  // The terminal step has sigma = 0, so the one-jump update collapses to the
  // data prediction itself.
  const Eigen::VectorXd eps = denoiser.epsilon(z, src);
  est.value = Latent{clean_from_epsilon(z, eps, dpm.marginal_alpha[src],
                                        dpm.marginal_sigma[src]),
                     0};
  est.nfe_cost = 1;
  return est;
}

CleanEstimate dpmpp_lookahead(const Eigen::VectorXd& z, int entry, int M_prime,
                              const Denoiser& denoiser,
                              const DpmCoefficients& dpm) {
  const int T = static_cast<int>(dpm.half_log_snr.size()) - 1;
  const std::vector<int> grid = dpm_index_grid(entry, M_prime, T, true);
  CleanEstimate est = dpm_chain(z, grid, denoiser, dpm);
  est.effective_T_prime = static_cast<int>(grid.size()) - 1;
  if (est.effective_T_prime < 1) est.effective_T_prime = 1;
  return est;
}

CleanEstimate ddim_selection_estimate(const Eigen::VectorXd& z, int entry_step,
                                      bool lookahead, int T_prime,
                                      const Denoiser& denoiser,
                                      const NoiseSchedule& schedule) {
  check_step(entry_step, schedule.T, 0, "entry step");
  if (!lookahead) {
    const Eigen::VectorXd eps = denoiser.epsilon(z, entry_step);
    CleanEstimate est;
    est.kind = CleanEstimate::Kind::kTweedie;
    est.value = Latent{
        clean_from_epsilon(
            z, eps, schedule.alpha_bar[static_cast<std::size_t>(entry_step)]),
        0};
    est.nfe_cost = 1;
    return est;
  }
  if (T_prime < 1) throw std::invalid_argument("T_prime must be >= 1");
  std::vector<int> grid;
  grid.reserve(static_cast<std::size_t>(T_prime) + 1);
  for (int s = T_prime; s >= 0; --s) {
    grid.push_back(static_cast<int>(
        (static_cast<std::int64_t>(s) * entry_step) / T_prime));
  }
  CleanEstimate est = ddim_chain(z, grid, denoiser, schedule);
  est.effective_T_prime = T_prime;
  return est;
}

CleanEstimate dpmpp_selection_estimate(const Eigen::VectorXd& z, int entry,
                                       bool lookahead, int M_prime,
                                       const Denoiser& denoiser,
                                       const DpmCoefficients& dpm) {
  const int T = static_cast<int>(dpm.half_log_snr.size()) - 1;
  if (!lookahead) {
    const Eigen::VectorXd eps = denoiser.epsilon(z, entry);
    CleanEstimate est;
    est.kind = CleanEstimate::Kind::kTweedie;
    est.value = Latent{clean_from_epsilon(z, eps, dpm.marginal_alpha[entry],
                                          dpm.marginal_sigma[entry]),
                       0};
    est.nfe_cost = 1;
    return est;
  }
  const std::vector<int> grid = dpm_index_grid(entry, M_prime, T, false);
  CleanEstimate est = dpm_chain(z, grid, denoiser, dpm);
  est.effective_T_prime = M_prime;
  return est;
}

}  // namespace dlbs
