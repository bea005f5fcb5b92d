#pragma once

#include <vector>

namespace dlbs {

// Discrete variance-preserving schedule. alpha_bar[t] is the cumulative
// signal coefficient of the forward marginal z_t = sqrt(abar) z0 +
// sqrt(1-abar) eps; alpha_bar[0] = 1 so the clean estimate at t=0 is the
// latent itself.
struct NoiseSchedule {
  int T = 0;
  std::vector<double> beta;       // beta[0] unused; beta[1..T]
  std::vector<double> alpha_bar;  // alpha_bar[0..T], strictly decreasing
};

NoiseSchedule linear_beta_schedule(double beta_start, double beta_end, int T);

// Per-step injected-noise standard deviation for stochastic DDIM.
// sigma[1] = 0 (alpha_bar[0] = 1), so the final transition is deterministic.
struct DdimNoiseScale {
  double eta = 0.0;
  std::vector<double> sigma;  // sigma[0] unused; sigma[1..T]
};

// eta in [0, 1]; eta = 1 reproduces the DDPM posterior noise scale, eta = 0
// is deterministic DDIM.
DdimNoiseScale ddim_noise_scale(const NoiseSchedule& schedule, double eta);

// Decreasing timestep grid for the lookahead estimator: floor(s/T' * entry)
// for s = T'..0 with consecutive duplicates removed. effective_T_prime is
// the number of grid transitions, which is also the estimator's model-call
// cost.
struct LookaheadGrid {
  std::vector<int> steps;
  int effective_T_prime = 0;
};

LookaheadGrid lookahead_grid(int entry_step, int T_prime);

// Half-log-SNR parameterization used by the first-order SDE/ODE updates:
// alpha(t) = sqrt(abar_t), sigma(t) = sqrt(1 - abar_t),
// lambda(t) = log(alpha/sigma). lambda(0) is +inf (zero terminal noise);
// every formula consuming it degenerates to the clean prediction there.
struct DpmCoefficients {
  std::vector<double> marginal_alpha;
  std::vector<double> marginal_sigma;
  std::vector<double> half_log_snr;
};

DpmCoefficients dpm_coefficients(const NoiseSchedule& schedule);

}  // namespace dlbs
