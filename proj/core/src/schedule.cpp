#include "dlbs/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dlbs {

NoiseSchedule linear_beta_schedule(double beta_start, double beta_end, int T) {
  if (!(beta_start > 0.0) || !(beta_end < 1.0) || beta_start > beta_end) {
    throw std::invalid_argument(
        "linear_beta_schedule: need 0 < beta_start <= beta_end < 1, got [" +
        std::to_string(beta_start) + ", " + std::to_string(beta_end) + "]");
  }
  if (T < 1) {
    throw std::invalid_argument("linear_beta_schedule: T must be >= 1");
  }
  NoiseSchedule s;
  s.T = T;
  s.beta.assign(T + 1, 0.0);
  s.alpha_bar.assign(T + 1, 1.0);
  for (int t = 1; t <= T; ++t) {
    const double frac = (T == 1) ? 0.0 : double(t - 1) / double(T - 1);
    s.beta[t] = beta_start + (beta_end - beta_start) * frac;
    s.alpha_bar[t] = s.alpha_bar[t - 1] * (1.0 - s.beta[t]);
  }
  return s;
}

DdimNoiseScale ddim_noise_scale(const NoiseSchedule& schedule, double eta) {
  if (!(eta >= 0.0) || eta > 1.0) {
    throw std::invalid_argument("ddim_noise_scale: eta must lie in [0, 1], got " +
                                std::to_string(eta));
  }
  DdimNoiseScale n;
  n.eta = eta;
  n.sigma.assign(schedule.T + 1, 0.0);
  for (int t = 1; t <= schedule.T; ++t) {
    const double prev = schedule.alpha_bar[t - 1];
    const double cur = schedule.alpha_bar[t];
    // At t=1 the first factor is 0 (alpha_bar[0] = 1), so sigma[1] = 0.
    n.sigma[t] =
        eta * std::sqrt((1.0 - prev) / (1.0 - cur)) * std::sqrt(1.0 - cur / prev);
  }
  return n;
}

LookaheadGrid lookahead_grid(int entry_step, int T_prime) {
  if (entry_step < 0) {
    throw std::invalid_argument("lookahead_grid: entry_step must be >= 0");
  }
  if (T_prime < 1) {
    throw std::invalid_argument("lookahead_grid: T_prime must be >= 1");
  }
  LookaheadGrid g;
  for (int s = T_prime; s >= 0; --s) {
    const int step = int((int64_t(s) * entry_step) / T_prime);
    if (g.steps.empty() || g.steps.back() != step) g.steps.push_back(step);
  }
  g.effective_T_prime = int(g.steps.size()) - 1;
  return g;
}

DpmCoefficients dpm_coefficients(const NoiseSchedule& schedule) {
  DpmCoefficients c;
  const int T = schedule.T;
  c.marginal_alpha.resize(T + 1);
  c.marginal_sigma.resize(T + 1);
  c.half_log_snr.resize(T + 1);
  for (int t = 0; t <= T; ++t) {
    const double abar = schedule.alpha_bar[t];
    if (t >= 1 && abar >= 1.0) {
      throw std::invalid_argument(
          "dpm_coefficients: degenerate schedule, alpha_bar = 1 at t = " +
          std::to_string(t));
    }
    c.marginal_alpha[t] = std::sqrt(abar);
    c.marginal_sigma[t] = std::sqrt(1.0 - abar);
    c.half_log_snr[t] = std::log(c.marginal_alpha[t] / c.marginal_sigma[t]);
  }
  return c;
}

}  // namespace dlbs
