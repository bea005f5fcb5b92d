#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dlbs/rng.hpp"
#include "dlbs/schedule.hpp"

namespace dlbs {

// A latent vector plus the timestep it lives at (metadata; 0 = clean).
struct Latent {
  Eigen::VectorXd values;
  int step = 0;
};

// Reward over decoded samples. The desk-scale decoder is the identity, so
// rewards act on latents directly.
using Reward = std::function<double(const Eigen::VectorXd&)>;

// Noise-prediction interface. Implementations must be pure: identical
// arguments give bit-identical outputs, with no hidden state, so calls may
// run on any worker. At t=0 the noise is unidentifiable (its coefficient is
// zero everywhere); implementations must still return a finite vector so
// literal estimator paths stay well-defined.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual Eigen::VectorXd epsilon(const Eigen::VectorXd& z, int t) const = 0;
  virtual int dim() const = 0;
};

// Isotropic Gaussian mixture: component k has mean means[k] and covariance
// variances[k] * I.
struct GaussianMixture {
  std::vector<double> weights;
  std::vector<Eigen::VectorXd> means;
  std::vector<double> variances;

  int components() const { return int(weights.size()); }
  int dim() const { return means.empty() ? 0 : int(means[0].size()); }
};

void validate(const GaussianMixture& gmm);

// Conversions between the noise prediction and the clean-sample prediction.
// These two helpers are the single arithmetic path every solver uses; the
// oracle's posterior mean is routed through the same pair so that the
// solver-side reconstruction recovers it exactly.
inline Eigen::VectorXd clean_from_epsilon(const Eigen::VectorXd& z,
                                          const Eigen::VectorXd& eps,
                                          double alpha, double sigma) {
  return (z - sigma * eps) / alpha;
}

inline Eigen::VectorXd clean_from_epsilon(const Eigen::VectorXd& z,
                                          const Eigen::VectorXd& eps,
                                          double abar) {
  return clean_from_epsilon(z, eps, std::sqrt(abar), std::sqrt(1.0 - abar));
}

inline Eigen::VectorXd epsilon_from_clean(const Eigen::VectorXd& z,
                                          const Eigen::VectorXd& clean,
                                          double abar) {
  return (z - std::sqrt(abar) * clean) / std::sqrt(1.0 - abar);
}

// Marginal of the forward process at signal level abar: component means are
// scaled by sqrt(abar), variances become abar*v + (1-abar).
GaussianMixture gmm_marginal(const GaussianMixture& gmm, double abar);

// Mixture responsibilities of z under gmm_marginal(gmm, abar), computed in
// the log domain.
Eigen::VectorXd gmm_responsibilities(const GaussianMixture& gmm,
                                     const Eigen::VectorXd& z, double abar);

// Exact E[z0 | z_t = z] under the mixture.
Eigen::VectorXd gmm_posterior_mean(const GaussianMixture& gmm,
                                   const Eigen::VectorXd& z, double abar);

// Noise prediction consistent with the exact posterior mean; requires
// abar in (0, 1).
Eigen::VectorXd gmm_epsilon(const GaussianMixture& gmm, const Eigen::VectorXd& z,
                            double abar);

// Exact gradient of the log marginal density at z.
Eigen::VectorXd gmm_score(const GaussianMixture& gmm, const Eigen::VectorXd& z,
                          double abar);

// Exact draw from the data distribution (component by weight, then Gaussian).
Latent gmm_exact_sample(const GaussianMixture& gmm, RandomStream& rng);

double gmm_log_density(const GaussianMixture& gmm, const Eigen::VectorXd& z,
                       double abar);

// Named testbed mixtures: "bimodal-1d", "ring-8", "needle-reward-16d".
GaussianMixture gmm_preset(const std::string& name);

// Denoiser backed by the analytic mixture posterior.
class GmmDenoiser final : public Denoiser {
 public:
  GmmDenoiser(GaussianMixture gmm, NoiseSchedule schedule);

  Eigen::VectorXd epsilon(const Eigen::VectorXd& z, int t) const override;
  int dim() const override { return gmm_.dim(); }

  const GaussianMixture& mixture() const { return gmm_; }
  const NoiseSchedule& schedule() const { return schedule_; }

 private:
  GaussianMixture gmm_;
  NoiseSchedule schedule_;
};

}  // namespace dlbs
