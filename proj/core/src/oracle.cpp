#include "dlbs/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dlbs {

namespace {

void check_abar(double abar, bool allow_one, const char* who) {
  const bool ok = abar > 0.0 && (allow_one ? abar <= 1.0 : abar < 1.0);
  if (!ok) {
    throw std::domain_error(std::string(who) + ": abar = " +
                            std::to_string(abar) + " out of range");
  }
}

// log N(z; m, s*I) for isotropic variance s.
double log_normal(const Eigen::VectorXd& z, const Eigen::VectorXd& m, double s) {
  const double d = double(z.size());
  return -0.5 * (d * std::log(2.0 * M_PI * s) + (z - m).squaredNorm() / s);
}

// Exact posterior mean, before routing through the epsilon representation.
Eigen::VectorXd posterior_mean_raw(const GaussianMixture& gmm,
                                   const Eigen::VectorXd& z, double abar) {
  const Eigen::VectorXd resp = gmm_responsibilities(gmm, z, abar);
  const double root = std::sqrt(abar);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(z.size());
  for (int k = 0; k < gmm.components(); ++k) {
    if (resp[k] == 0.0) continue;
    const double s = abar * gmm.variances[k] + (1.0 - abar);
    const double gain = root * gmm.variances[k] / s;
    mean += resp[k] * (gmm.means[k] + gain * (z - root * gmm.means[k]));
  }
  return mean;
}

}  // namespace

void validate(const GaussianMixture& gmm) {
  if (gmm.weights.empty() || gmm.weights.size() != gmm.means.size() ||
      gmm.weights.size() != gmm.variances.size()) {
    throw std::invalid_argument("GaussianMixture: inconsistent component counts");
  }
  double total = 0.0;
  for (double w : gmm.weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("GaussianMixture: negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument("GaussianMixture: weights sum to " +
                                std::to_string(total));
  }
  const int d = gmm.dim();
  for (const auto& m : gmm.means) {
    if (int(m.size()) != d || !m.allFinite()) {
      throw std::invalid_argument("GaussianMixture: bad component mean");
    }
  }
  for (double v : gmm.variances) {
    if (!(v > 0.0)) throw std::invalid_argument("GaussianMixture: variance must be > 0");
  }
}

GaussianMixture gmm_marginal(const GaussianMixture& gmm, double abar) {
  check_abar(abar, /*allow_one=*/true, "gmm_marginal");
  GaussianMixture out = gmm;
  const double root = std::sqrt(abar);
  for (int k = 0; k < gmm.components(); ++k) {
    out.means[k] = root * gmm.means[k];
    out.variances[k] = abar * gmm.variances[k] + (1.0 - abar);
  }
  return out;
}

Eigen::VectorXd gmm_responsibilities(const GaussianMixture& gmm,
                                     const Eigen::VectorXd& z, double abar) {
  check_abar(abar, /*allow_one=*/true, "gmm_responsibilities");
  const int n = gmm.components();
  const double root = std::sqrt(abar);
  Eigen::VectorXd logr(n);
  for (int k = 0; k < n; ++k) {
    const double s = abar * gmm.variances[k] + (1.0 - abar);
    logr[k] = std::log(gmm.weights[k]) + log_normal(z, root * gmm.means[k], s);
  }
  const double top = logr.maxCoeff();
  Eigen::VectorXd r = (logr.array() - top).exp();
  return r / r.sum();
}

Eigen::VectorXd gmm_posterior_mean(const GaussianMixture& gmm,
                                   const Eigen::VectorXd& z, double abar) {
  check_abar(abar, /*allow_one=*/true, "gmm_posterior_mean");
  if (abar == 1.0) return z;
  // Round-trip through the epsilon representation: this is the same
  // arithmetic path the solvers take (line-5 reconstruction), so the two
  // views of the oracle agree exactly.
  return clean_from_epsilon(z, gmm_epsilon(gmm, z, abar), abar);
}

Eigen::VectorXd gmm_epsilon(const GaussianMixture& gmm, const Eigen::VectorXd& z,
                            double abar) {
  check_abar(abar, /*allow_one=*/false, "gmm_epsilon");
  return epsilon_from_clean(z, posterior_mean_raw(gmm, z, abar), abar);
}

Eigen::VectorXd gmm_score(const GaussianMixture& gmm, const Eigen::VectorXd& z,
                          double abar) {
  check_abar(abar, /*allow_one=*/true, "gmm_score");
  const GaussianMixture marg = gmm_marginal(gmm, abar);
  const Eigen::VectorXd resp = gmm_responsibilities(gmm, z, abar);
  Eigen::VectorXd score = Eigen::VectorXd::Zero(z.size());
  for (int k = 0; k < marg.components(); ++k) {
    score += resp[k] * (marg.means[k] - z) / marg.variances[k];
  }
  return score;
}

double gmm_log_density(const GaussianMixture& gmm, const Eigen::VectorXd& z,
                       double abar) {
  check_abar(abar, /*allow_one=*/true, "gmm_log_density");
  const GaussianMixture marg = gmm_marginal(gmm, abar);
  double top = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd logp(marg.components());
  for (int k = 0; k < marg.components(); ++k) {
    logp[k] = std::log(marg.weights[k]) +
              log_normal(z, marg.means[k], marg.variances[k]);
    top = std::max(top, logp[k]);
  }
  return top + std::log((logp.array() - top).exp().sum());
}

Latent gmm_exact_sample(const GaussianMixture& gmm, RandomStream& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  int pick = gmm.components() - 1;
  for (int k = 0; k < gmm.components(); ++k) {
    acc += gmm.weights[k];
    if (u < acc) {
      pick = k;
      break;
    }
  }
  Latent out;
  out.step = 0;
  out.values = gmm.means[pick] +
               std::sqrt(gmm.variances[pick]) * rng.normal_vector(gmm.dim());
  return out;
}

GaussianMixture gmm_preset(const std::string& name) {
  GaussianMixture g;
  if (name == "bimodal-1d") {
    // Unequal modes: the reward target is the rare one, so search pressure
    // matters even in one dimension.
    g.weights = {0.85, 0.15};
    g.means = {Eigen::VectorXd::Constant(1, -2.0), Eigen::VectorXd::Constant(1, 2.0)};
    g.variances = {0.25, 0.0225};
  } else if (name == "ring-8") {
    const int n = 8;
    const double radius = 2.0;
    g.weights.assign(n, 1.0 / n);
    for (int k = 0; k < n; ++k) {
      const double a = 2.0 * M_PI * k / n;
      Eigen::VectorXd m(2);
      m << radius * std::cos(a), radius * std::sin(a);
      g.means.push_back(m);
      g.variances.push_back(0.0625);
    }
  } else if (name == "needle-reward-16d") {
    // A dominant broad component, a medium distractor, and a rare sharp
    // component ("needle") that carries the reward target.
    const int d = 16;
    Eigen::VectorXd m0 = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd m1(d), m2(d);
    for (int i = 0; i < d; ++i) {
      m1[i] = (i % 2 == 0) ? 0.6 : -0.6;
      m2[i] = 0.9;
    }
    g.weights = {0.70, 0.25, 0.05};
    g.means = {m0, m1, m2};
    g.variances = {1.0, 0.4, 0.15};
  } else {
    throw std::invalid_argument("gmm_preset: unknown preset '" + name + "'");
  }
  validate(g);
  return g;
}

GmmDenoiser::GmmDenoiser(GaussianMixture gmm, NoiseSchedule schedule)
    : gmm_(std::move(gmm)), schedule_(std::move(schedule)) {
  validate(gmm_);
}

Eigen::VectorXd GmmDenoiser::epsilon(const Eigen::VectorXd& z, int t) const {
  if (t < 0 || t > schedule_.T) {
    throw std::invalid_argument("GmmDenoiser: timestep " + std::to_string(t) +
                                " outside [0, " + std::to_string(schedule_.T) + "]");
  }
  if (t == 0) return Eigen::VectorXd::Zero(z.size());
  return gmm_epsilon(gmm_, z, schedule_.alpha_bar[t]);
}

}  // namespace dlbs
