#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "dlbs/oracle.hpp"
#include "dlbs/rng.hpp"

using namespace dlbs;

namespace {

GaussianMixture single(double mu, double v, int d = 1) {
  GaussianMixture g;
  g.weights = {1.0};
  g.means = {Eigen::VectorXd::Constant(d, mu)};
  g.variances = {v};
  return g;
}

GaussianMixture symmetric_pair(double mu, double v) {
  GaussianMixture g;
  g.weights = {0.5, 0.5};
  g.means = {Eigen::VectorXd::Constant(1, -mu), Eigen::VectorXd::Constant(1, mu)};
  g.variances = {v, v};
  return g;
}

Eigen::VectorXd vec1(double x) { return Eigen::VectorXd::Constant(1, x); }

}  // namespace

TEST_CASE("mixture validation") {
  GaussianMixture g = single(0.0, 1.0);
  CHECK_NOTHROW(validate(g));
  g.weights = {0.5};
  CHECK_THROWS_AS(validate(g), std::invalid_argument);
  g = single(0.0, 0.0);
  CHECK_THROWS_AS(validate(g), std::invalid_argument);
  g = single(0.0, 1.0);
  g.means[0][0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(validate(g), std::invalid_argument);
}

TEST_CASE("forward marginal at pinned points") {
  const GaussianMixture g = single(2.0, 0.25);

  const GaussianMixture same = gmm_marginal(g, 1.0);
  CHECK(same.means[0][0] == 2.0);
  CHECK(same.variances[0] == 1.0 * 0.25 + 0.0);

  const GaussianMixture m = gmm_marginal(g, 0.64);
  CHECK(m.means[0][0] == doctest::Approx(1.6).epsilon(1e-15));
  CHECK(m.variances[0] == doctest::Approx(0.52).epsilon(1e-15));

  const GaussianMixture noise = gmm_marginal(g, 1e-300);
  CHECK(std::abs(noise.means[0][0]) <= 1e-140);
  CHECK(noise.variances[0] == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(gmm_marginal(g, 0.0), std::domain_error);
  CHECK_THROWS_AS(gmm_marginal(g, 1.5), std::domain_error);
}

TEST_CASE("forward marginal composes") {
  const GaussianMixture g = gmm_preset("bimodal-1d");
  const double a1 = 0.7;
  const double a2 = 0.4;
  const GaussianMixture two_hop = gmm_marginal(gmm_marginal(g, a1), a2);
  const GaussianMixture one_hop = gmm_marginal(g, a1 * a2);
  for (int k = 0; k < g.components(); ++k) {
    CHECK(std::abs(two_hop.means[k][0] - one_hop.means[k][0]) <= 1e-12);
    CHECK(std::abs(two_hop.variances[k] - one_hop.variances[k]) <= 1e-12);
  }
}

TEST_CASE("posterior mean closed forms") {
  // single component with v = 1: posterior mean = sqrt(abar) z + (1-abar) mu
  const GaussianMixture g = single(1.3, 1.0);
  for (double abar : {0.9, 0.5, 0.11}) {
    for (double z : {-2.0, 0.4, 3.1}) {
      const double expect = std::sqrt(abar) * z + (1.0 - abar) * 1.3;
      const Eigen::VectorXd got = gmm_posterior_mean(g, vec1(z), abar);
      CHECK(std::abs(got[0] - expect) <= 1e-12);
    }
  }

  // abar = 1: posterior mean is the observation
  const GaussianMixture mix = gmm_preset("bimodal-1d");
  const Eigen::VectorXd z = vec1(0.37);
  CHECK((gmm_posterior_mean(mix, z, 1.0) - z).norm() <= 1e-12);

  // abar -> 0: prior mean
  double prior = 0.0;
  for (int k = 0; k < mix.components(); ++k) prior += mix.weights[k] * mix.means[k][0];
  const Eigen::VectorXd near0 = gmm_posterior_mean(mix, vec1(0.2), 1e-12);
  CHECK(std::abs(near0[0] - prior) <= 1e-5);
}

TEST_CASE("responsibilities survive far tails") {
  const GaussianMixture mix = gmm_preset("bimodal-1d");
  const Eigen::VectorXd r = gmm_responsibilities(mix, vec1(-800.0), 1e-4);
  CHECK(std::isfinite(r[0]));
  CHECK(std::abs(r.sum() - 1.0) <= 1e-12);
  CHECK(r.minCoeff() >= 0.0);
}

TEST_CASE("epsilon at a mode-centered latent is zero") {
  const GaussianMixture g = single(2.0, 1.0);
  const double abar = 0.64;
  const Eigen::VectorXd z = vec1(std::sqrt(abar) * 2.0);
  CHECK(gmm_epsilon(g, z, abar).norm() <= 1e-12);
  CHECK_THROWS_AS(gmm_epsilon(g, z, 1.0), std::domain_error);
}

TEST_CASE("epsilon tends to the latent in the pure-noise limit") {
  const GaussianMixture g = single(0.0, 1.0);
  const Eigen::VectorXd z = vec1(0.83);
  const Eigen::VectorXd eps = gmm_epsilon(g, z, 1e-10);
  CHECK(std::abs(eps[0] - 0.83) <= 1e-5);
}

TEST_CASE("clean reconstruction from epsilon is exact by construction") {
  const GaussianMixture mix = gmm_preset("ring-8");
  RandomStream rng(99, StreamPurpose::kData, 0, 0, 0);
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXd z = rng.normal_vector(2) * 2.0;
    const double abar = 0.05 + 0.9 * rng.uniform();
    const Eigen::VectorXd eps = gmm_epsilon(mix, z, abar);
    const Eigen::VectorXd rebuilt = clean_from_epsilon(z, eps, abar);
    const Eigen::VectorXd exact = gmm_posterior_mean(mix, z, abar);
    for (int j = 0; j < 2; ++j) CHECK(rebuilt[j] == exact[j]);
  }
}

TEST_CASE("score closed forms") {
  // zero-mean unit-variance single component at abar=0.5: marginal is N(0,1)
  const GaussianMixture g = single(0.0, 1.0);
  for (double z : {-1.5, 0.0, 2.2}) {
    const Eigen::VectorXd s = gmm_score(g, vec1(z), 0.5);
    CHECK(std::abs(s[0] + z) <= 1e-12);
  }
  // symmetric mixture at the origin
  const GaussianMixture pair = symmetric_pair(1.7, 0.3);
  CHECK(std::abs(gmm_score(pair, vec1(0.0), 0.6)[0]) <= 1e-12);
}

TEST_CASE("score matches finite differences of the log density") {
  const GaussianMixture mix = gmm_preset("bimodal-1d");
  RandomStream rng(7, StreamPurpose::kData, 1, 0, 0);
  const double eps = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const double z = 4.0 * (rng.uniform() - 0.5);
    const double abar = 0.05 + 0.9 * rng.uniform();
    const double up = gmm_log_density(mix, vec1(z + eps), abar);
    const double dn = gmm_log_density(mix, vec1(z - eps), abar);
    const double fd = (up - dn) / (2.0 * eps);
    CHECK(std::abs(gmm_score(mix, vec1(z), abar)[0] - fd) <= 1e-5);
  }
}

TEST_CASE("tweedie identity links score and posterior mean") {
  const GaussianMixture mix = gmm_preset("needle-reward-16d");
  RandomStream rng(13, StreamPurpose::kData, 2, 0, 0);
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd z = rng.normal_vector(16) * 1.5;
    const double abar = 0.05 + 0.9 * rng.uniform();
    const Eigen::VectorXd via_score =
        (z + (1.0 - abar) * gmm_score(mix, z, abar)) / std::sqrt(abar);
    const Eigen::VectorXd exact = gmm_posterior_mean(mix, z, abar);
    CHECK((via_score - exact).norm() <= 1e-8);
  }
}

TEST_CASE("exact sampling matches component statistics") {
  GaussianMixture g = symmetric_pair(2.0, 1e-12);
  SUBCASE("near-zero variance pins samples to the means") {
    RandomStream rng(5, StreamPurpose::kData, 0, 0, 0);
    for (int i = 0; i < 20; ++i) {
      const Latent s = gmm_exact_sample(g, rng);
      CHECK(std::min(std::abs(s.values[0] - 2.0), std::abs(s.values[0] + 2.0)) <= 1e-5);
      CHECK(s.step == 0);
    }
  }
  SUBCASE("zero-weight component never drawn") {
    g.weights = {1.0, 0.0};
    g.variances = {0.01, 0.01};
    RandomStream rng(6, StreamPurpose::kData, 0, 0, 0);
    for (int i = 0; i < 200; ++i) {
      CHECK(gmm_exact_sample(g, rng).values[0] < 0.0);
    }
  }
  SUBCASE("component frequencies match weights within 3 sigma") {
    const GaussianMixture mix = gmm_preset("bimodal-1d");
    RandomStream rng(8, StreamPurpose::kData, 0, 0, 0);
    const int n = 100000;
    int hi = 0;
    for (int i = 0; i < n; ++i) {
      if (gmm_exact_sample(mix, rng).values[0] > 0.0) ++hi;
    }
    const double p = mix.weights[1];
    const double band = 3.0 * std::sqrt(p * (1.0 - p) / n);
    CHECK(std::abs(double(hi) / n - p) <= band);
  }
  SUBCASE("sample mean matches the mixture mean within 3 standard errors") {
    const GaussianMixture mix = gmm_preset("bimodal-1d");
    RandomStream rng(9, StreamPurpose::kData, 0, 0, 0);
    const int n = 100000;
    double sum = 0.0;
    double sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = gmm_exact_sample(mix, rng).values[0];
      sum += x;
      sumsq += x * x;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    double want = 0.0;
    for (int k = 0; k < mix.components(); ++k) want += mix.weights[k] * mix.means[k][0];
    CHECK(std::abs(mean - want) <= 3.0 * std::sqrt(var / n));
  }
}

TEST_CASE("denoiser is pure and matches the analytic epsilon") {
  const GaussianMixture mix = gmm_preset("ring-8");
  const NoiseSchedule sched = linear_beta_schedule(0.002, 0.18, 50);
  const GmmDenoiser den(mix, sched);
  RandomStream rng(3, StreamPurpose::kData, 0, 0, 0);
  const Eigen::VectorXd z = rng.normal_vector(2);
  for (int t : {1, 17, 50}) {
    const Eigen::VectorXd a = den.epsilon(z, t);
    const Eigen::VectorXd b = den.epsilon(z, t);
    for (int j = 0; j < 2; ++j) CHECK(a[j] == b[j]);
    const Eigen::VectorXd direct = gmm_epsilon(mix, z, sched.alpha_bar[t]);
    for (int j = 0; j < 2; ++j) CHECK(a[j] == direct[j]);
  }
  CHECK(den.epsilon(z, 0).norm() == 0.0);
  CHECK(den.dim() == 2);
}

TEST_CASE("presets are valid and shaped as documented") {
  const GaussianMixture bi = gmm_preset("bimodal-1d");
  CHECK(bi.components() == 2);
  CHECK(bi.dim() == 1);
  CHECK(bi.weights[1] < bi.weights[0]);  // rare positive mode

  const GaussianMixture ring = gmm_preset("ring-8");
  CHECK(ring.components() == 8);
  CHECK(ring.dim() == 2);
  for (int k = 0; k < 8; ++k) {
    CHECK(ring.means[k].norm() == doctest::Approx(2.0).epsilon(1e-12));
  }

  const GaussianMixture needle = gmm_preset("needle-reward-16d");
  CHECK(needle.components() == 3);
  CHECK(needle.dim() == 16);
  CHECK(needle.weights[2] < 0.1);  // rare target mode

  for (const auto* name : {"bimodal-1d", "ring-8", "needle-reward-16d"}) {
    CHECK_NOTHROW(validate(gmm_preset(name)));
  }
  CHECK_THROWS_AS(gmm_preset("nope"), std::invalid_argument);
}
