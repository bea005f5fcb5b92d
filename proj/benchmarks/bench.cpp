#include <benchmark/benchmark.h>

#include "dlbs/oracle.hpp"
#include "dlbs/sampler.hpp"
#include "dlbs/schedule.hpp"
#include "dlbs/search.hpp"

namespace {

struct Fixture {
  dlbs::GaussianMixture gmm = dlbs::gmm_preset("needle-reward-16d");
  dlbs::NoiseSchedule schedule = dlbs::linear_beta_schedule(0.002, 0.18, 50);
  dlbs::GmmDenoiser denoiser{gmm, schedule};
  Eigen::VectorXd z = Eigen::VectorXd::Constant(16, 0.3);
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void bm_denoiser_epsilon(benchmark::State& state) {
  auto& f = fixture();
  for (auto _ : state) {
    benchmark::DoNotOptimize(f.denoiser.epsilon(f.z, 25));
  }
}
BENCHMARK(bm_denoiser_epsilon);

void bm_posterior_mean(benchmark::State& state) {
  auto& f = fixture();
  const double abar = f.schedule.alpha_bar[25];
  for (auto _ : state) {
    benchmark::DoNotOptimize(dlbs::gmm_posterior_mean(f.gmm, f.z, abar));
  }
}
BENCHMARK(bm_posterior_mean);

void bm_lookahead_estimate(benchmark::State& state) {
  auto& f = fixture();
  const int T_prime = int(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        dlbs::lookahead_estimate(f.z, 25, T_prime, f.denoiser, f.schedule));
  }
}
BENCHMARK(bm_lookahead_estimate)->Arg(1)->Arg(6)->Arg(12);

void bm_select_top_b(benchmark::State& state) {
  std::vector<double> rewards(64);
  dlbs::RandomStream rng(7, dlbs::StreamPurpose::kData, 0, 0, 0);
  for (auto& r : rewards) r = rng.normal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(dlbs::select_top_b_indices(rewards, 8));
  }
}
BENCHMARK(bm_select_top_b);

void bm_run_search(benchmark::State& state) {
  auto& f = fixture();
  dlbs::SearchConfig config;
  config.method = dlbs::Method::kDlbs;
  config.K = 2;
  config.B = 4;
  config.seed = 11;
  const Eigen::VectorXd target = f.gmm.means[2];
  const dlbs::Reward reward = [&](const Eigen::VectorXd& x) {
    return -(x - target).squaredNorm();
  };
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        dlbs::run_search(config, f.denoiser, f.schedule, reward));
  }
}
BENCHMARK(bm_run_search);

}  // namespace

BENCHMARK_MAIN();
