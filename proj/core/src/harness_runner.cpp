#include "dlbs/harness/runner.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "dlbs/rng.hpp"
#include "dlbs/sampler.hpp"

namespace fs = std::filesystem;

namespace dlbs {

namespace {

Eigen::VectorXd direction_embed(const Latent& sample) {
  const double n = sample.values.norm();
  if (n == 0.0) throw std::domain_error("zero-norm embedding");
  return sample.values / n;
}

std::string trace_to_json(const std::vector<SearchTraceStep>& trace) {
  nlohmann::ordered_json steps = nlohmann::ordered_json::array();
  for (const SearchTraceStep& step : trace) {
    nlohmann::ordered_json s;
    s["step"] = step.step;
    s["rewards"] = step.rewards;
    s["selected"] = step.selected;
    steps.push_back(std::move(s));
  }
  return steps.dump(2) + "\n";
}

RunRecord existing_record(const std::string& path) {
  std::ifstream in(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return record_from_json(buffer.str());
}

}  // namespace

RunRecord execute_run(const RunSpec& spec, const SearchConfig& search,
                      int workers, bool want_trace,
                      std::vector<SearchTraceStep>* trace_out) {
  const NoiseSchedule schedule = problem_schedule(spec);
  const GmmDenoiser denoiser(problem_mixture(spec), schedule);
  const Reward reward = problem_reward(spec);

  const SearchResult result =
      run_search(search, denoiser, schedule, reward, workers, want_trace);

  RunSpec hashed = spec;
  hashed.search = search;

  RunRecord record;
  record.config_hash = config_hash(hashed);
  record.seed = search.seed;
  record.method = to_string(search.method);
  record.K = search.K;
  record.B = search.B;
  record.T_prime = search.T_prime;
  record.eta = search.eta;
  record.solver = to_string(search.solver);
  record.problem_name = spec.problem.name;
  record.final_reward = result.best_reward;
  record.nfe = result.nfe;
  record.wall_clock_s = result.wall_clock_s;
  record.warnings = result.warnings;

  const std::int64_t expected = nfe_estimate(search, schedule.T);
  if (record.nfe != expected) {
    throw std::logic_error("NFE counter " + std::to_string(record.nfe) +
                           " disagrees with estimate " +
                           std::to_string(expected));
  }
  if (search.B >= 2) {
    record.diversity =
        diversity_of_results(result.final_beams, direction_embed);
  }
  if (trace_out) *trace_out = result.trace;
  return record;
}

RunRecord harness_search(const RunSpec& spec, const HarnessOptions& options) {
  SearchConfig search = spec.search;
  search.seed += options.seed_offset;

  RunSpec hashed = spec;
  hashed.search = search;
  const std::string path =
      record_path(options.out_dir, config_hash(hashed), search.seed);
  if (options.resume && fs::exists(path)) {
    return existing_record(path);
  }

  std::vector<SearchTraceStep> trace;
  RunRecord record = execute_run(spec, search, options.workers,
                                 spec.output.trace, &trace);
  if (spec.output.trace) {
    const std::string trace_path = record_path(options.out_dir, record);
    const std::string trace_file =
        trace_path.substr(0, trace_path.size() - 5) + ".trace.json";
    fs::create_directories(fs::path(trace_file).parent_path());
    std::ofstream out(trace_file, std::ios::binary | std::ios::trunc);
    out << trace_to_json(trace);
    record.trace_path =
        fs::relative(trace_file, options.out_dir).string();
  }
  write_record(options.out_dir, record);
  write_results_csv(options.out_dir, scan_records(options.out_dir));
  return record;
}

std::vector<RunRecord> harness_sweep(const RunSpec& spec,
                                     const HarnessOptions& options) {
  if (!spec.sweep.present) {
    throw std::invalid_argument("config has no sweep section");
  }
  const std::vector<SearchConfig> configs =
      expand_axes(spec.search, spec.sweep.axes);
  std::vector<RunRecord> records;
  for (const SearchConfig& expanded : configs) {
    for (const std::uint64_t base_seed : spec.sweep.seeds) {
      SearchConfig search = expanded;
      search.seed = base_seed + options.seed_offset;

      RunSpec hashed = spec;
      hashed.search = search;
      const std::string hash = config_hash(hashed);
      const std::string path =
          record_path(options.out_dir, hash, search.seed);
      if (options.resume && fs::exists(path)) {
        records.push_back(existing_record(path));
        continue;
      }
      RunRecord record;
      try {
        record = execute_run(spec, search, options.workers, false);
      } catch (const std::exception& e) {
        record = RunRecord{};
        record.config_hash = hash;
        record.seed = search.seed;
        record.method = to_string(search.method);
        record.K = search.K;
        record.B = search.B;
        record.T_prime = search.T_prime;
        record.eta = search.eta;
        record.solver = to_string(search.solver);
        record.problem_name = spec.problem.name;
        record.status = "failed";
        record.warnings.push_back(e.what());
      }
      write_record(options.out_dir, record);
      records.push_back(std::move(record));
    }
  }
  write_results_csv(options.out_dir, scan_records(options.out_dir));
  return records;
}

std::vector<AblateRow> harness_ablate(const RunSpec& spec,
                                      const HarnessOptions& options) {
  if (!spec.ablate.present) {
    throw std::invalid_argument("config has no ablate section");
  }
  const NoiseSchedule schedule = problem_schedule(spec);
  const GaussianMixture gmm = problem_mixture(spec);
  const GmmDenoiser denoiser(gmm, schedule);
  const Reward reward = problem_reward(spec);

  const int mid =
      spec.ablate.mid_step < 0 ? schedule.T / 2 : spec.ablate.mid_step;
  if (mid < 1 || mid > schedule.T) {
    throw std::invalid_argument("ablate.mid_step out of range");
  }
  if (spec.ablate.latents < 1) {
    throw std::invalid_argument("ablate.latents must be >= 1");
  }
  const double abar = schedule.alpha_bar[static_cast<std::size_t>(mid)];
  const std::uint64_t noise_seed =
      spec.search.seed + options.seed_offset;

  // Mid-trajectory latents from the exact forward marginal, shared across
  // the T_prime values so errors are paired; the full deterministic endpoint
  // uses every remaining step.
  std::vector<Eigen::VectorXd> latents;
  std::vector<Eigen::VectorXd> endpoints;
  latents.reserve(static_cast<std::size_t>(spec.ablate.latents));
  endpoints.reserve(static_cast<std::size_t>(spec.ablate.latents));
  for (int i = 0; i < spec.ablate.latents; ++i) {
    RandomStream stream(noise_seed, StreamPurpose::kData,
                        static_cast<uint32_t>(mid), static_cast<uint32_t>(i),
                        0);
    const Latent x0 = gmm_exact_sample(gmm, stream);
    const Eigen::VectorXd z = std::sqrt(abar) * x0.values +
                              std::sqrt(1.0 - abar) *
                                  stream.normal_vector(gmm.dim());
    latents.push_back(z);
    endpoints.push_back(
        lookahead_estimate(z, mid, mid, denoiser, schedule).value.values);
  }

  std::vector<AblateRow> rows;
  for (const int T_prime : spec.ablate.T_primes) {
    AblateRow row;
    row.T_prime = T_prime;
    double total_error = 0.0;
    for (std::size_t i = 0; i < latents.size(); ++i) {
      const Eigen::VectorXd est =
          lookahead_estimate(latents[i], mid, T_prime, denoiser, schedule)
              .value.values;
      total_error += (est - endpoints[i]).norm();
    }
    row.mean_error = total_error / double(latents.size());

    double total_reward = 0.0;
    for (const std::uint64_t base_seed : spec.ablate.seeds) {
      SearchConfig search = spec.search;
      search.method = Method::kDlbsLa;
      search.T_prime = T_prime;
      search.seed = base_seed + options.seed_offset;
      const SearchResult result =
          run_search(search, denoiser, schedule, reward, options.workers);
      total_reward += result.best_reward;
    }
    row.mean_reward = total_reward / double(spec.ablate.seeds.size());
    rows.push_back(row);
  }

  std::string csv = "T_prime,mean_error,mean_reward\n";
  for (const AblateRow& row : rows) {
    csv += std::to_string(row.T_prime) + ',' + format_double(row.mean_error) +
           ',' + format_double(row.mean_reward) + '\n';
  }
  fs::create_directories(options.out_dir);
  const fs::path tmp = fs::path(options.out_dir) / "ablate.csv.tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << csv;
  }
  fs::rename(tmp, fs::path(options.out_dir) / "ablate.csv");
  return rows;
}

}  // namespace dlbs
