#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dlbs/calibration.hpp"
#include "dlbs/harness/config.hpp"
#include "dlbs/harness/record.hpp"
#include "dlbs/harness/report.hpp"
#include "dlbs/harness/runner.hpp"

namespace {

std::string default_out_root() {
  if (const char* env = std::getenv("DLBS_OUT_ROOT")) return env;
  return "runs";
}

std::string effective_out(const std::string& flag_out,
                          const std::string& config_out) {
  if (!flag_out.empty()) return flag_out;
  if (!config_out.empty()) return config_out;
  return default_out_root();
}

std::vector<std::pair<std::string, std::string>> parse_pairs(
    const std::vector<std::string>& raw) {
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const std::string& item : raw) {
    const auto colon = item.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == item.size()) {
      throw std::invalid_argument("pair must look like methodA:methodB, got '" +
                                  item + "'");
    }
    pairs.emplace_back(item.substr(0, colon), item.substr(colon + 1));
  }
  return pairs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"inference-time diffusion search over analytic testbeds"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  int workers = 1;
  std::uint64_t seed_offset = 0;
  bool resume = false;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    auto* opt = cmd->add_option("--config", config_path, "config file path");
    if (needs_config) opt->required();
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--workers", workers, "parallel workers")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--seed-offset", seed_offset, "added to every seed");
    cmd->add_flag("--resume", resume, "skip already-recorded runs");
  };

  auto* search_cmd = app.add_subcommand("search", "run one configured search");
  add_common(search_cmd, true);

  auto* sweep_cmd = app.add_subcommand("sweep", "run the configured sweep");
  add_common(sweep_cmd, true);

  auto* ablate_cmd = app.add_subcommand(
      "ablate-lookahead", "estimator error and reward across T_prime values");
  add_common(ablate_cmd, true);

  auto* calibrate_cmd =
      app.add_subcommand("calibrate", "fit metric weights to feedback");
  std::string data_path;
  std::string grid_text = "0,0.25,0.5,0.75,1";
  int resamples = 10000;
  calibrate_cmd->add_option("--data", data_path, "metrics+feedback CSV")
      ->required();
  calibrate_cmd->add_option("--grid", grid_text, "comma-separated grid values");
  calibrate_cmd->add_option("--resamples", resamples,
                            "permutation resamples for the p-value");
  calibrate_cmd->add_option("--out", out_dir, "output directory");
  calibrate_cmd->add_option("--workers", workers, "parallel workers")
      ->check(CLI::PositiveNumber);

  auto* report_cmd =
      app.add_subcommand("report", "aggregate a results.csv into report data");
  std::string results_path;
  std::string group_by = "method";
  std::vector<std::string> pair_specs;
  report_cmd->add_option("--results", results_path, "results.csv path")
      ->required();
  report_cmd->add_option("--group-by", group_by,
                         "comma-separated grouping fields");
  report_cmd->add_option("--pairs", pair_specs,
                         "methodA:methodB paired comparisons");
  report_cmd->add_option("--out", out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (search_cmd->parsed() || sweep_cmd->parsed() || ablate_cmd->parsed()) {
      const dlbs::RunSpec spec = dlbs::load_config(config_path);
      dlbs::HarnessOptions options;
      options.out_dir = effective_out(out_dir, spec.output.dir);
      options.workers = workers;
      options.resume = resume;
      options.seed_offset = seed_offset;
      if (search_cmd->parsed()) {
        const dlbs::RunRecord record = dlbs::harness_search(spec, options);
        std::cout << dlbs::record_to_json(record);
      } else if (sweep_cmd->parsed()) {
        const auto records = dlbs::harness_sweep(spec, options);
        std::size_t failed = 0;
        for (const auto& r : records) {
          if (r.status != "ok") ++failed;
        }
        std::cout << records.size() << " runs recorded under "
                  << options.out_dir;
        if (failed > 0) std::cout << " (" << failed << " failed)";
        std::cout << "\n";
      } else {
        const auto rows = dlbs::harness_ablate(spec, options);
        std::cout << "T_prime,mean_error,mean_reward\n";
        for (const auto& row : rows) {
          std::cout << row.T_prime << ',' << dlbs::format_double(row.mean_error)
                    << ',' << dlbs::format_double(row.mean_reward) << "\n";
        }
      }
      return 0;
    }

    if (calibrate_cmd->parsed()) {
      const dlbs::CalibrationDataset data =
          dlbs::load_calibration_csv(data_path);
      std::vector<double> grid;
      std::stringstream ss(grid_text);
      std::string cell;
      while (std::getline(ss, cell, ',')) {
        if (!cell.empty()) grid.push_back(std::stod(cell));
      }
      std::vector<dlbs::CalibrationCandidate> table;
      const dlbs::CalibrationOutcome outcome =
          dlbs::calibrate(data, grid, &table, workers);
      const Eigen::VectorXd combined =
          (data.metrics * outcome.weights) / outcome.weights.sum();
      const double p =
          dlbs::significance(combined, data.feedback, resamples);

      nlohmann::ordered_json j;
      j["weights"] = nlohmann::ordered_json::object();
      for (Eigen::Index i = 0; i < outcome.weights.size(); ++i) {
        const std::string name =
            data.metric_names.empty() ? "metric_" + std::to_string(i)
                                      : data.metric_names[std::size_t(i)];
        j["weights"][name] = outcome.weights[i];
      }
      j["correlation"] = outcome.correlation;
      j["p_value"] = p;
      j["grid"] = grid;
      j["candidates_evaluated"] = table.size();
      j["top_candidates"] = nlohmann::ordered_json::array();
      const std::size_t top = std::min<std::size_t>(table.size(), 50);
      for (std::size_t i = 0; i < top; ++i) {
        nlohmann::ordered_json item;
        item["weights"] = std::vector<double>(
            table[i].weights.data(),
            table[i].weights.data() + table[i].weights.size());
        item["correlation"] = table[i].correlation;
        j["top_candidates"].push_back(std::move(item));
      }
      const std::string text = j.dump(2) + "\n";
      if (out_dir.empty()) {
        std::cout << text;
      } else {
        std::filesystem::create_directories(out_dir);
        const auto path = std::filesystem::path(out_dir) / "weights.json";
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << text;
        std::cout << "wrote " << path.string() << "\n";
      }
      return 0;
    }

    if (report_cmd->parsed()) {
      const auto records = dlbs::load_results_csv(results_path);
      std::vector<std::string> fields;
      std::stringstream ss(group_by);
      std::string field;
      while (std::getline(ss, field, ',')) {
        if (!field.empty()) fields.push_back(field);
      }
      const dlbs::AggregateReport report =
          dlbs::aggregate(records, fields, parse_pairs(pair_specs));
      const std::string dir = out_dir.empty() ? default_out_root() : out_dir;
      dlbs::write_report(dir, report);
      std::cout << "wrote " << dir << "/report.json (" << report.groups.size()
                << " groups, " << report.pairs.size() << " pairs)\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
