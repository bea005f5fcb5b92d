#include "dlbs/harness/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "dlbs/calibration.hpp"

namespace fs = std::filesystem;

namespace dlbs {

namespace {

std::string field_value(const RunRecord& record, const std::string& field) {
  if (field == "method") return record.method;
  if (field == "solver") return record.solver;
  if (field == "problem_name") return record.problem_name;
  if (field == "K") return std::to_string(record.K);
  if (field == "B") return std::to_string(record.B);
  if (field == "T_prime") return std::to_string(record.T_prime);
  if (field == "KB") return std::to_string(record.K * record.B);
  if (field == "eta") return format_double(record.eta);
  if (field == "seed") return std::to_string(record.seed);
  throw std::invalid_argument("unknown grouping field: " + field);
}

// Numeric-aware ordering so K = 2 sorts before K = 16.
bool value_less(const std::string& a, const std::string& b) {
  char* end_a = nullptr;
  char* end_b = nullptr;
  const double da = std::strtod(a.c_str(), &end_a);
  const double db = std::strtod(b.c_str(), &end_b);
  const bool num_a = end_a == a.c_str() + a.size() && !a.empty();
  const bool num_b = end_b == b.c_str() + b.size() && !b.empty();
  if (num_a && num_b) {
    if (da != db) return da < db;
    return false;
  }
  if (num_a != num_b) return num_a;
  return a < b;
}

bool key_less(const std::vector<std::string>& a,
              const std::vector<std::string>& b) {
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    if (value_less(a[i], b[i])) return true;
    if (value_less(b[i], a[i])) return false;
  }
  return a.size() < b.size();
}

std::string sanitize(const std::string& text) {
  std::string out;
  for (const char c : text) {
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' ||
                          c == '.' || c == '_'
                      ? c
                      : '_');
  }
  return out.empty() ? std::string("all") : out;
}

}  // namespace

AggregateReport aggregate(
    const std::vector<RunRecord>& records,
    const std::vector<std::string>& group_fields,
    const std::vector<std::pair<std::string, std::string>>& method_pairs) {
  AggregateReport report;
  report.group_fields = group_fields;

  std::vector<const RunRecord*> ok;
  ok.reserve(records.size());
  for (const RunRecord& r : records) {
    if (r.status == "ok") ok.push_back(&r);
  }

  if (!group_fields.empty()) {
    std::map<std::vector<std::string>, std::vector<double>,
             decltype(&key_less)>
        buckets(&key_less);
    for (const RunRecord* r : ok) {
      std::vector<std::string> key;
      key.reserve(group_fields.size());
      for (const std::string& field : group_fields) {
        key.push_back(field_value(*r, field));
      }
      buckets[std::move(key)].push_back(r->final_reward);
    }
    for (const auto& [key, values] : buckets) {
      GroupStats stats;
      stats.key_values = key;
      stats.count = static_cast<int>(values.size());
      double mean = 0.0;
      for (const double v : values) mean += v;
      mean /= double(values.size());
      stats.mean = mean;
      if (values.size() >= 2) {
        double ss = 0.0;
        for (const double v : values) ss += (v - mean) * (v - mean);
        stats.stderr_mean =
            std::sqrt(ss / double(values.size() - 1) / double(values.size()));
      }
      report.groups.push_back(std::move(stats));
    }
  }

  for (const auto& [method_a, method_b] : method_pairs) {
    // Seed-matched within each problem. A method appearing with several
    // configurations for the same (problem, seed) is ambiguous.
    std::map<std::pair<std::string, std::uint64_t>, double> side_a;
    std::map<std::pair<std::string, std::uint64_t>, double> side_b;
    auto insert_side =
        [](std::map<std::pair<std::string, std::uint64_t>, double>& side,
           const RunRecord& r, const std::string& method) {
          const auto key = std::make_pair(r.problem_name, r.seed);
          if (side.count(key)) {
            throw std::invalid_argument(
                "ambiguous pair: multiple " + method + " records for problem " +
                r.problem_name + " seed " + std::to_string(r.seed));
          }
          side[key] = r.final_reward;
        };
    for (const RunRecord* r : ok) {
      if (r->method == method_a) insert_side(side_a, *r, method_a);
      if (r->method == method_b) insert_side(side_b, *r, method_b);
    }
    std::string orphans;
    for (const auto& [key, value] : side_a) {
      if (!side_b.count(key)) {
        orphans += " " + key.first + ":" + std::to_string(key.second);
      }
    }
    for (const auto& [key, value] : side_b) {
      if (!side_a.count(key)) {
        orphans += " " + key.first + ":" + std::to_string(key.second);
      }
    }
    if (!orphans.empty()) {
      throw std::invalid_argument("pair " + method_a + "/" + method_b +
                                  " has unmatched seeds:" + orphans);
    }
    if (side_a.empty()) {
      throw std::invalid_argument("pair " + method_a + "/" + method_b +
                                  " matches no records");
    }
    std::vector<double> diffs;
    diffs.reserve(side_a.size());
    for (const auto& [key, value] : side_a) {
      diffs.push_back(value - side_b.at(key));
    }
    PairStats pair;
    pair.method_a = method_a;
    pair.method_b = method_b;
    pair.n = static_cast<int>(diffs.size());
    double mean = 0.0;
    for (const double d : diffs) mean += d;
    pair.mean_diff = mean / double(diffs.size());
    pair.p_value = paired_sign_flip_p(diffs);
    report.pairs.push_back(std::move(pair));
  }
  return report;
}

void write_report(const std::string& out_dir, const AggregateReport& report) {
  nlohmann::ordered_json j;
  j["group_fields"] = report.group_fields;
  j["groups"] = nlohmann::ordered_json::array();
  for (const GroupStats& g : report.groups) {
    nlohmann::ordered_json item;
    for (std::size_t i = 0; i < report.group_fields.size(); ++i) {
      item[report.group_fields[i]] = g.key_values[i];
    }
    item["mean"] = g.mean;
    item["stderr"] = g.stderr_mean;
    item["count"] = g.count;
    j["groups"].push_back(std::move(item));
  }
  j["pairs"] = nlohmann::ordered_json::array();
  for (const PairStats& p : report.pairs) {
    nlohmann::ordered_json item;
    item["a"] = p.method_a;
    item["b"] = p.method_b;
    item["n"] = p.n;
    item["mean_diff"] = p.mean_diff;
    item["p_value"] = p.p_value;
    j["pairs"].push_back(std::move(item));
  }
  fs::create_directories(out_dir);
  {
    const fs::path tmp = fs::path(out_dir) / "report.json.tmp";
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << j.dump(2) << "\n";
    out.close();
    fs::rename(tmp, fs::path(out_dir) / "report.json");
  }

  if (report.group_fields.empty() || report.groups.empty()) return;
  // One plot file per combination of the trailing grouping fields; rows run
  // over the first field.
  std::map<std::string, std::string> files;
  for (const GroupStats& g : report.groups) {
    std::string label;
    for (std::size_t i = 1; i < g.key_values.size(); ++i) {
      if (!label.empty()) label += "-";
      label += sanitize(g.key_values[i]);
    }
    const std::string name =
        sanitize(report.group_fields[0]) + (label.empty() ? "" : "-" + label);
    auto& contents = files[name];
    if (contents.empty()) {
      contents = report.group_fields[0] + ",mean,stderr\n";
    }
    contents += g.key_values[0] + "," + format_double(g.mean) + "," +
                format_double(g.stderr_mean) + "\n";
  }
  const fs::path plot_dir = fs::path(out_dir) / "plotdata";
  fs::create_directories(plot_dir);
  for (const auto& [name, contents] : files) {
    const fs::path tmp = plot_dir / (name + ".csv.tmp");
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << contents;
    out.close();
    fs::rename(tmp, plot_dir / (name + ".csv"));
  }
}

}  // namespace dlbs
