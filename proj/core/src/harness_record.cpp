#include "dlbs/harness/record.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace fs = std::filesystem;

namespace dlbs {

namespace {

using ojson = nlohmann::ordered_json;

void atomic_write(const fs::path& path, const std::string& contents) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
  }
  fs::rename(tmp, path);
}

std::string csv_escape(const std::string& cell) {
  if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
  std::string quoted = "\"";
  for (const char c : cell) {
    if (c == '"') quoted += "\"\"";
    else quoted.push_back(c);
  }
  quoted.push_back('"');
  return quoted;
}

std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

}  // namespace

std::string format_double(double value) {
  char buffer[64];
  const auto result =
      std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

std::string record_to_json(const RunRecord& record) {
  ojson j;
  j["config_hash"] = record.config_hash;
  j["seed"] = record.seed;
  j["method"] = record.method;
  j["K"] = record.K;
  j["B"] = record.B;
  j["T_prime"] = record.T_prime;
  j["eta"] = record.eta;
  j["solver"] = record.solver;
  j["problem_name"] = record.problem_name;
  j["final_reward"] = record.final_reward;
  j["nfe"] = record.nfe;
  j["wall_clock_s"] = record.wall_clock_s;
  j["trace_path"] = record.trace_path;
  j["status"] = record.status;
  if (record.diversity) j["diversity"] = *record.diversity;
  j["warnings"] = record.warnings;
  return j.dump(2) + "\n";
}

RunRecord record_from_json(const std::string& text) {
  const ojson j = ojson::parse(text);
  RunRecord record;
  record.config_hash = j.at("config_hash").get<std::string>();
  record.seed = j.at("seed").get<std::uint64_t>();
  record.method = j.at("method").get<std::string>();
  record.K = j.at("K").get<int>();
  record.B = j.at("B").get<int>();
  record.T_prime = j.at("T_prime").get<int>();
  record.eta = j.at("eta").get<double>();
  record.solver = j.at("solver").get<std::string>();
  record.problem_name = j.at("problem_name").get<std::string>();
  record.final_reward = j.at("final_reward").get<double>();
  record.nfe = j.at("nfe").get<std::int64_t>();
  record.wall_clock_s = j.at("wall_clock_s").get<double>();
  record.trace_path = j.at("trace_path").get<std::string>();
  record.status = j.at("status").get<std::string>();
  if (j.contains("diversity")) record.diversity = j["diversity"].get<double>();
  record.warnings = j.at("warnings").get<std::vector<std::string>>();
  return record;
}

std::string record_path(const std::string& dir, const std::string& config_hash,
                        std::uint64_t seed) {
  return (fs::path(dir) / "records" /
          (config_hash + "-" + std::to_string(seed) + ".json"))
      .string();
}

std::string record_path(const std::string& dir, const RunRecord& record) {
  return record_path(dir, record.config_hash, record.seed);
}

void write_record(const std::string& dir, const RunRecord& record) {
  atomic_write(record_path(dir, record), record_to_json(record));
}

std::vector<RunRecord> scan_records(const std::string& dir) {
  std::vector<RunRecord> records;
  const fs::path root = fs::path(dir) / "records";
  if (!fs::exists(root)) return records;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    if (entry.path().extension() != ".json") continue;
    if (entry.path().stem().string().ends_with(".trace")) continue;
    std::ifstream in(entry.path());
    std::stringstream buffer;
    buffer << in.rdbuf();
    records.push_back(record_from_json(buffer.str()));
  }
  std::sort(records.begin(), records.end(),
            [](const RunRecord& a, const RunRecord& b) {
              if (a.config_hash != b.config_hash) {
                return a.config_hash < b.config_hash;
              }
              return a.seed < b.seed;
            });
  return records;
}

namespace {

const char* kCsvHeader =
    "config_hash,seed,method,K,B,T_prime,eta,solver,problem_name,"
    "final_reward,nfe,wall_clock_s,status,diversity,trace_path";

}  // namespace

void write_results_csv(const std::string& dir,
                       const std::vector<RunRecord>& records) {
  std::string out(kCsvHeader);
  out.push_back('\n');
  for (const RunRecord& r : records) {
    out += csv_escape(r.config_hash);
    out += ',' + std::to_string(r.seed);
    out += ',' + csv_escape(r.method);
    out += ',' + std::to_string(r.K);
    out += ',' + std::to_string(r.B);
    out += ',' + std::to_string(r.T_prime);
    out += ',' + format_double(r.eta);
    out += ',' + csv_escape(r.solver);
    out += ',' + csv_escape(r.problem_name);
    out += ',' + format_double(r.final_reward);
    out += ',' + std::to_string(r.nfe);
    out += ',' + format_double(r.wall_clock_s);
    out += ',' + csv_escape(r.status);
    out += ',';
    if (r.diversity) out += format_double(*r.diversity);
    out += ',' + csv_escape(r.trace_path);
    out.push_back('\n');
  }
  atomic_write(fs::path(dir) / "results.csv", out);
}

std::vector<RunRecord> load_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV: " + path);
  {
    std::string header = line;
    if (!header.empty() && header.back() == '\r') header.pop_back();
    if (header != kCsvHeader) {
      throw std::runtime_error(path + ": unexpected CSV header");
    }
  }
  std::vector<RunRecord> records;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> cells = csv_split(line);
    if (cells.size() != 15) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected 15 columns");
    }
    RunRecord r;
    r.config_hash = cells[0];
    r.seed = std::stoull(cells[1]);
    r.method = cells[2];
    r.K = std::stoi(cells[3]);
    r.B = std::stoi(cells[4]);
    r.T_prime = std::stoi(cells[5]);
    r.eta = std::stod(cells[6]);
    r.solver = cells[7];
    r.problem_name = cells[8];
    r.final_reward = std::stod(cells[9]);
    r.nfe = std::stoll(cells[10]);
    r.wall_clock_s = std::stod(cells[11]);
    r.status = cells[12];
    if (!cells[13].empty()) r.diversity = std::stod(cells[13]);
    r.trace_path = cells[14];
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace dlbs
