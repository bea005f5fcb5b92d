#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dlbs/harness/config.hpp"
#include "dlbs/harness/record.hpp"
#include "dlbs/harness/report.hpp"
#include "dlbs/harness/runner.hpp"
#include "dlbs/search.hpp"

namespace fs = std::filesystem;
using namespace dlbs;

namespace {

std::string fresh_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("dlbs_harness_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

void put_file(const std::string& path, const std::string& text) {
  fs::create_directories(fs::path(path).parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(bool(in));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

const char* kBaseConfig = R"({
  "problem": {"name": "bimodal-1d"},
  "schedule": {"T": 10},
  "search": {"method": "dlbs", "K": 2, "B": 2, "seed": 3},
  "reward": {"kind": "mode_distance", "component": 0}
})";

RunRecord make_record(const std::string& method, std::uint64_t seed,
                      double reward, int K = 2, int B = 2,
                      const std::string& problem = "bimodal-1d") {
  RunRecord r;
  r.config_hash = "hash-" + method;
  r.seed = seed;
  r.method = method;
  r.K = K;
  r.B = B;
  r.T_prime = 1;
  r.eta = 1.0;
  r.solver = "ddim";
  r.problem_name = problem;
  r.final_reward = reward;
  r.nfe = 100;
  r.wall_clock_s = 0.5;
  return r;
}

std::string stripped(RunRecord r) {
  r.wall_clock_s = 0.0;
  return record_to_json(r);
}

}  // namespace

TEST_CASE("config parsing fills defaults") {
  const RunSpec spec = parse_config(kBaseConfig, "cfg");
  CHECK(spec.problem.name == "bimodal-1d");
  CHECK(spec.schedule.beta_start == 0.002);
  CHECK(spec.schedule.beta_end == 0.18);
  CHECK(spec.schedule.T == 10);
  CHECK(spec.search.method == Method::kDlbs);
  CHECK(spec.search.K == 2);
  CHECK(spec.search.B == 2);
  CHECK(spec.search.seed == 3);
  CHECK(spec.search.eta == 1.0);
  CHECK(spec.search.solver == Solver::kDdim);
  CHECK(spec.search.step_high == -1);
  CHECK(spec.search.step_low == 1);
  CHECK(spec.reward.kind == TestbedRewardKind::kModeDistance);
  CHECK(spec.reward.component == 0);
  CHECK(spec.output.dir.empty());
  CHECK_FALSE(spec.output.trace);
  CHECK_FALSE(spec.sweep.present);
  CHECK_FALSE(spec.ablate.present);
}

TEST_CASE("config parsing rejects unknown keys") {
  CHECK_THROWS_WITH_AS(
      parse_config(R"({"problem": {"name": "bimodal-1d"}, "extra": 1,
                       "search": {"method": "bon"},
                       "reward": {"component": 0}})",
                   "cfg"),
      doctest::Contains("unknown key 'extra'"), std::runtime_error);
  CHECK_THROWS_WITH(
      parse_config(R"({"problem": {"name": "bimodal-1d"},
                       "search": {"method": "bon", "beams": 4},
                       "reward": {"component": 0}})",
                   "cfg"),
      doctest::Contains("search: unknown key 'beams'"));
}

TEST_CASE("config parse errors cite origin, line, and column") {
  const std::string bad = "{\n  \"problem\": !\n}";
  try {
    parse_config(bad, "cfg");
    FAIL("expected a parse error");
  } catch (const std::runtime_error& e) {
    const std::string what = e.what();
    CHECK(what.find("cfg:2:") == 0);
  }
}

TEST_CASE("config parsing reports missing and mistyped fields") {
  CHECK_THROWS_WITH(parse_config(R"({"search": {"method": "bon"}})", "cfg"),
                    doctest::Contains("missing problem section"));
  CHECK_THROWS_WITH(
      parse_config(R"({"problem": {"name": "bimodal-1d"}})", "cfg"),
      doctest::Contains("missing search section"));
  CHECK_THROWS_WITH(
      parse_config(R"({"problem": {"name": "bimodal-1d"},
                       "search": {"K": 2}})",
                   "cfg"),
      doctest::Contains("search.method is required"));
  CHECK_THROWS_WITH(
      parse_config(R"({"problem": {"name": "bimodal-1d"},
                       "search": {"method": "dlbs", "K": 2.5},
                       "reward": {"component": 0}})",
                   "cfg"),
      doctest::Contains("search.K"));
  // mode_distance with neither a target nor a component cannot be resolved.
  CHECK_THROWS_WITH(
      parse_config(R"({"problem": {"name": "bimodal-1d"},
                       "search": {"method": "bon"}})",
                   "cfg"),
      doctest::Contains("target or a component"));
}

TEST_CASE("config parsing applies search invariants") {
  CHECK_THROWS_WITH(
      parse_config(R"({"problem": {"name": "bimodal-1d"},
                       "search": {"method": "bon", "K": 2},
                       "reward": {"component": 0}})",
                   "cfg"),
      doctest::Contains("bon"));
  CHECK_THROWS_WITH(
      parse_config(R"({"problem": {"name": "bimodal-1d"},
                       "search": {"method": "dlbs", "eta": 1.5},
                       "reward": {"component": 0}})",
                   "cfg"),
      doctest::Contains("eta"));
  CHECK_THROWS_WITH(
      parse_config(R"({"problem": {"name": "bimodal-1d"},
                       "search": {"method": "warp"},
                       "reward": {"component": 0}})",
                   "cfg"),
      doctest::Contains("warp"));
  CHECK_THROWS_WITH(
      parse_config(R"({"problem": {"name": "no-such-preset"},
                       "search": {"method": "bon"},
                       "reward": {"target": [0.0]}})",
                   "cfg"),
      doctest::Contains("no-such-preset"));
}

TEST_CASE("sweep seeds and seed_count are exclusive alternatives") {
  const std::string with = R"({
    "problem": {"name": "bimodal-1d"},
    "search": {"method": "dlbs", "K": 2, "B": 2},
    "reward": {"component": 0},
    "sweep": {"axes": {"K": [1, 2]}, "seed_count": 3}
  })";
  const RunSpec spec = parse_config(with, "cfg");
  REQUIRE(spec.sweep.present);
  CHECK(spec.sweep.seeds == std::vector<std::uint64_t>{0, 1, 2});
  REQUIRE(spec.sweep.axes.size() == 1);
  CHECK(spec.sweep.axes[0].first == "K");

  CHECK_THROWS_WITH(
      parse_config(R"({"problem": {"name": "bimodal-1d"},
                       "search": {"method": "dlbs"},
                       "reward": {"component": 0},
                       "sweep": {"axes": {"K": [1]},
                                 "seeds": [0], "seed_count": 2}})",
                   "cfg"),
      doctest::Contains("either seeds or seed_count"));
  CHECK_THROWS_WITH(
      parse_config(R"({"problem": {"name": "bimodal-1d"},
                       "search": {"method": "dlbs"},
                       "reward": {"component": 0},
                       "sweep": {"axes": {"K": [1]}}})",
                   "cfg"),
      doctest::Contains("needs seeds or seed_count"));
}

TEST_CASE("load_config reads files and names them in errors") {
  const std::string dir = fresh_dir("load");
  const std::string path = dir + "/run.json";
  put_file(path, kBaseConfig);
  const RunSpec spec = load_config(path);
  CHECK(spec.schedule.T == 10);
  CHECK_THROWS_WITH(load_config(dir + "/absent.json"),
                    doctest::Contains("absent.json"));
}

TEST_CASE("config hash ignores presentation details") {
  const RunSpec base = parse_config(kBaseConfig, "cfg");
  const std::string h = config_hash(base);
  CHECK(h.size() == 64);
  CHECK(h.find_first_not_of("0123456789abcdef") == std::string::npos);

  // Key order and equivalent number renderings.
  const RunSpec reordered = parse_config(R"({
    "reward": {"component": 0, "kind": "mode_distance"},
    "search": {"seed": 3, "B": 2, "K": 2, "method": "dlbs", "eta": 1.0},
    "schedule": {"T": 10},
    "problem": {"name": "bimodal-1d"}
  })",
                                         "cfg");
  CHECK(config_hash(reordered) == h);

  // The seed and the output section are not part of the identity.
  RunSpec reseeded = base;
  reseeded.search.seed = 99;
  CHECK(config_hash(reseeded) == h);
  RunSpec routed = base;
  routed.output.dir = "elsewhere";
  routed.output.trace = true;
  CHECK(config_hash(routed) == h);

  // A default step_high means the full range.
  RunSpec full = base;
  full.search.step_high = 10;
  CHECK(config_hash(full) == h);

  // Reward references are resolved before hashing: component 0 of
  // bimodal-1d is the mode at -2.
  const RunSpec explicit_target = parse_config(R"({
    "problem": {"name": "bimodal-1d"},
    "schedule": {"T": 10},
    "search": {"method": "dlbs", "K": 2, "B": 2, "seed": 3},
    "reward": {"kind": "mode_distance", "target": [-2.0]}
  })",
                                               "cfg");
  CHECK(config_hash(explicit_target) == h);
  CHECK(canonical_config_text(explicit_target) == canonical_config_text(base));

  // Any semantic change moves the hash.
  RunSpec changed = base;
  changed.search.K = 4;
  CHECK(config_hash(changed) != h);
  RunSpec retargeted = base;
  retargeted.reward.component = 1;
  CHECK(config_hash(retargeted) != h);
  RunSpec stretched = base;
  stretched.schedule.T = 20;
  CHECK(config_hash(stretched) != h);
}

TEST_CASE("sha256 matches the published test vector") {
  CHECK(sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("format_double renders shortest round-trip text") {
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-2.0) == "-2");
  for (const double v : {3.141592653589793, 1.0 / 3.0, 1e-17, 6.02e23,
                         -0.0625, 123456789.123456789}) {
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("run records survive a JSON round trip") {
  RunRecord r = make_record("dlbs", 7, -0.125);
  r.config_hash = "abc123";
  r.T_prime = 6;
  r.eta = 0.5;
  r.nfe = 1200;
  r.wall_clock_s = 1.75;
  r.trace_path = "records/abc123-7.trace.json";
  r.status = "ok";
  r.diversity = 0.375;
  r.warnings = {"first warning", "second, with comma"};

  const RunRecord back = record_from_json(record_to_json(r));
  CHECK(back.config_hash == r.config_hash);
  CHECK(back.seed == r.seed);
  CHECK(back.method == r.method);
  CHECK(back.K == r.K);
  CHECK(back.B == r.B);
  CHECK(back.T_prime == r.T_prime);
  CHECK(back.eta == r.eta);
  CHECK(back.solver == r.solver);
  CHECK(back.problem_name == r.problem_name);
  CHECK(back.final_reward == r.final_reward);
  CHECK(back.nfe == r.nfe);
  CHECK(back.wall_clock_s == r.wall_clock_s);
  CHECK(back.trace_path == r.trace_path);
  CHECK(back.status == r.status);
  REQUIRE(bool(back.diversity));
  CHECK(*back.diversity == 0.375);
  CHECK(back.warnings == r.warnings);

  RunRecord plain = make_record("bon", 0, 1.0, 1, 4);
  const RunRecord plain_back = record_from_json(record_to_json(plain));
  CHECK_FALSE(bool(plain_back.diversity));
}

TEST_CASE("record scan orders by hash then seed and skips traces") {
  const std::string dir = fresh_dir("scan");
  RunRecord b2 = make_record("dlbs", 2, 0.0);
  b2.config_hash = "bbb";
  RunRecord a5 = make_record("dlbs", 5, 1.0);
  a5.config_hash = "aaa";
  RunRecord a1 = make_record("dlbs", 1, 2.0);
  a1.config_hash = "aaa";
  write_record(dir, b2);
  write_record(dir, a5);
  write_record(dir, a1);
  put_file(dir + "/records/aaa-1.trace.json", "not json at all");
  put_file(dir + "/records/notes.txt", "ignored");

  const std::vector<RunRecord> scanned = scan_records(dir);
  REQUIRE(scanned.size() == 3);
  CHECK(scanned[0].config_hash == "aaa");
  CHECK(scanned[0].seed == 1);
  CHECK(scanned[1].config_hash == "aaa");
  CHECK(scanned[1].seed == 5);
  CHECK(scanned[2].config_hash == "bbb");
  CHECK(scanned[2].seed == 2);
}

TEST_CASE("results CSV round trips and validates its header") {
  const std::string dir = fresh_dir("csv");
  RunRecord with_div = make_record("dlbs", 1, -0.5);
  with_div.diversity = 0.25;
  with_div.warnings = {"dropped"};
  RunRecord bare = make_record("bon", 2, 0.75, 1, 4);

  write_results_csv(dir, {with_div, bare});
  const std::string path = dir + "/results.csv";
  const std::vector<RunRecord> loaded = load_results_csv(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].method == "dlbs");
  CHECK(loaded[0].final_reward == -0.5);
  REQUIRE(bool(loaded[0].diversity));
  CHECK(*loaded[0].diversity == 0.25);
  CHECK(loaded[1].method == "bon");
  CHECK_FALSE(bool(loaded[1].diversity));
  // Warnings live in the per-run JSON, not the summary table.
  CHECK(loaded[0].warnings.empty());

  put_file(dir + "/bad_header.csv", "not,the,right,header\n");
  CHECK_THROWS_WITH(load_results_csv(dir + "/bad_header.csv"),
                    doctest::Contains("unexpected CSV header"));
  const std::string header = slurp(path).substr(0, slurp(path).find('\n'));
  put_file(dir + "/short_row.csv", header + "\nonly,three,cells\n");
  CHECK_THROWS_WITH(load_results_csv(dir + "/short_row.csv"),
                    doctest::Contains(":2:"));
  CHECK_THROWS_WITH(load_results_csv(dir + "/missing.csv"),
                    doctest::Contains("cannot open"));
}

TEST_CASE("harness_search writes a record and resumes from it") {
  const std::string dir = fresh_dir("search");
  const RunSpec spec = parse_config(kBaseConfig, "cfg");
  HarnessOptions options;
  options.out_dir = dir;

  const RunRecord first = harness_search(spec, options);
  CHECK(first.status == "ok");
  CHECK(first.seed == 3);
  CHECK(first.nfe == nfe_estimate(spec.search, spec.schedule.T));
  CHECK(first.trace_path.empty());
  REQUIRE(bool(first.diversity));
  CHECK(fs::exists(record_path(dir, first)));
  CHECK(fs::exists(dir + "/results.csv"));

  options.resume = true;
  const RunRecord resumed = harness_search(spec, options);
  CHECK(record_to_json(resumed) == record_to_json(first));

  options.resume = false;
  const RunRecord rerun = harness_search(spec, options);
  CHECK(stripped(rerun) == stripped(first));

  options.seed_offset = 7;
  const RunRecord shifted = harness_search(spec, options);
  CHECK(shifted.seed == 10);
  CHECK(shifted.config_hash == first.config_hash);
  CHECK(fs::exists(record_path(dir, first.config_hash, 10)));
  CHECK(load_results_csv(dir + "/results.csv").size() == 2);
}

TEST_CASE("harness_search writes a trace when asked") {
  const std::string dir = fresh_dir("trace");
  RunSpec spec = parse_config(kBaseConfig, "cfg");
  spec.output.trace = true;
  HarnessOptions options;
  options.out_dir = dir;

  const RunRecord record = harness_search(spec, options);
  REQUIRE_FALSE(record.trace_path.empty());
  const std::string trace_file = dir + "/" + record.trace_path;
  REQUIRE(fs::exists(trace_file));
  const nlohmann::json trace = nlohmann::json::parse(slurp(trace_file));
  REQUIRE(trace.is_array());
  REQUIRE(trace.size() == 10);
  CHECK(trace.front().at("step") == 10);
  CHECK(trace.back().at("step") == 1);
  CHECK(trace.front().at("rewards").size() == 4);  // K*B candidates
  CHECK(trace.front().at("selected").size() == 2);

  // The stored record remembers where its trace went.
  const RunRecord scanned = scan_records(dir).at(0);
  CHECK(scanned.trace_path == record.trace_path);
}

TEST_CASE("harness_sweep covers the grid and resumes cleanly") {
  const std::string dir = fresh_dir("sweep");
  const RunSpec spec = parse_config(R"({
    "problem": {"name": "bimodal-1d"},
    "schedule": {"T": 10},
    "search": {"method": "dlbs", "K": 2, "B": 2},
    "reward": {"component": 0},
    "sweep": {"axes": {"K": [1, 2]}, "seeds": [0, 1, 2]}
  })",
                                    "cfg");
  HarnessOptions options;
  options.out_dir = dir;

  const std::vector<RunRecord> first = harness_sweep(spec, options);
  REQUIRE(first.size() == 6);
  int k1 = 0;
  for (const RunRecord& r : first) {
    CHECK(r.status == "ok");
    if (r.K == 1) ++k1;
  }
  CHECK(k1 == 3);
  CHECK(load_results_csv(dir + "/results.csv").size() == 6);

  // Wipe one record; resume re-runs only that one and reproduces it.
  fs::remove(record_path(dir, first[0]));
  options.resume = true;
  const std::vector<RunRecord> resumed = harness_sweep(spec, options);
  REQUIRE(resumed.size() == 6);
  std::map<std::string, std::string> before;
  for (const RunRecord& r : first) {
    before[r.config_hash + "/" + std::to_string(r.seed)] = stripped(r);
  }
  for (const RunRecord& r : resumed) {
    CHECK(before.at(r.config_hash + "/" + std::to_string(r.seed)) ==
          stripped(r));
  }

  RunSpec no_sweep = parse_config(kBaseConfig, "cfg");
  CHECK_THROWS_WITH(harness_sweep(no_sweep, options),
                    doctest::Contains("no sweep section"));
}

TEST_CASE("harness_sweep records failures without aborting") {
  const std::string dir = fresh_dir("sweep_fail");
  RunSpec spec = parse_config(R"({
    "problem": {"name": "bimodal-1d"},
    "schedule": {"T": 10},
    "search": {"method": "dlbs", "K": 2, "B": 2},
    "reward": {"component": 0},
    "sweep": {"axes": {"eta": [0.5, 1.0]}, "seeds": [0]}
  })",
                              "cfg");
  // Wrong-dimension linear weights only blow up when a run is executed.
  spec.reward.kind = TestbedRewardKind::kLinear;
  spec.reward.weights = {1.0, 2.0};
  HarnessOptions options;
  options.out_dir = dir;

  const std::vector<RunRecord> records = harness_sweep(spec, options);
  REQUIRE(records.size() == 2);
  for (const RunRecord& r : records) {
    CHECK(r.status == "failed");
    CHECK(r.final_reward == 0.0);
    REQUIRE_FALSE(r.warnings.empty());
    CHECK(fs::exists(record_path(dir, r)));
  }
  const std::vector<RunRecord> loaded = load_results_csv(dir + "/results.csv");
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].status == "failed");
}

TEST_CASE("harness_ablate pairs estimator error with search reward") {
  const std::string dir = fresh_dir("ablate");
  RunSpec spec = parse_config(R"({
    "problem": {"name": "bimodal-1d"},
    "schedule": {"T": 10},
    "search": {"method": "dlbs_la", "K": 2, "B": 2, "T_prime": 2, "seed": 1},
    "reward": {"component": 0},
    "ablate": {"T_primes": [1, 2, 5], "latents": 40, "seeds": [0, 1]}
  })",
                              "cfg");
  HarnessOptions options;
  options.out_dir = dir;

  const std::vector<AblateRow> rows = harness_ablate(spec, options);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].T_prime == 1);
  CHECK(rows[1].T_prime == 2);
  CHECK(rows[2].T_prime == 5);
  // More lookahead steps track the full rollout better; at the midpoint
  // (step 5 of 10) five steps reproduce it exactly.
  CHECK(rows[1].mean_error < rows[0].mean_error);
  CHECK(rows[2].mean_error == 0.0);
  for (const AblateRow& row : rows) {
    CHECK(std::isfinite(row.mean_reward));
  }

  const std::string csv = slurp(dir + "/ablate.csv");
  CHECK(csv.rfind("T_prime,mean_error,mean_reward\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

  RunSpec bad_mid = spec;
  bad_mid.ablate.mid_step = 99;
  CHECK_THROWS_WITH(harness_ablate(bad_mid, options),
                    doctest::Contains("mid_step"));
  RunSpec no_ablate = parse_config(kBaseConfig, "cfg");
  CHECK_THROWS_WITH(harness_ablate(no_ablate, options),
                    doctest::Contains("no ablate section"));
}

TEST_CASE("execute_run audits cost and reports beam diversity") {
  const RunSpec spec = parse_config(kBaseConfig, "cfg");
  std::vector<SearchTraceStep> trace;
  const RunRecord with_trace =
      execute_run(spec, spec.search, 1, true, &trace);
  CHECK(with_trace.nfe == nfe_estimate(spec.search, spec.schedule.T));
  CHECK(trace.size() == 10);
  REQUIRE(bool(with_trace.diversity));
  CHECK(*with_trace.diversity >= 0.0);
  CHECK(*with_trace.diversity <= 2.0);

  SearchConfig solo = spec.search;
  solo.method = Method::kGreedy;
  solo.K = 4;
  solo.B = 1;
  const RunRecord single = execute_run(spec, solo, 1, false);
  CHECK_FALSE(bool(single.diversity));
}

TEST_CASE("aggregate groups rewards and filters failures") {
  std::vector<RunRecord> records;
  records.push_back(make_record("dlbs", 0, 1.0));
  records.push_back(make_record("dlbs", 1, 2.0));
  records.push_back(make_record("dlbs", 2, 3.0));
  records.push_back(make_record("bon", 0, 0.0, 1, 4));
  records.push_back(make_record("bon", 1, 1.0, 1, 4));
  records.push_back(make_record("bon", 2, 2.0, 1, 4));
  RunRecord failed = make_record("dlbs", 9, 999.0);
  failed.status = "failed";
  records.push_back(failed);

  const AggregateReport report = aggregate(records, {"method"}, {});
  REQUIRE(report.groups.size() == 2);
  CHECK(report.groups[0].key_values == std::vector<std::string>{"bon"});
  CHECK(report.groups[0].mean == doctest::Approx(1.0));
  CHECK(report.groups[0].count == 3);
  CHECK(report.groups[1].key_values == std::vector<std::string>{"dlbs"});
  CHECK(report.groups[1].mean == doctest::Approx(2.0));
  CHECK(report.groups[1].stderr_mean ==
        doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-12));

  CHECK_THROWS_WITH(aggregate(records, {"flavor"}, {}),
                    doctest::Contains("unknown grouping field"));
}

TEST_CASE("aggregate sorts numeric keys numerically") {
  std::vector<RunRecord> records;
  records.push_back(make_record("dlbs", 0, 1.0, 10, 2));
  records.push_back(make_record("dlbs", 1, 1.0, 2, 2));
  records.push_back(make_record("dlbs", 2, 1.0, 4, 2));

  const AggregateReport by_k = aggregate(records, {"K"}, {});
  REQUIRE(by_k.groups.size() == 3);
  CHECK(by_k.groups[0].key_values[0] == "2");
  CHECK(by_k.groups[1].key_values[0] == "4");
  CHECK(by_k.groups[2].key_values[0] == "10");
  CHECK(by_k.groups[0].stderr_mean == 0.0);

  const AggregateReport by_kb = aggregate({make_record("dlbs", 0, 1.0, 4, 8)},
                                          {"KB"}, {});
  REQUIRE(by_kb.groups.size() == 1);
  CHECK(by_kb.groups[0].key_values[0] == "32");
}

TEST_CASE("aggregate pairs methods by problem and seed") {
  std::vector<RunRecord> records;
  for (std::uint64_t s = 0; s < 3; ++s) {
    records.push_back(make_record("dlbs", s, double(s) + 1.0));
    records.push_back(make_record("bon", s, double(s), 1, 4));
  }

  const AggregateReport report =
      aggregate(records, {}, {{"dlbs", "bon"}});
  REQUIRE(report.pairs.size() == 1);
  const PairStats& pair = report.pairs[0];
  CHECK(pair.n == 3);
  CHECK(pair.mean_diff == doctest::Approx(1.0));
  // Constant +1 differences across 3 seeds: only the all-positive sign
  // assignment ties the observed mean, so p sits near 1/8.
  CHECK(pair.p_value > 0.08);
  CHECK(pair.p_value < 0.17);

  auto orphaned = records;
  orphaned.push_back(make_record("bon", 7, 5.0, 1, 4));
  CHECK_THROWS_WITH(aggregate(orphaned, {}, {{"dlbs", "bon"}}),
                    doctest::Contains("unmatched"));
  auto doubled = records;
  doubled.push_back(make_record("dlbs", 0, 4.0));
  CHECK_THROWS_WITH(aggregate(doubled, {}, {{"dlbs", "bon"}}),
                    doctest::Contains("ambiguous"));
  CHECK_THROWS_WITH(aggregate(records, {}, {{"warp", "drift"}}),
                    doctest::Contains("matches no records"));
}

TEST_CASE("write_report emits report.json and plot data") {
  const std::string dir = fresh_dir("report");
  std::vector<RunRecord> records;
  for (std::uint64_t s = 0; s < 2; ++s) {
    records.push_back(make_record("dlbs", s, 1.0 + double(s), 2, 2));
    records.push_back(make_record("bon", s, 0.5 + double(s), 1, 4));
  }
  for (RunRecord& r : records) r.K = r.method == "dlbs" ? 2 : 1;

  const AggregateReport report =
      aggregate(records, {"K", "method"}, {{"dlbs", "bon"}});
  write_report(dir, report);

  const nlohmann::json j = nlohmann::json::parse(slurp(dir + "/report.json"));
  CHECK(j.at("group_fields") == nlohmann::json({"K", "method"}));
  REQUIRE(j.at("groups").size() == 2);
  CHECK(j.at("groups")[0].at("K") == "1");
  CHECK(j.at("groups")[0].at("method") == "bon");
  CHECK(j.at("groups")[0].at("count") == 2);
  REQUIRE(j.at("pairs").size() == 1);
  CHECK(j.at("pairs")[0].at("a") == "dlbs");
  CHECK(j.at("pairs")[0].at("n") == 2);

  CHECK(fs::exists(dir + "/plotdata/K-bon.csv"));
  const std::string plot = slurp(dir + "/plotdata/K-dlbs.csv");
  CHECK(plot.rfind("K,mean,stderr\n", 0) == 0);
  CHECK(plot.find("\n2,") != std::string::npos);
}
