#include "dlbs/harness/config.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace dlbs {

namespace {

using ojson = nlohmann::ordered_json;
using sjson = nlohmann::json;  // sorted keys; canonical rendering

[[noreturn]] void fail(const std::string& origin, const std::string& message) {
  throw std::runtime_error(origin + ": " + message);
}

void expect_keys(const ojson& obj, const std::string& section,
                 const std::set<std::string>& allowed,
                 const std::string& origin) {
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) {
      fail(origin, section + ": unknown key '" + item.key() + "'");
    }
  }
}

const ojson* find(const ojson& obj, const std::string& key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double get_double(const ojson& v, const std::string& where,
                  const std::string& origin) {
  if (!v.is_number()) fail(origin, where + ": expected a number");
  return v.get<double>();
}

int get_int(const ojson& v, const std::string& where,
            const std::string& origin) {
  if (!v.is_number_integer()) fail(origin, where + ": expected an integer");
  return v.get<int>();
}

std::string get_string(const ojson& v, const std::string& where,
                       const std::string& origin) {
  if (!v.is_string()) fail(origin, where + ": expected a string");
  return v.get<std::string>();
}

bool get_bool(const ojson& v, const std::string& where,
              const std::string& origin) {
  if (!v.is_boolean()) fail(origin, where + ": expected a boolean");
  return v.get<bool>();
}

std::vector<double> get_double_list(const ojson& v, const std::string& where,
                                    const std::string& origin) {
  if (!v.is_array()) fail(origin, where + ": expected an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& e : v) out.push_back(get_double(e, where, origin));
  return out;
}

std::vector<std::uint64_t> get_seed_list(const ojson& v,
                                         const std::string& where,
                                         const std::string& origin) {
  if (!v.is_array()) fail(origin, where + ": expected an array of integers");
  std::vector<std::uint64_t> out;
  out.reserve(v.size());
  for (const auto& e : v) {
    if (!e.is_number_integer() ||
        (!e.is_number_unsigned() && e.get<std::int64_t>() < 0)) {
      fail(origin, where + ": expected nonnegative integers");
    }
    out.push_back(e.get<std::uint64_t>());
  }
  return out;
}

std::vector<std::uint64_t> parse_seeds(const ojson& section,
                                       const std::string& name,
                                       const std::string& origin) {
  const ojson* seeds = find(section, "seeds");
  const ojson* count = find(section, "seed_count");
  if (seeds && count) {
    fail(origin, name + ": give either seeds or seed_count, not both");
  }
  if (seeds) return get_seed_list(*seeds, name + ".seeds", origin);
  if (count) {
    const int n = get_int(*count, name + ".seed_count", origin);
    if (n < 1) fail(origin, name + ".seed_count: must be >= 1");
    std::vector<std::uint64_t> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out.push_back(static_cast<std::uint64_t>(i));
    return out;
  }
  fail(origin, name + ": needs seeds or seed_count");
}

AxisValue to_axis_value(const ojson& v, const std::string& where,
                        const std::string& origin) {
  if (v.is_number_integer()) return AxisValue{v.get<std::int64_t>()};
  if (v.is_number_float()) return AxisValue{v.get<double>()};
  if (v.is_string()) return AxisValue{v.get<std::string>()};
  fail(origin, where + ": axis values must be numbers or strings");
}

std::string line_of(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return std::to_string(line) + ":" + std::to_string(col);
}

}  // namespace

RunSpec parse_config(const std::string& text, const std::string& origin) {
  ojson root;
  try {
    root = ojson::parse(text);
  } catch (const ojson::parse_error& e) {
    fail(origin + ":" + line_of(text, e.byte), e.what());
  }
  if (!root.is_object()) fail(origin, "top level must be an object");
  expect_keys(root, "top level",
              {"problem", "schedule", "search", "reward", "output", "sweep",
               "ablate"},
              origin);

  RunSpec spec;

  const ojson* problem = find(root, "problem");
  if (!problem) fail(origin, "missing problem section");
  expect_keys(*problem, "problem", {"name"}, origin);
  const ojson* name = find(*problem, "name");
  if (!name) fail(origin, "problem.name is required");
  spec.problem.name = get_string(*name, "problem.name", origin);

  if (const ojson* schedule = find(root, "schedule")) {
    expect_keys(*schedule, "schedule", {"beta_start", "beta_end", "T"}, origin);
    if (const ojson* v = find(*schedule, "beta_start")) {
      spec.schedule.beta_start = get_double(*v, "schedule.beta_start", origin);
    }
    if (const ojson* v = find(*schedule, "beta_end")) {
      spec.schedule.beta_end = get_double(*v, "schedule.beta_end", origin);
    }
    if (const ojson* v = find(*schedule, "T")) {
      spec.schedule.T = get_int(*v, "schedule.T", origin);
    }
  }

  const ojson* search = find(root, "search");
  if (!search) fail(origin, "missing search section");
  expect_keys(*search, "search",
              {"method", "K", "B", "T_prime", "eta", "solver", "step_high",
               "step_low", "seed"},
              origin);
  const ojson* method = find(*search, "method");
  if (!method) fail(origin, "search.method is required");
  try {
    spec.search.method =
        method_from_string(get_string(*method, "search.method", origin));
    if (const ojson* v = find(*search, "K")) {
      spec.search.K = get_int(*v, "search.K", origin);
    }
    if (const ojson* v = find(*search, "B")) {
      spec.search.B = get_int(*v, "search.B", origin);
    }
    if (const ojson* v = find(*search, "T_prime")) {
      spec.search.T_prime = get_int(*v, "search.T_prime", origin);
    }
    if (const ojson* v = find(*search, "eta")) {
      spec.search.eta = get_double(*v, "search.eta", origin);
    }
    if (const ojson* v = find(*search, "solver")) {
      spec.search.solver =
          solver_from_string(get_string(*v, "search.solver", origin));
    }
    if (const ojson* v = find(*search, "step_high")) {
      spec.search.step_high = get_int(*v, "search.step_high", origin);
    }
    if (const ojson* v = find(*search, "step_low")) {
      spec.search.step_low = get_int(*v, "search.step_low", origin);
    }
    if (const ojson* v = find(*search, "seed")) {
      if (!v->is_number_integer()) fail(origin, "search.seed: expected an integer");
      spec.search.seed = v->get<std::uint64_t>();
    }
  } catch (const std::invalid_argument& e) {
    fail(origin, std::string("search: ") + e.what());
  }

  if (const ojson* reward = find(root, "reward")) {
    expect_keys(*reward, "reward",
                {"kind", "target", "component", "region_radius", "weights"},
                origin);
    if (const ojson* v = find(*reward, "kind")) {
      try {
        spec.reward.kind = testbed_reward_kind_from_string(
            get_string(*v, "reward.kind", origin));
      } catch (const std::invalid_argument& e) {
        fail(origin, std::string("reward.kind: ") + e.what());
      }
    }
    if (const ojson* v = find(*reward, "target")) {
      spec.reward.target = get_double_list(*v, "reward.target", origin);
    }
    if (const ojson* v = find(*reward, "component")) {
      spec.reward.component = get_int(*v, "reward.component", origin);
    }
    if (const ojson* v = find(*reward, "region_radius")) {
      spec.reward.region_radius =
          get_double(*v, "reward.region_radius", origin);
    }
    if (const ojson* v = find(*reward, "weights")) {
      spec.reward.weights = get_double_list(*v, "reward.weights", origin);
    }
  }

  if (const ojson* output = find(root, "output")) {
    expect_keys(*output, "output", {"dir", "trace"}, origin);
    if (const ojson* v = find(*output, "dir")) {
      spec.output.dir = get_string(*v, "output.dir", origin);
    }
    if (const ojson* v = find(*output, "trace")) {
      spec.output.trace = get_bool(*v, "output.trace", origin);
    }
  }

  if (const ojson* sweep = find(root, "sweep")) {
    expect_keys(*sweep, "sweep", {"axes", "seeds", "seed_count"}, origin);
    spec.sweep.present = true;
    const ojson* axes = find(*sweep, "axes");
    if (!axes || !axes->is_object()) {
      fail(origin, "sweep.axes: expected an object of value arrays");
    }
    for (const auto& item : axes->items()) {
      if (!item.value().is_array() || item.value().empty()) {
        fail(origin, "sweep.axes." + item.key() +
                         ": expected a nonempty array");
      }
      std::vector<AxisValue> vals;
      vals.reserve(item.value().size());
      for (const auto& v : item.value()) {
        vals.push_back(
            to_axis_value(v, "sweep.axes." + item.key(), origin));
      }
      spec.sweep.axes.emplace_back(item.key(), std::move(vals));
    }
    spec.sweep.seeds = parse_seeds(*sweep, "sweep", origin);
  }

  if (const ojson* ablate = find(root, "ablate")) {
    expect_keys(*ablate, "ablate",
                {"T_primes", "latents", "mid_step", "seeds", "seed_count"},
                origin);
    spec.ablate.present = true;
    if (const ojson* v = find(*ablate, "T_primes")) {
      if (!v->is_array() || v->empty()) {
        fail(origin, "ablate.T_primes: expected a nonempty array");
      }
      spec.ablate.T_primes.clear();
      for (const auto& e : *v) {
        spec.ablate.T_primes.push_back(
            get_int(e, "ablate.T_primes", origin));
      }
    }
    if (const ojson* v = find(*ablate, "latents")) {
      spec.ablate.latents = get_int(*v, "ablate.latents", origin);
    }
    if (const ojson* v = find(*ablate, "mid_step")) {
      spec.ablate.mid_step = get_int(*v, "ablate.mid_step", origin);
    }
    spec.ablate.seeds = parse_seeds(*ablate, "ablate", origin);
  }

  // Fail early on semantic errors, naming the section.
  try {
    problem_mixture(spec);
    problem_schedule(spec);
    validate(spec.search, spec.schedule.T);
    problem_reward(spec);
  } catch (const std::exception& e) {
    fail(origin, e.what());
  }
  return spec;
}

RunSpec load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path);
}

GaussianMixture problem_mixture(const RunSpec& spec) {
  return gmm_preset(spec.problem.name);
}

NoiseSchedule problem_schedule(const RunSpec& spec) {
  return linear_beta_schedule(spec.schedule.beta_start, spec.schedule.beta_end,
                              spec.schedule.T);
}

namespace {

Eigen::VectorXd resolved_target(const RunSpec& spec) {
  if (!spec.reward.target.empty()) {
    return Eigen::Map<const Eigen::VectorXd>(
        spec.reward.target.data(),
        static_cast<Eigen::Index>(spec.reward.target.size()));
  }
  if (spec.reward.component < 0) {
    throw std::invalid_argument(
        "reward: mode_distance needs a target or a component index");
  }
  const GaussianMixture gmm = problem_mixture(spec);
  if (spec.reward.component >= gmm.components()) {
    throw std::invalid_argument("reward.component out of range");
  }
  return gmm.means[static_cast<std::size_t>(spec.reward.component)];
}

}  // namespace

Reward problem_reward(const RunSpec& spec) {
  TestbedRewardSpec reward;
  reward.kind = spec.reward.kind;
  switch (spec.reward.kind) {
    case TestbedRewardKind::kModeDistance:
      reward.target = resolved_target(spec);
      reward.region_radius = spec.reward.region_radius;
      break;
    case TestbedRewardKind::kComponentPreference:
      reward.mixture = problem_mixture(spec);
      reward.component = spec.reward.component;
      break;
    case TestbedRewardKind::kLinear:
      if (spec.reward.weights.empty()) {
        throw std::invalid_argument("reward: linear needs weights");
      }
      reward.weights = Eigen::Map<const Eigen::VectorXd>(
          spec.reward.weights.data(),
          static_cast<Eigen::Index>(spec.reward.weights.size()));
      break;
  }
  return testbed_reward(reward);
}

std::string canonical_config_text(const RunSpec& spec) {
  sjson c;
  c["problem"]["name"] = spec.problem.name;
  c["schedule"]["beta_start"] = spec.schedule.beta_start;
  c["schedule"]["beta_end"] = spec.schedule.beta_end;
  c["schedule"]["T"] = spec.schedule.T;

  const int T = spec.schedule.T;
  c["search"]["method"] = to_string(spec.search.method);
  c["search"]["K"] = spec.search.K;
  c["search"]["B"] = spec.search.B;
  c["search"]["T_prime"] = spec.search.T_prime;
  c["search"]["eta"] = spec.search.eta;
  c["search"]["solver"] = to_string(spec.search.solver);
  c["search"]["step_high"] =
      spec.search.step_high < 0 ? T : spec.search.step_high;
  c["search"]["step_low"] = spec.search.step_low;

  c["reward"]["kind"] = to_string(spec.reward.kind);
  switch (spec.reward.kind) {
    case TestbedRewardKind::kModeDistance: {
      const Eigen::VectorXd target = resolved_target(spec);
      c["reward"]["target"] =
          std::vector<double>(target.data(), target.data() + target.size());
      c["reward"]["region_radius"] = spec.reward.region_radius;
      break;
    }
    case TestbedRewardKind::kComponentPreference:
      c["reward"]["component"] = spec.reward.component;
      break;
    case TestbedRewardKind::kLinear:
      c["reward"]["weights"] = spec.reward.weights;
      break;
  }
  return c.dump();
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(),
                 nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

std::string config_hash(const RunSpec& spec) {
  return sha256_hex(canonical_config_text(spec));
}

}  // namespace dlbs
