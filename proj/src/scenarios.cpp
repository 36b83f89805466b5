#include <algorithm>
#include <fstream>
#include <set>

#include "gridbound/error.hpp"
#include "gridbound/io.hpp"
#include "gridbound/sim.hpp"

namespace gridbound {

using nlohmann::json;

BoundMode parse_bound_mode(const std::string& text) {
  if (text == "CED-dual") return BoundMode::CedDual;
  if (text == "LMP-anticipated") return BoundMode::LmpAnticipated;
  if (text == "Deterministic-benchmark") return BoundMode::Deterministic;
  if (text == "None") return BoundMode::None;
  throw InputError("unknown bound provenance '" + text +
                   "' (expected CED-dual, LMP-anticipated, Deterministic-benchmark or None)");
}

const char* to_string(BoundMode mode) {
  switch (mode) {
    case BoundMode::CedDual: return "CED-dual";
    case BoundMode::LmpAnticipated: return "LMP-anticipated";
    case BoundMode::Deterministic: return "Deterministic-benchmark";
    case BoundMode::None: return "None";
  }
  return "unknown";
}

namespace {

ComplementarityMode parse_complementarity(const std::string& text) {
  if (text == "relaxed") return ComplementarityMode::Relaxed;
  if (text == "exact") return ComplementarityMode::Exact;
  throw InputError("unknown complementarity mode '" + text + "' (expected relaxed or exact)");
}

const char* window_name(BoundWindow window) { return window == BoundWindow::Full ? "full" : "remaining"; }

template <class T>
T get(const json& doc, const char* key, T fallback) {
  auto it = doc.find(key);
  if (it == doc.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw InputError(std::string("config key '") + key + "': " + e.what());
  }
}

void check_keys(const json& doc, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (!allowed.count(it.key())) throw InputError(where + ": unknown key '" + it.key() + "'");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& file) {
  std::filesystem::path p(file);
  return p.is_relative() && !base.empty() ? base / p : p;
}

// File-backed model specs name their sample file relative to the config.
std::string resolve_model_spec(const std::string& spec, const std::filesystem::path& base) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos || base.empty()) return spec;
  const std::string kind = spec.substr(0, colon);
  const std::string arg = spec.substr(colon + 1);
  if (kind != "empirical" && kind != "versatile") return spec;
  const auto path = resolve(base, arg);
  if (kind == "versatile" && !std::filesystem::exists(path)) return spec;
  return kind + ":" + path.string();
}

}  // namespace

ExperimentConfig experiment_config_from_json(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw InputError("experiment config must be a JSON object");
  check_keys(doc,
             {"network", "profile", "epsilon", "model", "sigma_multiplier", "withholding_scale", "agents",
              "da_scenarios", "rt_samples", "horizon", "complementarity", "bounds", "window", "rolling",
              "generation_scale", "coverage_samples", "sweeps"},
             "experiment config");
  ExperimentConfig c;
  if (!doc.contains("network") || !doc.contains("profile")) {
    throw InputError("experiment config needs 'network' and 'profile'");
  }
  c.network_file = resolve(base_dir, get<std::string>(doc, "network", ""));
  c.profile_file = resolve(base_dir, get<std::string>(doc, "profile", ""));
  c.epsilon = get(doc, "epsilon", c.epsilon);
  c.model = resolve_model_spec(get<std::string>(doc, "model", c.model), base_dir);
  c.sigma_multiplier = get(doc, "sigma_multiplier", c.sigma_multiplier);
  const double default_scale = get(doc, "withholding_scale", 0.0);
  if (auto it = doc.find("agents"); it != doc.end()) {
    if (!it->is_array()) throw InputError("config key 'agents' must be an array");
    for (const auto& a : *it) {
      check_keys(a, {"storage_id", "withholding_scale", "grid_points", "quadrature_nodes"}, "agent entry");
      AgentSpec spec;
      spec.storage_id = get(a, "storage_id", -1);
      if (spec.storage_id < 0) throw InputError("agent entry needs a non-negative 'storage_id'");
      spec.withholding_scale = get(a, "withholding_scale", default_scale);
      spec.grid_points = get(a, "grid_points", spec.grid_points);
      spec.quadrature_nodes = get(a, "quadrature_nodes", spec.quadrature_nodes);
      c.agents.push_back(spec);
    }
  }
  if (doc.contains("withholding_scale")) {
    // Applies to every storage without its own entry; resolved against the
    // network in load_inputs.
    c.agents.push_back({-1, default_scale});
  }
  c.da_scenarios = get(doc, "da_scenarios", c.da_scenarios);
  c.rt_samples = get(doc, "rt_samples", c.rt_samples);
  c.horizon = get(doc, "horizon", c.horizon);
  c.complementarity = parse_complementarity(get<std::string>(doc, "complementarity", "relaxed"));
  c.bounds = parse_bound_mode(get<std::string>(doc, "bounds", "CED-dual"));
  c.window = parse_window(get<std::string>(doc, "window", "remaining"));
  c.rolling = get(doc, "rolling", c.rolling);
  c.generation_scale = get(doc, "generation_scale", c.generation_scale);
  c.coverage_samples = get(doc, "coverage_samples", c.coverage_samples);
  if (auto it = doc.find("sweeps"); it != doc.end()) {
    check_keys(*it, {"soc_points", "sigma", "epsilon"}, "sweeps");
    c.sweeps.soc_points = get(*it, "soc_points", c.sweeps.soc_points);
    c.sweeps.sigma = get(*it, "sigma", c.sweeps.sigma);
    c.sweeps.epsilon = get(*it, "epsilon", c.sweeps.epsilon);
  }

  if (c.da_scenarios < 1 || c.rt_samples < 1 || c.horizon < 1) {
    throw InputError("da_scenarios, rt_samples and horizon must be >= 1");
  }
  if (!(c.sigma_multiplier >= 0.0)) throw InputError("sigma_multiplier must be >= 0");
  if (!(c.epsilon > 0.0 && c.epsilon < 1.0)) throw InputError("epsilon must lie in (0, 1)");
  if (!(c.generation_scale > 0.0)) throw InputError("generation_scale must be > 0");
  if (c.coverage_samples < 1) throw InputError("coverage_samples must be >= 1");
  for (const auto& a : c.agents) {
    if (!(a.withholding_scale >= 0.0 && a.withholding_scale <= 5.0)) {
      throw InputError("withholding_scale must lie in [0, 5]");
    }
  }
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return experiment_config_from_json(doc, path.parent_path());
}

json experiment_config_to_json(const ExperimentConfig& c) {
  json agents = json::array();
  for (const auto& a : c.agents) {
    agents.push_back({{"storage_id", a.storage_id},
                      {"withholding_scale", a.withholding_scale},
                      {"grid_points", a.grid_points},
                      {"quadrature_nodes", a.quadrature_nodes}});
  }
  return {{"network", c.network_file.filename().string()},
          {"profile", c.profile_file.filename().string()},
          {"epsilon", c.epsilon},
          {"model", c.model},
          {"sigma_multiplier", c.sigma_multiplier},
          {"agents", agents},
          {"da_scenarios", c.da_scenarios},
          {"rt_samples", c.rt_samples},
          {"horizon", c.horizon},
          {"seed", c.seed},
          {"complementarity", to_string(c.complementarity)},
          {"bounds", to_string(c.bounds)},
          {"window", window_name(c.window)},
          {"rolling", c.rolling},
          {"generation_scale", c.generation_scale},
          {"coverage_samples", c.coverage_samples}};
}

ExperimentInputs make_inputs(Network network, NetloadForecast base, UncertaintyModel model,
                             const ExperimentConfig& config) {
  validate_forecast(base);
  if (base.node_count() != network.bus_count()) {
    throw InputError("profile covers " + std::to_string(base.node_count()) + " nodes, network has " +
                     std::to_string(network.bus_count()));
  }
  if (base.horizon() < config.horizon) {
    throw InputError("profile covers " + std::to_string(base.horizon()) + " periods, config needs " +
                     std::to_string(config.horizon));
  }
  base.mean = base.mean.leftCols(config.horizon).eval();
  base.std = base.std.leftCols(config.horizon).eval();
  for (auto& gen : network.generators) {
    gen.g_max *= config.generation_scale;
    gen.g_min = std::min(gen.g_min, gen.g_max);
  }
  for (const auto& a : config.agents) {
    if (a.storage_id >= network.storage_count()) {
      throw InputError("agent entry names storage " + std::to_string(a.storage_id) + ", network has " +
                       std::to_string(network.storage_count()));
    }
  }
  ExperimentInputs in;
  in.network = std::make_shared<const Network>(prepare_network(std::move(network)));
  in.forecast = base;
  in.forecast.std *= config.sigma_multiplier;
  in.base = std::move(base);
  in.model = std::move(model);
  return in;
}

ExperimentInputs load_inputs(const ExperimentConfig& config) {
  Network net = load_network(config.network_file);
  NetloadForecast forecast = load_forecast(config.profile_file, net.bus_count());
  UncertaintyModel model = load_model(config.model, forecast);
  return make_inputs(std::move(net), std::move(forecast), std::move(model), config);
}

ScenarioSet generate_scenarios(const NetloadForecast& forecast, const UncertaintyModel& model, int da_count,
                               int rt_count, std::uint64_t seed) {
  validate_forecast(forecast);
  if (da_count < 1 || rt_count < 1) throw InputError("scenario counts must be >= 1");
  ScenarioSet set;
  set.seed = seed;
  for (int k = 0; k < da_count; ++k) {
    RandomStream factor_rng(seed, k);
    const double factor = 0.9 + 0.2 * factor_rng.uniform();
    NetloadForecast da{forecast.mean * factor, forecast.std};
    std::vector<Eigen::MatrixXd> rt;
    rt.reserve(rt_count);
    const std::uint64_t rt_seed = mix_seed(seed, static_cast<std::uint64_t>(k) + 1);
    for (int j = 0; j < rt_count; ++j) {
      RandomStream rng(rt_seed, j);
      rt.push_back(sample_realization(da, model, rng));
    }
    set.da_scenarios.push_back(std::move(da.mean));
    set.rt_samples.push_back(std::move(rt));
  }
  return set;
}

Eigen::MatrixXd clear_day_ahead(std::shared_ptr<const Network> network, const Eigen::MatrixXd& da_netload,
                                int scenario_id) {
  const DispatchProblem problem = build_oed(network, da_netload, static_cast<int>(da_netload.cols()));
  const DispatchSolution sol = solve_dispatch(problem);
  if (!sol.optimal()) {
    throw SolveError("day-ahead clearing of scenario " + std::to_string(scenario_id) + " is " +
                     qp::to_string(sol.status));
  }
  return sol.lmp;
}

}  // namespace gridbound
