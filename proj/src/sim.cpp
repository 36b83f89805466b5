#include "gridbound/sim.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

#include "gridbound/csv.hpp"
#include "gridbound/error.hpp"
#include "gridbound/parallel.hpp"

namespace gridbound {

namespace {

bool same_offer(const StorageOffer& a, const StorageOffer& b) {
  auto eq = [](const std::vector<BidSegment>& x, const std::vector<BidSegment>& y) {
    return std::equal(x.begin(), x.end(), y.begin(), y.end(),
                      [](const BidSegment& l, const BidSegment& r) { return l.quantity == r.quantity && l.price == r.price; });
  };
  return eq(a.discharge, b.discharge) && eq(a.charge, b.charge);
}

double first_price(const std::vector<BidSegment>& segments) {
  return segments.empty() ? std::nan("") : segments.front().price;
}

const AgentSpec* agent_spec_for(const ExperimentConfig& config, int s) {
  const AgentSpec* fallback = nullptr;
  for (const auto& a : config.agents) {
    if (a.storage_id == s) return &a;
    if (a.storage_id < 0) fallback = &a;
  }
  return fallback;
}

// Percentile with linear interpolation between order statistics.
double percentile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return std::nan("");
  const double pos = q * (sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - lo) * (sorted[hi] - sorted[lo]);
}

double percent(double delta, double base) { return base != 0.0 ? 100.0 * delta / std::abs(base) : 0.0; }

}  // namespace

TrialRecord run_realtime_day(std::shared_ptr<const Network> network, const Eigen::MatrixXd& rt_netload,
                             std::vector<StorageAgent> agents, const BidBounds* bounds, ComplementarityMode mode,
                             const RollingBounds& rolling_bounds) {
  const Network& net = *network;
  const int S = net.storage_count();
  const int I = net.generator_count();
  const int T = static_cast<int>(rt_netload.cols());
  if (static_cast<int>(agents.size()) != S) throw InputError("run_realtime_day needs one agent per storage");
  for (int s = 0; s < S; ++s) {
    if (agents[s].storage != s) throw InputError("agents must be ordered by storage index");
    if (agents[s].value.horizon() < T) throw InputError("agent value function is shorter than the day");
    agents[s].soc = net.storages[s].e_initial;
  }
  if (bounds && (bounds->storage_count() != S || bounds->horizon() < T)) {
    throw InputError("bid bounds do not match the storages and horizon");
  }

  TrialRecord rec;
  rec.with_bounds = bounds != nullptr || static_cast<bool>(rolling_bounds);
  rec.storage_profit = Eigen::VectorXd::Zero(S);
  rec.g = Eigen::MatrixXd::Zero(I, T);
  rec.p = Eigen::MatrixXd::Zero(S, T);
  rec.b = Eigen::MatrixXd::Zero(S, T);
  rec.soc = Eigen::MatrixXd::Zero(S, T);
  rec.lmp = Eigen::MatrixXd::Zero(net.bus_count(), T);
  rec.first_discharge_bid = Eigen::MatrixXd::Constant(S, T, std::nan(""));
  rec.first_charge_bid = Eigen::MatrixXd::Constant(S, T, std::nan(""));

  Eigen::VectorXd soc(S);
  std::optional<Eigen::VectorXd> previous;
  for (int t = 0; t < T; ++t) {
    for (int s = 0; s < S; ++s) soc[s] = agents[s].soc;
    std::vector<BoundRow> caps;
    if (rolling_bounds) {
      caps = rolling_bounds(t, soc);
    } else if (bounds) {
      for (int s = 0; s < S; ++s) caps.push_back(bounds->at(s, t));
    }

    std::vector<StorageOffer> offers;
    for (int s = 0; s < S; ++s) {
      StorageOffer offer = bids_from_value(agents[s].value, net.storages[s], soc[s], t);
      if (!caps.empty()) {
        StorageOffer capped = cap_bids(offer, caps[s]);
        if (!same_offer(offer, capped)) ++rec.capped_periods;
        offer = std::move(capped);
      }
      rec.first_discharge_bid(s, t) = first_price(offer.discharge);
      rec.first_charge_bid(s, t) = first_price(offer.charge);
      offers.push_back(std::move(offer));
    }

    DispatchProblem problem = build_sed(network, t + 1, soc, offers, rt_netload.col(t), previous);
    problem.mode = mode;
    DispatchSolution sol;
    try {
      sol = solve_dispatch(problem);
    } catch (const Error& e) {
      rec.failed = true;
      rec.failure = "period " + std::to_string(t + 1) + ": " + e.what();
      return rec;
    }
    if (!sol.optimal()) {
      rec.failed = true;
      rec.failure = "period " + std::to_string(t + 1) + ": SED " + qp::to_string(sol.status);
      return rec;
    }

    rec.g.col(t) = sol.g.col(0);
    rec.p.col(t) = sol.p.col(0);
    rec.b.col(t) = sol.b.col(0);
    rec.lmp.col(t) = sol.lmp.col(0);
    for (int i = 0; i < I; ++i) rec.system_cost += net.generators[i].cost(sol.g(i, 0));
    for (int s = 0; s < S; ++s) {
      const Storage& st = net.storages[s];
      const double p = sol.p(s, 0);
      const double b = sol.b(s, 0);
      rec.system_cost += st.marginal_cost * (p + b);
      rec.storage_profit[s] += sol.lmp(st.bus, 0) * (p - b) - st.marginal_cost * (p + b);
      try {
        agents[s].soc = realize_dispatch(st, agents[s].soc, p, b);
      } catch (const SolveError& e) {
        rec.failed = true;
        rec.failure = "period " + std::to_string(t + 1) + ": " + e.what();
        return rec;
      }
      rec.soc(s, t) = agents[s].soc;
    }
    previous = sol.g.col(0);
  }
  rec.total_profit = rec.storage_profit.sum();
  return rec;
}

Summary summarize(std::vector<double> values) {
  Summary out;
  out.count = static_cast<int>(values.size());
  if (values.empty()) {
    out.mean = out.p5 = out.p50 = out.p95 = std::nan("");
    return out;
  }
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / values.size();
  out.p5 = percentile(values, 0.05);
  out.p50 = percentile(values, 0.50);
  out.p95 = percentile(values, 0.95);
  return out;
}

MetricsReport build_report(const std::vector<TrialRecord>& records, double withholding_scale,
                           double uncertainty_scale) {
  MetricsGroup g;
  g.withholding_scale = withholding_scale;
  g.uncertainty_scale = uncertainty_scale;
  std::vector<double> cost[2], profit[2];
  for (const auto& r : records) {
    const int side = r.with_bounds ? 1 : 0;
    if (!r.with_bounds) ++g.trials;
    if (r.failed) {
      ++(r.with_bounds ? g.failed_with : g.failed_without);
      continue;
    }
    cost[side].push_back(r.system_cost);
    profit[side].push_back(r.total_profit);
  }
  g.cost_without = summarize(cost[0]);
  g.cost_with = summarize(cost[1]);
  g.profit_without = summarize(profit[0]);
  g.profit_with = summarize(profit[1]);
  g.cost_delta = g.cost_with.mean - g.cost_without.mean;
  g.cost_delta_pct = percent(g.cost_delta, g.cost_without.mean);
  g.profit_delta = g.profit_with.mean - g.profit_without.mean;
  g.profit_delta_pct = percent(g.profit_delta, g.profit_without.mean);
  return {{g}};
}

std::optional<BidBounds> scenario_bounds(const ExperimentConfig& config, const ExperimentInputs& inputs,
                                         const Eigen::MatrixXd& da_mean, const Eigen::MatrixXd& da_lmp) {
  const int T = static_cast<int>(da_mean.cols());
  switch (config.bounds) {
    case BoundMode::None: return std::nullopt;
    case BoundMode::Deterministic: return deterministic_bounds(da_lmp, *inputs.network, T);
    case BoundMode::CedDual:
    case BoundMode::LmpAnticipated: break;
  }
  const NetloadForecast forecast{da_mean, inputs.forecast.std.leftCols(T)};
  const DispatchProblem ced = build_ced(inputs.network, forecast, config.epsilon, inputs.model, T);
  const DispatchSolution sol = solve_dispatch(ced);
  if (!sol.optimal()) throw SolveError(std::string("CED for the bid bounds is ") + qp::to_string(sol.status));
  return config.bounds == BoundMode::CedDual ? bounds_from_ced(sol, *inputs.network, config.epsilon, config.window)
                                             : bounds_from_lmp(sol, *inputs.network, config.epsilon, config.window);
}

namespace {

// CED over periods [t, T) from the realized SoCs; caps over that window.
std::vector<BoundRow> rolling_caps(const ExperimentConfig& config, const ExperimentInputs& inputs,
                                   const Eigen::MatrixXd& da_mean, int t, const Eigen::VectorXd& soc) {
  const int T = static_cast<int>(da_mean.cols());
  const int rest = T - t;
  Network net = *inputs.network;
  for (int s = 0; s < net.storage_count(); ++s) net.storages[s].e_initial = soc[s];
  auto shared = std::make_shared<const Network>(std::move(net));
  const NetloadForecast forecast{da_mean.rightCols(rest), inputs.forecast.std.middleCols(t, rest)};
  const DispatchSolution sol = solve_dispatch(build_ced(shared, forecast, config.epsilon, inputs.model, rest));
  if (!sol.optimal()) throw SolveError("rolling CED at period " + std::to_string(t + 1) + " is " + qp::to_string(sol.status));
  std::vector<BoundRow> caps;
  for (int s = 0; s < shared->storage_count(); ++s) {
    const Storage& st = shared->storages[s];
    if (config.bounds == BoundMode::LmpAnticipated) {
      caps.push_back(bounds_from_lmp(sol.lmp.row(st.bus).transpose(), st, 0, rest - 1));
    } else {
      caps.push_back(bounds_from_ced(sol, st, s, 0, rest - 1));
    }
  }
  return caps;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const ExperimentInputs& inputs, int jobs) {
  const Network& net = *inputs.network;
  const int S = net.storage_count();
  const int K = config.da_scenarios;
  const int R = config.rt_samples;
  const ScenarioSet scenarios = generate_scenarios(inputs.forecast, inputs.model, K, R, config.seed);

  struct DayAhead {
    std::vector<StorageAgent> agents;
    std::optional<BidBounds> bounds;
  };
  std::vector<DayAhead> days(K);
  parallel_for(K, jobs, [&](int k) {
    const Eigen::MatrixXd lmp = clear_day_ahead(inputs.network, scenarios.da_scenarios[k], k);
    for (int s = 0; s < S; ++s) {
      const AgentSpec* spec = agent_spec_for(config, s);
      StorageAgent agent;
      agent.storage = s;
      agent.withholding_scale = spec ? spec->withholding_scale : 0.0;
      if (spec) agent.options = {spec->grid_points, spec->quadrature_nodes};
      agent.value = solve_value_function(net.storages[s], lmp.row(net.storages[s].bus).transpose(),
                                         withholding_sigma(agent.withholding_scale), agent.options);
      agent.soc = net.storages[s].e_initial;
      days[k].agents.push_back(std::move(agent));
    }
    days[k].bounds = scenario_bounds(config, inputs, scenarios.da_scenarios[k], lmp);
  });

  ExperimentResult result;
  result.records.resize(static_cast<std::size_t>(2) * K * R);
  const bool rolling = config.rolling && (config.bounds == BoundMode::CedDual || config.bounds == BoundMode::LmpAnticipated);
  parallel_for(K * R, jobs, [&](int index) {
    const int k = index / R;
    const int r = index % R;
    const auto& rt = scenarios.rt_samples[k][r];
    TrialRecord off = run_realtime_day(inputs.network, rt, days[k].agents, nullptr, config.complementarity);
    TrialRecord on;
    if (rolling) {
      const Eigen::MatrixXd& da = scenarios.da_scenarios[k];
      RollingBounds caps = [&](int t, const Eigen::VectorXd& soc) { return rolling_caps(config, inputs, da, t, soc); };
      on = run_realtime_day(inputs.network, rt, days[k].agents, nullptr, config.complementarity, caps);
    } else {
      const BidBounds* b = days[k].bounds ? &*days[k].bounds : nullptr;
      on = run_realtime_day(inputs.network, rt, days[k].agents, b, config.complementarity);
    }
    on.with_bounds = true;
    on.bounds_mode = to_string(config.bounds);
    for (TrialRecord* rec : {&off, &on}) {
      rec->da_scenario = k;
      rec->rt_sample = r;
      if (rec->failed) spdlog::warn("trial da={} rt={} bounds={} failed: {}", k, r, rec->bounds_mode, rec->failure);
    }
    result.records[2 * static_cast<std::size_t>(index)] = std::move(off);
    result.records[2 * static_cast<std::size_t>(index) + 1] = std::move(on);
  });

  double scale = 0.0;
  for (const auto& a : days.front().agents) scale = std::max(scale, a.withholding_scale);
  result.report = build_report(result.records, scale, config.sigma_multiplier);
  return result;
}

void write_metrics_csv(std::ostream& out, const std::vector<TrialRecord>& records) {
  csv::write_row(out, {"da_scenario", "rt_sample", "bounds_mode", "status", "system_cost", "storage_profit",
                       "capped_periods", "failure"});
  for (const auto& r : records) {
    csv::write_row(out, {std::to_string(r.da_scenario), std::to_string(r.rt_sample), r.bounds_mode,
                         r.failed ? "failed" : "ok", csv::format(r.system_cost), csv::format(r.total_profit),
                         std::to_string(r.capped_periods), r.failure});
  }
}

namespace {

nlohmann::json summary_json(const Summary& s) {
  return {{"count", s.count}, {"mean", s.mean}, {"p5", s.p5}, {"p50", s.p50}, {"p95", s.p95}};
}

}  // namespace

void write_bids_csv(std::ostream& out, const std::vector<TrialRecord>& records, const Network& network) {
  csv::write_row(out, {"da_scenario", "rt_sample", "bounds_mode", "storage", "t", "discharge_bid", "charge_bid",
                       "discharge", "charge", "soc", "lmp"});
  for (const auto& r : records) {
    if (r.failed) continue;
    for (int s = 0; s < r.p.rows(); ++s) {
      const int bus = network.storages[s].bus;
      for (int t = 0; t < r.p.cols(); ++t) {
        csv::write_row(out, {std::to_string(r.da_scenario), std::to_string(r.rt_sample), r.bounds_mode,
                             std::to_string(s), std::to_string(t + 1), csv::format(r.first_discharge_bid(s, t)),
                             csv::format(r.first_charge_bid(s, t)), csv::format(r.p(s, t)), csv::format(r.b(s, t)),
                             csv::format(r.soc(s, t)), csv::format(r.lmp(bus, t))});
      }
    }
  }
}

void write_summary_csv(std::ostream& out, const MetricsReport& report) {
  csv::write_row(out, {"withholding_scale", "uncertainty_scale", "trials", "failed_without", "failed_with",
                       "cost_without", "cost_with", "cost_delta", "cost_delta_pct", "profit_without", "profit_with",
                       "profit_delta", "profit_delta_pct"});
  for (const auto& g : report.groups) {
    csv::write_row(out, {csv::format(g.withholding_scale), csv::format(g.uncertainty_scale), std::to_string(g.trials),
                         std::to_string(g.failed_without), std::to_string(g.failed_with),
                         csv::format(g.cost_without.mean), csv::format(g.cost_with.mean), csv::format(g.cost_delta),
                         csv::format(g.cost_delta_pct), csv::format(g.profit_without.mean),
                         csv::format(g.profit_with.mean), csv::format(g.profit_delta),
                         csv::format(g.profit_delta_pct)});
  }
}

nlohmann::json report_to_json(const MetricsReport& report, const ExperimentConfig& config) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : report.groups) {
    groups.push_back({{"withholding_scale", g.withholding_scale},
                      {"uncertainty_scale", g.uncertainty_scale},
                      {"trials", g.trials},
                      {"failed_without_bounds", g.failed_without},
                      {"failed_with_bounds", g.failed_with},
                      {"system_cost", {{"without_bounds", summary_json(g.cost_without)},
                                       {"with_bounds", summary_json(g.cost_with)},
                                       {"delta", g.cost_delta},
                                       {"delta_pct", g.cost_delta_pct}}},
                      {"storage_profit", {{"without_bounds", summary_json(g.profit_without)},
                                          {"with_bounds", summary_json(g.profit_with)},
                                          {"delta", g.profit_delta},
                                          {"delta_pct", g.profit_delta_pct}}}});
  }
  return {{"config", experiment_config_to_json(config)}, {"groups", groups}};
}

}  // namespace gridbound
