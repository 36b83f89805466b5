#include "gridbound/dispatch.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gridbound/error.hpp"

namespace gridbound {

const char* to_string(DispatchKind kind) {
  switch (kind) {
    case DispatchKind::OED: return "OED";
    case DispatchKind::SED: return "SED";
    case DispatchKind::CED: return "CED";
  }
  return "?";
}

const char* to_string(ComplementarityMode mode) {
  return mode == ComplementarityMode::Exact ? "exact" : "relaxed";
}

StorageOffer StorageOffer::scalar(double discharge_price, double charge_price) {
  StorageOffer o;
  o.discharge.push_back({qp::kInf, discharge_price});
  o.charge.push_back({qp::kInf, charge_price});
  return o;
}

namespace {

using Entries = std::vector<qp::Problem::Entry>;

std::string name(const char* prefix, int a, int t) {
  return std::string(prefix) + "_" + std::to_string(a) + "_" + std::to_string(t);
}

void check_network(const std::shared_ptr<const Network>& network) {
  if (!network) throw InputError("dispatch: null network");
  if (network->ptdf.rows() != network->line_count() || network->ptdf.cols() != network->bus_count()) {
    throw InputError("dispatch: network has no PTDF; call prepare_network first");
  }
}

// Adds generator output, reserve and cost variables for one period.
void add_generators(DispatchProblem& P, int t, bool with_reserve) {
  const Network& net = *P.network;
  auto& lp = P.lp;
  for (int i = 0; i < net.generator_count(); ++i) {
    const Generator& gen = net.generators[i];
    const int tt = t + 1;
    int g = -1;
    if (gen.cost.is_quadratic()) {
      g = lp.add_variable(name("g", i, tt), gen.g_min, qp::kInf, gen.cost.c1(), 2.0 * gen.cost.c2());
      lp.add_constant(gen.cost.c0());
      P.cost[i][t] = -1;
    } else {
      g = lp.add_variable(name("g", i, tt), gen.g_min, qp::kInf);
      const int c = lp.add_variable(name("cost", i, tt), gen.cost(gen.g_min), qp::kInf, 1.0);
      const auto& bp = gen.cost.breakpoints();
      const auto slopes = gen.cost.slopes();
      for (std::size_t k = 0; k < slopes.size(); ++k) {
        lp.add_row("epi_" + std::to_string(i) + "_" + std::to_string(k) + "_" + std::to_string(tt),
                   bp[k].cost - slopes[k] * bp[k].output, qp::kInf, {{c, 1.0}, {g, -slopes[k]}});
      }
      P.cost[i][t] = c;
    }
    P.g[i][t] = g;
    int r = -1;
    if (with_reserve) r = lp.add_variable(name("r", i, tt), 0.0, qp::kInf);
    P.r[i][t] = r;
    Entries cap{{g, 1.0}};
    if (r >= 0) cap.push_back({r, 1.0});
    P.capacity_row[i][t] = lp.add_row(name("cap", i, tt), -qp::kInf, gen.g_max, cap);
  }
}

// Nodal injection definitions, balance, flow limits and reserve for period t.
// `center` is the netload used for flows; `demand` the balance right-hand
// side; `tightening[l]` shrinks both flow limits.
void add_network_rows(DispatchProblem& P, int t, const Eigen::VectorXd& center, double demand, bool balance_is_equality,
                      const Eigen::VectorXd& tightening) {
  const Network& net = *P.network;
  auto& lp = P.lp;
  const int tt = t + 1;

  // Injection contributions per bus.
  std::vector<Entries> at_bus(net.bus_count());
  for (int i = 0; i < net.generator_count(); ++i) at_bus[net.generators[i].bus].push_back({P.g[i][t], 1.0});
  for (int s = 0; s < net.storage_count(); ++s) {
    const int bus = net.storages[s].bus;
    at_bus[bus].push_back({P.p[s][t], 1.0});
    at_bus[bus].push_back({P.b[s][t], -1.0});
  }

  const double lower = demand;
  const double upper = balance_is_equality ? demand : qp::kInf;
  if (net.line_count() == 0) {
    Entries all;
    for (const auto& entries : at_bus) all.insert(all.end(), entries.begin(), entries.end());
    P.balance_row[t] = lp.add_row("balance_" + std::to_string(tt), lower, upper, all);
    return;
  }

  Entries balance;
  for (int n = 0; n < net.bus_count(); ++n) {
    // Left free so the nodal price is carried entirely by the balance and
    // flow rows.
    const int inj = lp.add_variable(name("inj", n, tt), -qp::kInf, qp::kInf);
    P.injection[n][t] = inj;
    Entries def{{inj, 1.0}};
    for (const auto& e : at_bus[n]) def.push_back({e.column, -e.value});
    lp.add_row(name("injdef", n, tt), 0.0, 0.0, def);
    balance.push_back({inj, 1.0});
  }
  P.balance_row[t] = lp.add_row("balance_" + std::to_string(tt), lower, upper, balance);

  for (int l = 0; l < net.line_count(); ++l) {
    Entries flow;
    double offset = 0.0;
    for (int n = 0; n < net.bus_count(); ++n) {
      const double pi = net.ptdf(l, n);
      if (pi == 0.0) continue;
      flow.push_back({P.injection[n][t], pi});
      offset += pi * center[n];
    }
    const double cap = net.lines[l].capacity;
    P.flow_row[l][t] = lp.add_row(name("flow", l, tt), -cap + offset + tightening[l], cap + offset - tightening[l], flow);
  }
}

void add_storage_period(DispatchProblem& P, int t) {
  const Network& net = *P.network;
  for (int s = 0; s < net.storage_count(); ++s) {
    const Storage& st = net.storages[s];
    P.p[s][t] = P.lp.add_variable(name("p", s, t + 1), 0.0, st.power, st.marginal_cost);
    P.b[s][t] = P.lp.add_variable(name("b", s, t + 1), 0.0, st.power, st.marginal_cost);
  }
}

void size_indices(DispatchProblem& P, int T) {
  const Network& net = *P.network;
  auto grid = [T](int rows) { return std::vector<std::vector<int>>(rows, std::vector<int>(T, -1)); };
  P.g = grid(net.generator_count());
  P.r = grid(net.generator_count());
  P.cost = grid(net.generator_count());
  P.capacity_row = grid(net.generator_count());
  P.ramp_row = grid(net.generator_count());
  P.p = grid(net.storage_count());
  P.b = grid(net.storage_count());
  P.e = grid(net.storage_count());
  P.soc_row = grid(net.storage_count());
  P.injection = grid(net.bus_count());
  P.flow_row = grid(net.line_count());
  P.balance_row.assign(T, -1);
  P.reserve_row.assign(T, -1);
}

void add_reserve(DispatchProblem& P, int t, double demand) {
  const Network& net = *P.network;
  if (net.reserve_ratio <= 0.0) return;
  Entries rows;
  for (int i = 0; i < net.generator_count(); ++i) rows.push_back({P.r[i][t], 1.0});
  P.reserve_row[t] = P.lp.add_row("reserve_" + std::to_string(t + 1), net.reserve_ratio * demand, qp::kInf, rows);
}

// OED and CED share everything except the netload terms.
DispatchProblem build_multi_period(DispatchKind kind, std::shared_ptr<const Network> network,
                                   const Eigen::MatrixXd& center, const Eigen::MatrixXd& sigma, double z, int T) {
  check_network(network);
  const Network& net = *network;
  if (T < 1) throw InputError("dispatch: horizon must be >= 1");
  if (center.rows() != net.bus_count() || center.cols() < T) {
    throw InputError("dispatch: netload must be " + std::to_string(net.bus_count()) + " x " + std::to_string(T));
  }
  DispatchProblem P;
  P.kind = kind;
  P.network = network;
  P.horizon = T;
  P.netload = center.leftCols(T);
  size_indices(P, T);
  const bool with_reserve = net.reserve_ratio > 0.0;

  for (int t = 0; t < T; ++t) {
    add_generators(P, t, with_reserve);
    add_storage_period(P, t);
    Eigen::VectorXd upper_netload = P.netload.col(t);
    Eigen::VectorXd tightening = Eigen::VectorXd::Zero(net.line_count());
    if (kind == DispatchKind::CED) {
      upper_netload += z * sigma.col(t);
      tightening = z * (net.ptdf.cwiseAbs() * sigma.col(t));
    }
    const double demand = upper_netload.sum();
    add_network_rows(P, t, P.netload.col(t), demand, kind == DispatchKind::OED, tightening);
    add_reserve(P, t, demand);

    for (int s = 0; s < net.storage_count(); ++s) {
      const Storage& st = net.storages[s];
      const int e = P.lp.add_variable(name("e", s, t + 1), st.e_min, st.e_max);
      P.e[s][t] = e;
      Entries soc{{e, 1.0}, {P.p[s][t], 1.0 / st.efficiency}, {P.b[s][t], -st.efficiency}};
      double rhs = 0.0;
      if (t == 0) rhs = st.e_initial;
      else soc.push_back({P.e[s][t - 1], -1.0});
      P.soc_row[s][t] = P.lp.add_row(name("soc", s, t + 1), rhs, rhs, soc);
    }
    if (t > 0) {
      for (int i = 0; i < net.generator_count(); ++i) {
        const Generator& gen = net.generators[i];
        const double span = gen.g_max - gen.g_min;
        if (gen.ramp_up >= span && gen.ramp_down >= span) continue;
        P.ramp_row[i][t] = P.lp.add_row(name("ramp", i, t + 1), -gen.ramp_down, gen.ramp_up,
                                        {{P.g[i][t], 1.0}, {P.g[i][t - 1], -1.0}});
      }
    }
  }
  return P;
}

}  // namespace

DispatchProblem build_oed(std::shared_ptr<const Network> network, const Eigen::MatrixXd& netload, int horizon) {
  return build_multi_period(DispatchKind::OED, std::move(network), netload, Eigen::MatrixXd(), 0.0, horizon);
}

DispatchProblem build_ced(std::shared_ptr<const Network> network, const NetloadForecast& forecast, double epsilon,
                          const UncertaintyModel& model, int horizon) {
  validate_forecast(forecast);
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw RangeError("CED: epsilon must lie in (0, 1)");
  if (forecast.horizon() < horizon) throw InputError("CED: forecast shorter than the horizon");
  const double z = inverse_cdf(model, epsilon);
  auto P = build_multi_period(DispatchKind::CED, std::move(network), forecast.mean, forecast.std.leftCols(horizon), z,
                              horizon);
  P.sigma = forecast.std.leftCols(horizon);
  P.epsilon = epsilon;
  P.quantile = z;
  return P;
}

DispatchProblem build_sed(std::shared_ptr<const Network> network, int t, const Eigen::VectorXd& prior_soc,
                          const std::vector<StorageOffer>& offers, const Eigen::VectorXd& netload,
                          const std::optional<Eigen::VectorXd>& previous_output) {
  check_network(network);
  const Network& net = *network;
  if (prior_soc.size() != net.storage_count()) throw InputError("SED: prior SoC size mismatch");
  if (static_cast<int>(offers.size()) != net.storage_count()) throw InputError("SED: one offer per storage required");
  if (netload.size() != net.bus_count()) throw InputError("SED: netload size mismatch");
  if (previous_output && previous_output->size() != net.generator_count()) {
    throw InputError("SED: previous output size mismatch");
  }
  DispatchProblem P;
  P.kind = DispatchKind::SED;
  P.network = network;
  P.horizon = 1;
  P.netload = netload;
  P.prior_soc = prior_soc;
  P.offers = offers;
  size_indices(P, 1);
  P.p_seg.resize(net.storage_count());
  P.b_seg.resize(net.storage_count());

  add_generators(P, 0, net.reserve_ratio > 0.0);
  auto& lp = P.lp;
  for (int s = 0; s < net.storage_count(); ++s) {
    const Storage& st = net.storages[s];
    const double e = prior_soc[s];
    const double tol = 1e-9 * (1.0 + std::abs(st.e_max));
    if (e < st.e_min - tol || e > st.e_max + tol) {
      throw RangeError("SED: prior SoC of storage " + std::to_string(s) + " outside [e_min, e_max]");
    }
    const double charge_cap = std::max(0.0, std::min(st.power, (st.e_max - e) / st.efficiency));
    const double discharge_cap = std::max(0.0, std::min(st.power, (e - st.e_min) * st.efficiency));
    P.p[s][0] = lp.add_variable(name("p", s, t), 0.0, discharge_cap);
    P.b[s][0] = lp.add_variable(name("b", s, t), 0.0, charge_cap);
    Entries pdef{{P.p[s][0], 1.0}}, bdef{{P.b[s][0], 1.0}};
    const auto& offer = offers[s];
    for (std::size_t k = 0; k < offer.discharge.size(); ++k) {
      const auto& seg = offer.discharge[k];
      if (!std::isfinite(seg.price)) throw InputError("SED: non-finite discharge bid");
      const double q = std::min(seg.quantity, discharge_cap);
      const int v = lp.add_variable("pseg_" + std::to_string(s) + "_" + std::to_string(k), 0.0, std::max(q, 0.0),
                                    seg.price);
      P.p_seg[s].push_back(v);
      pdef.push_back({v, -1.0});
    }
    for (std::size_t k = 0; k < offer.charge.size(); ++k) {
      const auto& seg = offer.charge[k];
      if (!std::isfinite(seg.price)) throw InputError("SED: non-finite charge bid");
      const double q = std::min(seg.quantity, charge_cap);
      const int v = lp.add_variable("bseg_" + std::to_string(s) + "_" + std::to_string(k), 0.0, std::max(q, 0.0),
                                    -seg.price);
      P.b_seg[s].push_back(v);
      bdef.push_back({v, -1.0});
    }
    lp.add_row("pdef_" + std::to_string(s), 0.0, 0.0, pdef);
    lp.add_row("bdef_" + std::to_string(s), 0.0, 0.0, bdef);
  }
  const double demand = netload.sum();
  add_network_rows(P, 0, netload, demand, true, Eigen::VectorXd::Zero(net.line_count()));
  add_reserve(P, 0, demand);
  if (previous_output) {
    for (int i = 0; i < net.generator_count(); ++i) {
      const Generator& gen = net.generators[i];
      const double prev = (*previous_output)[i];
      P.ramp_row[i][0] =
          lp.add_row(name("ramp", i, t), prev - gen.ramp_down, prev + gen.ramp_up, {{P.g[i][0], 1.0}});
    }
  }
  return P;
}

Eigen::MatrixXd compute_lmp(const DualBundle& duals, const Network& network) {
  const int T = static_cast<int>(duals.lambda.size());
  Eigen::MatrixXd lmp(network.bus_count(), T);
  for (int t = 0; t < T; ++t) {
    lmp.col(t).setConstant(duals.lambda[t]);
    if (network.line_count() > 0) {
      lmp.col(t) -= network.ptdf.transpose() * (duals.omega_hi.col(t) - duals.omega_lo.col(t));
    }
  }
  return lmp;
}

namespace {

double value_or_zero(const std::vector<double>& v, int index) { return index >= 0 ? v[index] : 0.0; }

bool detect_degeneracy(const DispatchProblem& P, const DispatchSolution& S) {
  const Network& net = *P.network;
  constexpr double tie = 1e-7;
  for (int i = 0; i < net.generator_count(); ++i) {
    const Generator& gen = net.generators[i];
    for (int t = 0; t < P.horizon; ++t) {
      const double g = S.g(i, t);
      if (!gen.cost.is_quadratic()) {
        for (const auto& bp : gen.cost.breakpoints()) {
          if (bp.output > gen.g_min + tie && bp.output < gen.g_max - tie && std::abs(g - bp.output) < tie) return true;
        }
      }
      // A unit at a limit whose marginal cost equals the local price could
      // move without changing the objective.
      const bool at_limit = std::abs(g - gen.g_min) < tie || std::abs(g + S.r(i, t) - gen.g_max) < tie;
      if (at_limit && std::abs(gen.cost.marginal(g) - S.lmp(gen.bus, t)) < tie &&
          std::abs(gen.g_max - gen.g_min) > tie) {
        return true;
      }
    }
  }
  return false;
}

}  // namespace

DispatchSolution solve(const DispatchProblem& P, const qp::Options& options) {
  const Network& net = *P.network;
  const int T = P.horizon;
  const int G = net.generator_count();
  const int S = net.storage_count();
  const int L = net.line_count();

  DispatchSolution out;
  out.kind = P.kind;
  out.raw = qp::solve(P.lp, options);
  const auto& raw = out.raw;
  out.status = raw.status;
  out.iterations = raw.iterations;
  out.objective = raw.objective;

  auto primal = [&](const std::vector<std::vector<int>>& idx, int rows) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows, T);
    for (int a = 0; a < rows; ++a) {
      for (int t = 0; t < T; ++t) m(a, t) = value_or_zero(raw.x, idx[a][t]);
    }
    return m;
  };
  out.g = primal(P.g, G);
  out.r = primal(P.r, G);
  out.p = primal(P.p, S);
  out.b = primal(P.b, S);
  if (P.kind == DispatchKind::SED) {
    out.e.resize(S, 1);
    for (int s = 0; s < S; ++s) {
      const Storage& st = net.storages[s];
      out.e(s, 0) = P.prior_soc[s] - out.p(s, 0) / st.efficiency + out.b(s, 0) * st.efficiency;
    }
  } else {
    out.e = primal(P.e, S);
  }

  auto& d = out.duals;
  d.lambda = Eigen::VectorXd::Zero(T);
  d.reserve = Eigen::VectorXd::Zero(T);
  auto zeros = [T](int rows) { return Eigen::MatrixXd::Zero(rows, T).eval(); };
  d.omega_lo = zeros(L);
  d.omega_hi = zeros(L);
  d.theta = zeros(S);
  d.alpha_lo = zeros(S);
  d.alpha_hi = zeros(S);
  d.beta_lo = zeros(S);
  d.beta_hi = zeros(S);
  d.iota_lo = zeros(S);
  d.iota_hi = zeros(S);
  d.nu_lo = zeros(G);
  d.nu_hi = zeros(G);
  d.kappa_lo = zeros(G);
  d.kappa_hi = zeros(G);
  for (int t = 0; t < T; ++t) {
    d.lambda[t] = -raw.row_dual[P.balance_row[t]];
    if (P.reserve_row[t] >= 0) d.reserve[t] = raw.row_dual_lower[P.reserve_row[t]];
    for (int l = 0; l < L; ++l) {
      d.omega_lo(l, t) = raw.row_dual_lower[P.flow_row[l][t]];
      d.omega_hi(l, t) = raw.row_dual_upper[P.flow_row[l][t]];
    }
    for (int s = 0; s < S; ++s) {
      if (P.soc_row[s][t] >= 0) d.theta(s, t) = raw.row_dual[P.soc_row[s][t]];
      d.alpha_lo(s, t) = raw.bound_dual_lower[P.b[s][t]];
      d.alpha_hi(s, t) = raw.bound_dual_upper[P.b[s][t]];
      d.beta_lo(s, t) = raw.bound_dual_lower[P.p[s][t]];
      d.beta_hi(s, t) = raw.bound_dual_upper[P.p[s][t]];
      if (P.e[s][t] >= 0) {
        d.iota_lo(s, t) = raw.bound_dual_lower[P.e[s][t]];
        d.iota_hi(s, t) = raw.bound_dual_upper[P.e[s][t]];
      }
    }
    for (int i = 0; i < G; ++i) {
      d.nu_lo(i, t) = raw.bound_dual_lower[P.g[i][t]];
      d.nu_hi(i, t) = raw.row_dual_upper[P.capacity_row[i][t]];
      if (P.ramp_row[i][t] >= 0) {
        d.kappa_lo(i, t) = raw.row_dual_lower[P.ramp_row[i][t]];
        d.kappa_hi(i, t) = raw.row_dual_upper[P.ramp_row[i][t]];
      }
    }
  }
  out.lmp = compute_lmp(d, net);
  if (out.optimal()) out.degenerate = detect_degeneracy(P, out);
  return out;
}

DispatchSolution resolve_complementarity(const DispatchProblem& problem, const DispatchSolution& raw,
                                         const qp::Options& options) {
  constexpr double kProductTol = 1e-8;
  const int S = problem.network->storage_count();
  const int T = problem.horizon;
  auto violated = [&](const DispatchSolution& sol) {
    for (int s = 0; s < S; ++s) {
      for (int t = 0; t < T; ++t) {
        if (sol.p(s, t) * sol.b(s, t) > kProductTol) return true;
      }
    }
    return false;
  };
  if (!raw.optimal() || !violated(raw)) return raw;

  if (problem.mode == ComplementarityMode::Relaxed) {
    DispatchProblem fixed = problem;
    DispatchSolution sol = raw;
    for (int pass = 0; pass < 4 && sol.optimal() && violated(sol); ++pass) {
      for (int s = 0; s < S; ++s) {
        for (int t = 0; t < T; ++t) {
          if (sol.p(s, t) * sol.b(s, t) <= kProductTol) continue;
          const int col = sol.p(s, t) >= sol.b(s, t) ? problem.b[s][t] : problem.p[s][t];
          fixed.lp.set_bounds(col, 0.0, 0.0);
        }
      }
      sol = solve(fixed, options);
    }
    return sol;
  }

  const int count = S * T;
  if (count > kExactEnumerationLimit) {
    throw RangeError("exact complementarity supports at most " + std::to_string(kExactEnumerationLimit) +
                     " storage-periods (got " + std::to_string(count) + "); use relaxed mode");
  }
  std::optional<DispatchSolution> best;
  for (unsigned mask = 0; mask < (1u << count); ++mask) {
    DispatchProblem fixed = problem;
    for (int k = 0; k < count; ++k) {
      const int s = k / T;
      const int t = k % T;
      // bit set: discharge allowed, charge fixed at zero.
      const int col = (mask >> k) & 1u ? problem.b[s][t] : problem.p[s][t];
      fixed.lp.set_bounds(col, 0.0, 0.0);
    }
    auto sol = solve(fixed, options);
    if (!sol.optimal()) continue;
    if (!best || sol.objective < best->objective - 1e-9 * (1.0 + std::abs(best->objective))) best = std::move(sol);
  }
  if (!best) {
    DispatchSolution fail = raw;
    fail.status = qp::Status::Infeasible;
    return fail;
  }
  return *best;
}

DispatchSolution solve_dispatch(const DispatchProblem& problem, const qp::Options& options) {
  auto sol = solve(problem, options);
  return resolve_complementarity(problem, sol, options);
}

HindsightCosts hindsight_marginal_cost(const DispatchSolution& solution, const Storage& storage, int s) {
  HindsightCosts h;
  const auto theta = solution.duals.theta.row(s).transpose();
  h.discharge = (storage.marginal_cost + theta.array() / storage.efficiency).matrix();
  h.charge = (theta.array() * storage.efficiency - storage.marginal_cost).matrix();
  return h;
}

KktReport storage_kkt_residuals(const DispatchProblem& P, const DispatchSolution& sol) {
  KktReport rep;
  if (P.kind == DispatchKind::SED) return rep;
  const Network& net = *P.network;
  const auto& d = sol.duals;
  for (int s = 0; s < net.storage_count(); ++s) {
    const Storage& st = net.storages[s];
    for (int t = 0; t < P.horizon; ++t) {
      const double next = t + 1 < P.horizon ? d.theta(s, t + 1) : 0.0;
      rep.soc_stationarity =
          std::max(rep.soc_stationarity, std::abs(d.theta(s, t) - next - d.iota_lo(s, t) + d.iota_hi(s, t)));
      const double lmp = sol.lmp(st.bus, t);
      rep.discharge_stationarity =
          std::max(rep.discharge_stationarity, std::abs(st.marginal_cost + d.theta(s, t) / st.efficiency - lmp -
                                                        d.beta_lo(s, t) + d.beta_hi(s, t)));
      rep.charge_stationarity =
          std::max(rep.charge_stationarity, std::abs(st.marginal_cost + lmp - d.theta(s, t) * st.efficiency -
                                                     d.alpha_lo(s, t) + d.alpha_hi(s, t)));
    }
  }
  return rep;
}

void write_problem(std::ostream& out, const DispatchProblem& problem) {
  qp::write_lp(out, problem.lp, std::string(to_string(problem.kind)) + " horizon " + std::to_string(problem.horizon));
}

}  // namespace gridbound
