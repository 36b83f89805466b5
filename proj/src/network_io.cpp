#include <algorithm>
#include <fstream>
#include <map>

#include "gridbound/csv.hpp"
#include "gridbound/io.hpp"

namespace gridbound {

using nlohmann::json;

namespace {

template <typename T>
T required(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw InputError(where + ": missing field '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InputError(where + ": bad field '" + key + "': " + e.what());
  }
}

template <typename T>
T optional(const json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  return required<T>(obj, key, where);
}

CostFunction cost_from_json(const json& c, const std::string& where) {
  const auto kind = optional<std::string>(c, "kind", "quadratic", where);
  if (kind == "quadratic") {
    return CostFunction::quadratic(optional<double>(c, "c2", 0.0, where), optional<double>(c, "c1", 0.0, where),
                                   optional<double>(c, "c0", 0.0, where));
  }
  if (kind == "piecewise_linear") {
    std::vector<CostFunction::Breakpoint> pts;
    for (const auto& bp : required<json>(c, "breakpoints", where)) {
      if (!bp.is_array() || bp.size() != 2) throw InputError(where + ": breakpoints must be [output, cost] pairs");
      pts.push_back({bp[0].get<double>(), bp[1].get<double>()});
    }
    return CostFunction::piecewise_linear(std::move(pts));
  }
  throw InputError(where + ": unknown cost kind '" + kind + "'");
}

json cost_to_json(const CostFunction& c) {
  if (c.is_quadratic()) return {{"kind", "quadratic"}, {"c2", c.c2()}, {"c1", c.c1()}, {"c0", c.c0()}};
  json pts = json::array();
  for (const auto& bp : c.breakpoints()) pts.push_back({bp.output, bp.cost});
  return {{"kind", "piecewise_linear"}, {"breakpoints", pts}};
}

}  // namespace

Network network_from_json(const json& doc) {
  if (!doc.is_object()) throw InputError("network: top level must be an object");
  Network net;
  int k = 0;
  for (const auto& b : required<json>(doc, "buses", "network")) {
    const std::string where = "buses[" + std::to_string(k++) + "]";
    Bus bus;
    bus.id = required<int>(b, "id", where);
    bus.name = optional<std::string>(b, "name", "bus" + std::to_string(bus.id), where);
    net.buses.push_back(bus);
  }
  k = 0;
  for (const auto& l : optional<json>(doc, "lines", json::array(), "network")) {
    const std::string where = "lines[" + std::to_string(k) + "]";
    Line line;
    line.from_bus = required<int>(l, "from_bus", where);
    line.to_bus = required<int>(l, "to_bus", where);
    line.susceptance = required<double>(l, "susceptance", where);
    line.capacity = required<double>(l, "capacity", where);
    line.name = optional<std::string>(l, "name", "line" + std::to_string(k), where);
    net.lines.push_back(line);
    ++k;
  }
  k = 0;
  for (const auto& g : required<json>(doc, "generators", "network")) {
    const std::string where = "generators[" + std::to_string(k) + "]";
    Generator gen;
    gen.name = optional<std::string>(g, "name", "gen" + std::to_string(k), where);
    gen.bus = required<int>(g, "bus", where);
    gen.cost = cost_from_json(required<json>(g, "cost", where), where);
    gen.g_min = optional<double>(g, "g_min", 0.0, where);
    gen.g_max = required<double>(g, "g_max", where);
    gen.ramp_up = optional<double>(g, "ramp_up", gen.g_max, where);
    gen.ramp_down = optional<double>(g, "ramp_down", gen.g_max, where);
    net.generators.push_back(gen);
    ++k;
  }
  k = 0;
  for (const auto& s : optional<json>(doc, "storages", json::array(), "network")) {
    const std::string where = "storages[" + std::to_string(k) + "]";
    Storage st;
    st.name = optional<std::string>(s, "name", "storage" + std::to_string(k), where);
    st.bus = required<int>(s, "bus", where);
    st.power = required<double>(s, "power", where);
    st.e_min = optional<double>(s, "e_min", 0.0, where);
    st.e_max = required<double>(s, "e_max", where);
    st.efficiency = optional<double>(s, "efficiency", 1.0, where);
    st.marginal_cost = optional<double>(s, "marginal_cost", 0.0, where);
    st.e_initial = optional<double>(s, "e_initial", st.e_min, where);
    net.storages.push_back(st);
    ++k;
  }
  net.slack_bus = required<int>(doc, "slack_bus", "network");
  net.reserve_ratio = optional<double>(doc, "reserve_ratio", 0.0, "network");
  net.step_hours = optional<double>(doc, "step_hours", 1.0, "network");
  return net;
}

json network_to_json(const Network& net) {
  json doc;
  doc["buses"] = json::array();
  for (const auto& b : net.buses) doc["buses"].push_back({{"id", b.id}, {"name", b.name}});
  doc["lines"] = json::array();
  for (const auto& l : net.lines) {
    doc["lines"].push_back({{"name", l.name},
                            {"from_bus", l.from_bus},
                            {"to_bus", l.to_bus},
                            {"susceptance", l.susceptance},
                            {"capacity", l.capacity}});
  }
  doc["generators"] = json::array();
  for (const auto& g : net.generators) {
    doc["generators"].push_back({{"name", g.name},
                                 {"bus", g.bus},
                                 {"cost", cost_to_json(g.cost)},
                                 {"g_min", g.g_min},
                                 {"g_max", g.g_max},
                                 {"ramp_up", g.ramp_up},
                                 {"ramp_down", g.ramp_down}});
  }
  doc["storages"] = json::array();
  for (const auto& s : net.storages) {
    doc["storages"].push_back({{"name", s.name},
                               {"bus", s.bus},
                               {"power", s.power},
                               {"e_min", s.e_min},
                               {"e_max", s.e_max},
                               {"efficiency", s.efficiency},
                               {"marginal_cost", s.marginal_cost},
                               {"e_initial", s.e_initial}});
  }
  doc["slack_bus"] = net.slack_bus;
  doc["reserve_ratio"] = net.reserve_ratio;
  doc["step_hours"] = net.step_hours;
  return doc;
}

Network load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open network file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return prepare_network(network_from_json(doc));
}

NetloadForecast load_forecast(const std::filesystem::path& path, int node_count) {
  const auto table = csv::read(path);
  const auto c_node = table.column("node");
  const auto c_t = table.column("t");
  const auto c_mu = table.column("mu");
  const auto c_sigma = table.column("sigma");
  long horizon = 0;
  for (const auto& row : table.rows) horizon = std::max(horizon, csv::to_long(row[c_t], path.string() + ": t"));
  if (horizon < 1) throw InputError(path.string() + ": no periods");
  NetloadForecast f;
  f.mean = Eigen::MatrixXd::Constant(node_count, horizon, std::nan(""));
  f.std = Eigen::MatrixXd::Constant(node_count, horizon, std::nan(""));
  for (const auto& row : table.rows) {
    const long n = csv::to_long(row[c_node], path.string() + ": node");
    const long t = csv::to_long(row[c_t], path.string() + ": t");
    if (n < 0 || n >= node_count) throw InputError(path.string() + ": node " + std::to_string(n) + " out of range");
    if (t < 1) throw InputError(path.string() + ": periods are 1-based");
    if (!std::isnan(f.mean(n, t - 1))) {
      throw InputError(path.string() + ": duplicate cell node " + std::to_string(n) + " t " + std::to_string(t));
    }
    f.mean(n, t - 1) = csv::to_double(row[c_mu], path.string() + ": mu");
    f.std(n, t - 1) = csv::to_double(row[c_sigma], path.string() + ": sigma");
  }
  if (f.mean.hasNaN()) throw InputError(path.string() + ": forecast does not cover every node and period");
  validate_forecast(f);
  return f;
}

std::vector<double> load_normalized_samples(const std::filesystem::path& path, const NetloadForecast& forecast) {
  const auto table = csv::read(path);
  const auto c_node = table.column("node");
  const auto c_t = table.column("t");
  const auto c_value = table.column("value");
  std::vector<double> out;
  for (const auto& row : table.rows) {
    const long n = csv::to_long(row[c_node], path.string() + ": node");
    const long t = csv::to_long(row[c_t], path.string() + ": t");
    if (n < 0 || n >= forecast.node_count() || t < 1 || t > forecast.horizon()) {
      throw InputError(path.string() + ": cell (" + std::to_string(n) + ", " + std::to_string(t) +
                       ") outside the forecast");
    }
    const double sigma = forecast.std(n, t - 1);
    if (sigma <= 0.0) continue;
    out.push_back((csv::to_double(row[c_value], path.string() + ": value") - forecast.mean(n, t - 1)) / sigma);
  }
  if (out.empty()) throw InputError(path.string() + ": no usable samples");
  std::sort(out.begin(), out.end());
  return out;
}

UncertaintyModel load_model(const std::string& spec, const NetloadForecast& forecast) {
  if (spec.rfind("empirical:", 0) == 0) {
    return EmpiricalModel{load_normalized_samples(spec.substr(10), forecast)};
  }
  if (spec.rfind("versatile:", 0) == 0) {
    const std::string arg = spec.substr(10);
    if (std::filesystem::exists(arg)) {
      const auto samples = load_normalized_samples(arg, forecast);
      return fit_versatile(samples).model;
    }
  }
  return parse_model(spec);
}

}  // namespace gridbound
