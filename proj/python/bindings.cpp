#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <optional>

#include "gridbound/agent.hpp"
#include "gridbound/bounds.hpp"
#include "gridbound/error.hpp"
#include "gridbound/io.hpp"
#include "gridbound/sim.hpp"

namespace py = pybind11;
using namespace gridbound;

namespace {

py::object to_python(const nlohmann::json& doc) { return py::module_::import("json").attr("loads")(doc.dump()); }

std::shared_ptr<const Network> shared(const Network& network) { return std::make_shared<const Network>(network); }

BidBounds compute_bounds(const Network& network, const NetloadForecast& forecast, double epsilon,
                         const std::string& model, const std::string& window, const std::string& route) {
  if (route != "ced" && route != "lmp") throw InputError("route must be 'ced' or 'lmp'");
  const UncertaintyModel m = load_model(model, forecast);
  const BoundWindow w = parse_window(window);
  const auto net = shared(network);
  DispatchSolution ced;
  {
    py::gil_scoped_release release;
    ced = solve_dispatch(build_ced(net, forecast, epsilon, m, forecast.horizon()));
  }
  if (!ced.optimal()) throw SolveError(std::string("CED is ") + qp::to_string(ced.status));
  return route == "lmp" ? bounds_from_lmp(ced, network, epsilon, w) : bounds_from_ced(ced, network, epsilon, w);
}

ExperimentConfig config_with_seed(const std::filesystem::path& path, std::uint64_t seed) {
  ExperimentConfig config = load_experiment_config(path);
  config.seed = seed;
  return config;
}

py::list segments(const std::vector<BidSegment>& side) {
  py::list out;
  for (const auto& seg : side) out.append(py::make_tuple(seg.price, seg.quantity));
  return out;
}

}  // namespace

PYBIND11_MODULE(_gridbound, m) {
  m.doc() = "Chance-constrained bid bounds for energy storage";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InputError>(m, "InputError", error.ptr());
  py::register_exception<RangeError>(m, "RangeError", error.ptr());
  py::register_exception<TopologyError>(m, "TopologyError", error.ptr());
  py::register_exception<SolveError>(m, "SolveError", error.ptr());

  py::class_<Storage>(m, "Storage")
      .def(py::init([](double power, double e_max, int bus, double e_min, double efficiency, double marginal_cost,
                       double e_initial, std::string name) {
             return Storage{std::move(name), bus, power, e_min, e_max, efficiency, marginal_cost, e_initial};
           }),
           py::arg("power"), py::arg("e_max"), py::arg("bus") = 0, py::arg("e_min") = 0.0, py::arg("efficiency") = 1.0,
           py::arg("marginal_cost") = 0.0, py::arg("e_initial") = 0.0, py::arg("name") = "")
      .def_readwrite("name", &Storage::name)
      .def_readwrite("bus", &Storage::bus)
      .def_readwrite("power", &Storage::power)
      .def_readwrite("e_min", &Storage::e_min)
      .def_readwrite("e_max", &Storage::e_max)
      .def_readwrite("efficiency", &Storage::efficiency)
      .def_readwrite("marginal_cost", &Storage::marginal_cost)
      .def_readwrite("e_initial", &Storage::e_initial);

  py::class_<Network>(m, "Network")
      .def_property_readonly("bus_count", &Network::bus_count)
      .def_property_readonly("line_count", &Network::line_count)
      .def_property_readonly("generator_count", &Network::generator_count)
      .def_property_readonly("storage_count", &Network::storage_count)
      .def_readonly("storages", &Network::storages)
      .def_readonly("ptdf", &Network::ptdf);
  m.def("load_network", &load_network, py::arg("path"));

  py::class_<NetloadForecast>(m, "Forecast")
      .def_readonly("mean", &NetloadForecast::mean)
      .def_readonly("std", &NetloadForecast::std)
      .def_property_readonly("horizon", &NetloadForecast::horizon);
  m.def("load_forecast", &load_forecast, py::arg("path"), py::arg("node_count"));

  py::class_<BidBounds>(m, "Bounds")
      .def_readonly("discharge_cap", &BidBounds::discharge_cap)
      .def_readonly("charge_cap", &BidBounds::charge_cap)
      .def_readonly("epsilon", &BidBounds::epsilon)
      .def_property_readonly("provenance", [](const BidBounds& b) { return to_string(b.provenance); });

  m.def("compute_bounds", &compute_bounds, py::arg("network"), py::arg("forecast"), py::arg("epsilon") = 0.05,
        py::arg("model") = "gaussian", py::arg("window") = "remaining", py::arg("route") = "ced",
        "Bounds [storage][t] from one CED solve; route 'ced' reads the storage duals, 'lmp' the bus prices.");
  m.def(
      "deterministic_bounds",
      [](const Network& network, const NetloadForecast& forecast) {
        return deterministic_bounds(clear_day_ahead(shared(network), forecast.mean), network, forecast.horizon());
      },
      py::arg("network"), py::arg("forecast"));
  m.def("inverse_cdf", [](const std::string& model, double epsilon) { return inverse_cdf(parse_model(model), epsilon); },
        py::arg("model"), py::arg("epsilon"));

  m.def("withholding_sigma", &withholding_sigma, py::arg("scale"));
  m.def(
      "gauss_hermite",
      [](int count) {
        const Quadrature q = gauss_hermite(count);
        return py::make_tuple(q.nodes, q.weights);
      },
      py::arg("count"));

  py::class_<ValueFunction>(m, "ValueFunction")
      .def_readonly("soc_grid", &ValueFunction::soc_grid)
      .def_readonly("values", &ValueFunction::values)
      .def_readonly("slopes", &ValueFunction::slopes)
      .def_property_readonly("horizon", &ValueFunction::horizon)
      .def("value", &ValueFunction::value, py::arg("t"), py::arg("soc"))
      .def("slope", &ValueFunction::slope, py::arg("t"), py::arg("soc"))
      .def(
          "offer",
          [](const ValueFunction& vf, const Storage& storage, double soc, int t) {
            const StorageOffer o = bids_from_value(vf, storage, soc, t);
            return py::make_tuple(segments(o.discharge), segments(o.charge));
          },
          py::arg("storage"), py::arg("soc"), py::arg("t"),
          "(discharge, charge) lists of (price, quantity) segments for period t.");
  m.def(
      "solve_value_function",
      [](const Storage& storage, const Eigen::VectorXd& prices, double price_sigma, int grid_points,
         int quadrature_nodes) {
        py::gil_scoped_release release;
        return solve_value_function(storage, prices, price_sigma, {grid_points, quadrature_nodes});
      },
      py::arg("storage"), py::arg("prices"), py::arg("price_sigma") = 0.0, py::arg("grid_points") = 101,
      py::arg("quadrature_nodes") = 7);

  m.def(
      "simulate",
      [](const std::filesystem::path& config_path, std::uint64_t seed, int jobs) {
        const ExperimentConfig config = config_with_seed(config_path, seed);
        nlohmann::json report;
        {
          py::gil_scoped_release release;
          const ExperimentResult result = run_experiment(config, load_inputs(config), jobs);
          report = report_to_json(result.report, config);
        }
        return to_python(report);
      },
      py::arg("config"), py::arg("seed") = 0, py::arg("jobs") = 0, "Runs the experiment and returns report.json as a dict.");

  m.def(
      "verify_coverage",
      [](const std::filesystem::path& config_path, std::uint64_t seed, std::optional<int> samples, int jobs) {
        const ExperimentConfig config = config_with_seed(config_path, seed);
        const int n = samples.value_or(config.coverage_samples);
        CoverageResult c;
        {
          py::gil_scoped_release release;
          c = verify_coverage(config, load_inputs(config), n, jobs);
        }
        py::dict out;
        out["coverage"] = c.fraction();
        out["threshold"] = coverage_threshold(config.epsilon, n);
        out["interior_periods"] = c.total_all;
        out["covered"] = c.covered_all;
        out["samples"] = c.samples;
        out["failed_samples"] = c.failed_samples;
        return out;
      },
      py::arg("config"), py::arg("seed") = 0, py::arg("samples") = py::none(), py::arg("jobs") = 0);

  m.def(
      "verify_monotonicity",
      [](const std::filesystem::path& config_path, const std::string& axis, const std::vector<double>& grid) {
        const ExperimentConfig config = load_experiment_config(config_path);
        SweepResult r;
        {
          py::gil_scoped_release release;
          r = verify_monotonicity(config, load_inputs(config), parse_sweep_axis(axis), grid);
        }
        py::list rows;
        for (const auto& row : r.rows) {
          rows.append(py::make_tuple(row.value, row.storage, row.t + 1, row.discharge_cap, row.charge_cap));
        }
        py::dict out;
        out["holds"] = r.holds;
        out["counterexample"] = r.counterexample;
        out["rows"] = rows;
        return out;
      },
      py::arg("config"), py::arg("axis"), py::arg("grid"),
      "rows are (value, storage, t, A_bar, B_bar) with t 1-based.");
}
