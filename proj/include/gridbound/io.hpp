#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridbound/grid.hpp"
#include "gridbound/uncertainty.hpp"

namespace gridbound {

/// Network file reader/writer. Periods in every CSV file are 1-based.
Network network_from_json(const nlohmann::json& doc);
nlohmann::json network_to_json(const Network& network);

/// Reads, validates and prepares (PTDF) a network file.
Network load_network(const std::filesystem::path& path);

/// `node,t,mu,sigma`; every (node, t) cell must appear exactly once.
NetloadForecast load_forecast(const std::filesystem::path& path, int node_count);

/// `node,t,value` historical netload, normalized cell-wise by the forecast as
/// (value - mu) / sigma. Cells with sigma = 0 are skipped. Returned sorted.
std::vector<double> load_normalized_samples(const std::filesystem::path& path, const NetloadForecast& forecast);

/// Extends parse_model with file-backed specs: "empirical:FILE" and
/// "versatile:FILE" (MLE fit of the normalized samples).
UncertaintyModel load_model(const std::string& spec, const NetloadForecast& forecast);

}  // namespace gridbound
