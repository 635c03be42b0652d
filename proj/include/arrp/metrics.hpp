#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arrp/core_state.hpp"
#include "arrp/trace.hpp"

namespace arrp {

struct MetricsReport {
  std::optional<double> vmr;  // meters per served request; absent with nothing served
  std::optional<double> vmr_service;
  std::optional<double> vmr_idle;
  std::optional<double> pct_shared;  // of served requests
  std::optional<double> pct_served;  // of all requests
  std::optional<double> avg_wait;    // seconds
  std::optional<double> avg_delay;   // seconds
  int active_vehicles = 0;
  std::vector<int> max_occupancy_hist;  // [k] = active vehicles whose peak load was k
  double total_vmt = 0.0;
  double service_vmt = 0.0;
  double idle_vmt = 0.0;
  long long requests_total = 0;
  long long requests_served = 0;
  long long requests_rejected = 0;
};

// Replays the trace. Throws std::invalid_argument when a picked-up request
// was never dropped off.
MetricsReport compute_metrics(const EventTrace& trace, std::span<const Request> requests, std::size_t fleet_size);

// Scenario parameters echoed next to the metrics.
struct ReportKey {
  std::string scenario_id;
  int fleet_size = 0;
  int capacity = 0;
  double horizon_s = 0.0;
  double wsf = 0.0;
  double arf = 0.0;
  std::string los_tier;
  std::string traffic_tier;
  unsigned long long seed = 0;
};

struct ReportRow {
  ReportKey key;
  MetricsReport report;
  std::string error;  // non-empty when the scenario failed
};

// occ_1..occ_K with K = max(10, largest histogram bin in `rows`).
int occupancy_columns(std::span<const ReportRow> rows);

std::string csv_header(int occ_columns);
std::string export_report(const ReportRow& row, int occ_columns);

void write_metrics_csv(const std::filesystem::path& path, std::span<const ReportRow> rows);

}  // namespace arrp
