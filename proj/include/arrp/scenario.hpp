#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "arrp/core_state.hpp"
#include "arrp/metrics.hpp"
#include "arrp/network.hpp"
#include "arrp/rebalancing.hpp"
#include "arrp/simulation.hpp"
#include "arrp/trace.hpp"

namespace arrp {

enum class LosTier : std::uint8_t { strict, neutral, flexible };

struct LosBounds {
  double max_wait_s = 0.0;
  double max_delay_s = 0.0;
};

LosBounds los_bounds(LosTier tier);
LosTier parse_los_tier(std::string_view name);
std::string_view to_string(LosTier tier);

struct ScenarioConfig {
  std::string scenario_id = "base";
  int fleet_size = 1500;
  int capacity = 4;
  double horizon_s = 0.0;
  double wsf = 1.0;
  double arf = 0.0;
  LosTier los_tier = LosTier::neutral;
  TrafficTier traffic_tier = TrafficTier::normal;
  double delta_t_s = 30.0;
  double epsilon_m = 1000.0;
  double psi_s = 300.0;
  double phi_m = 5000.0;
  double lookahead_s = 900.0;
  double w_m_s = 600.0;
  std::uint64_t seed = 1;
  RebalanceStrategy rebalance_strategy = RebalanceStrategy::demand_and_supply;
  bool rebalance = true;
  double duration_s = 3600.0;
  double max_drain_s = 6 * 3600.0;

  // Synthetic world, used when no graph files are given.
  int grid_cols = 20;
  int grid_rows = 20;
  double zone_size_m = 1000.0;
  double node_spacing_m = 500.0;
  double speed_mps = 10.0;
  double requests_per_hour = 5000.0;
  double origin_sigma_m = 1500.0;  // 0 = flat
  double dest_sigma_m = 1500.0;    // 0 = flat
  double rate_interval_s = 900.0;

  std::string nodes_csv;
  std::string links_csv;
  bool links_undirected = true;
  std::string requests_csv;
  std::string rates_csv;

  int threads = 1;

  // Sweep axes; empty means the full default set.
  std::vector<int> sweep_capacity;
  std::vector<double> sweep_horizon_min;
  std::vector<double> sweep_wsf;
  std::vector<double> sweep_arf;
  std::vector<LosTier> sweep_los;
  std::vector<TrafficTier> sweep_traffic;
};

// Throws InputError naming the offending key.
ScenarioConfig parse_config(std::string_view json_text);
ScenarioConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ScenarioConfig& config);
void validate(const ScenarioConfig& config);

ReportKey report_key(const ScenarioConfig& config);

// Road graph, zones and demand surface shared by every run over one world.
// Travel matrices are computed once per traffic tier.
class ScenarioWorld {
 public:
  static ScenarioWorld build(const ScenarioConfig& config);

  const RoadGraph& graph() const { return graph_; }
  const ZonePartition& zones() const { return *zones_; }
  const DemandRates& rates() const { return rates_; }
  std::span<const double> attraction() const { return attraction_; }

  // Must be called before matrix(tier) for that tier; `threads` <= 0 uses
  // the OpenMP default.
  void prepare(TrafficTier tier, int threads);
  const TravelMatrix& matrix(TrafficTier tier) const;

 private:
  RoadGraph graph_;
  std::unique_ptr<ZonePartition> zones_;
  DemandRates rates_;
  std::vector<double> attraction_;
  std::unique_ptr<TravelMatrix> free_flow_;
  std::map<TrafficTier, std::unique_ptr<TravelMatrix>> tiers_;
};

// Centre-weighted Gaussian surface over zone centres; sigma 0 gives equal weights.
std::vector<double> gaussian_zone_weights(const ZonePartition& zones, double sigma_m);

// Per-interval zone rates totalling requests_per_hour.
DemandRates synthetic_rates(const ZonePartition& zones, const ScenarioConfig& config);

// Everything random about a synthetic request, independent of the swept
// parameters: the share/advance uniforms are compared to wsf/arf later.
struct DemandDraw {
  NodeId origin = kNoNode;
  NodeId destination = kNoNode;
  double earliest = 0.0;
  double u_share = 0.0;
  double u_advance = 0.0;
};

std::vector<DemandDraw> draw_demand(const DemandRates& rates, const ZonePartition& zones,
                                    std::span<const double> attraction, const TravelMatrix& matrix,
                                    double duration_s, std::mt19937_64& rng, std::vector<std::string>* warnings);

std::vector<Request> materialize_demand(std::span<const DemandDraw> draws, const ScenarioConfig& config,
                                        const TravelMatrix& matrix);

std::vector<Request> synthesize_demand(const DemandRates& rates, const ZonePartition& zones,
                                       std::span<const double> attraction, const TravelMatrix& matrix,
                                       const ScenarioConfig& config, std::uint64_t seed,
                                       std::vector<std::string>* warnings = nullptr);

// Requests CSV: id,placed_at_s,earliest_pickup_s,origin_node,dest_node,party_size,willing_to_share,advance
// or the same with origin_x_m,origin_y_m,dest_x_m,dest_y_m in place of the two node columns.
// Window, delay and direct time come from the config and matrix. Unreachable
// pairs are dropped with a warning.
std::vector<Request> load_requests(const std::filesystem::path& path, const RoadGraph& graph,
                                   const ScenarioConfig& config, const TravelMatrix& matrix,
                                   std::vector<std::string>* warnings = nullptr);

// Re-derives windows, delay bound and direct time of loaded requests for a config.
void apply_service_levels(std::vector<Request>& requests, const ScenarioConfig& config, const TravelMatrix& matrix);

// Zone by zonal request share, then a uniform node within it.
std::vector<NodeId> draw_fleet_nodes(int fleet_size, const DemandRates& rates, const ZonePartition& zones,
                                     std::mt19937_64& rng);
std::vector<Vehicle> make_fleet(std::span<const NodeId> nodes, const ScenarioConfig& config);
std::vector<Vehicle> init_fleet(const ScenarioConfig& config, const DemandRates& rates, const ZonePartition& zones,
                                std::mt19937_64& rng);

// Random inputs for one seed, shared by every sweep cell over the same world.
struct ScenarioInputs {
  std::vector<DemandDraw> draws;
  std::vector<Request> loaded;
  bool from_file = false;
  std::vector<NodeId> fleet_nodes;
  std::vector<std::string> warnings;
};

// `matrix` is used to screen unreachable synthetic pairs and loaded rows.
ScenarioInputs prepare_inputs(const ScenarioConfig& config, const ScenarioWorld& world, const TravelMatrix& matrix);

SimulationOptions simulation_options(const ScenarioConfig& config);

struct RunResult {
  std::vector<Request> requests;
  EventTrace trace;
  MetricsReport report;
  SystemState final_state;
};

RunResult run_scenario(const ScenarioConfig& config, const ScenarioWorld& world, const ScenarioInputs& inputs);

inline constexpr std::array<int, 4> kTableCapacity{2, 4, 7, 10};
inline constexpr std::array<double, 5> kTableHorizonMin{0, 5, 15, 30, 60};
inline constexpr std::array<double, 4> kTableFraction{0.0, 0.33, 0.67, 1.0};

struct SweepCell {
  std::size_t index = 0;
  std::array<std::size_t, 6> axis{};  // capacity, horizon, wsf, arf, los, traffic
  ScenarioConfig config;
};

// Full-factorial grid, capacity outermost and traffic innermost.
std::vector<SweepCell> sweep_grid(const ScenarioConfig& base);

}  // namespace arrp
