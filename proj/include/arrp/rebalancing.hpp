#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "arrp/core_state.hpp"
#include "arrp/network.hpp"

namespace arrp {

enum class RebalanceStrategy : std::uint8_t { uniform, demand, demand_and_supply };

std::string_view to_string(RebalanceStrategy s);
RebalanceStrategy parse_rebalance_strategy(std::string_view name);

struct ZoneProbabilityInput {
  double lambda_future = 0.0;  // expected requests over the lookahead
  int r_z = 1;                 // vehicles the zone would need to keep busy
  int v_z = 0;                 // in-service vehicles expected to free up there
  int outstanding_count = 0;
};

// P(X >= k) for X ~ Poisson(mean), by summing the lower terms.
double poisson_upper_tail(double mean, int k);

double zone_probability(const ZoneProbabilityInput& input, RebalanceStrategy strategy);

struct RebalanceMove {
  VehicleId vehicle = kNoVehicle;
  ZoneId zone = kNoZone;
  NodeId target = kNoNode;   // zone centroid node
  double distance = 0.0;     // meters from the vehicle to the target
  double probability = 0.0;  // zone probability when the move was committed
  bool outstanding = false;  // consumed an outstanding-request slot
};

struct RebalanceAction {
  std::vector<RebalanceMove> moves;  // commit order
  std::vector<VehicleId> stay;       // eligible but no zone in reach; keep their place
};

struct RebalanceObjective {
  double service = 1.0;  // product of P over zones receiving vehicles
  double cost = 0.0;     // meters
};

// Throws std::invalid_argument if a vehicle is moved twice.
RebalanceObjective objective_values(std::span<const RebalanceMove> moves, std::span<const double> zone_probability);

std::vector<VehicleId> eligible_rebalance_vehicles(const SystemState& state, double psi_s);

struct RebalanceOptions {
  RebalanceStrategy strategy = RebalanceStrategy::demand_and_supply;
  double psi_s = 300.0;
  double phi_m = 5000.0;
  double lookahead_s = 900.0;
};

// Per-zone inputs for the current state: prorated future demand, supply from
// in-service vehicles and outstanding requests by origin zone. r_z = 1.
std::vector<ZoneProbabilityInput> zone_inputs(const SystemState& state, const ZonePartition& zones,
                                              const DemandRates& rates, double lookahead_s);

RebalanceAction rebalance_vehicles(const SystemState& state, const ZonePartition& zones, const DemandRates& rates,
                                   const TravelMatrix& matrix, const RebalanceOptions& options);

// Same greedy pass on explicit inputs; used by rebalance_vehicles and tests.
RebalanceAction rebalance_greedy(std::span<const VehicleId> eligible, std::span<const NodeId> vehicle_node,
                                 std::vector<ZoneProbabilityInput> inputs, const ZonePartition& zones,
                                 const TravelMatrix& matrix, RebalanceStrategy strategy, double phi_m);

}  // namespace arrp
