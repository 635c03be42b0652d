#include "arrp/rebalancing.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

namespace arrp {

std::string_view to_string(RebalanceStrategy s) {
  switch (s) {
    case RebalanceStrategy::uniform: return "uniform";
    case RebalanceStrategy::demand: return "demand";
    case RebalanceStrategy::demand_and_supply: return "demand_and_supply";
  }
  return "?";
}

RebalanceStrategy parse_rebalance_strategy(std::string_view name) {
  if (name == "uniform") return RebalanceStrategy::uniform;
  if (name == "demand") return RebalanceStrategy::demand;
  if (name == "demand_and_supply") return RebalanceStrategy::demand_and_supply;
  throw InputError(fmt::format("unknown rebalance strategy '{}'", name));
}

double poisson_upper_tail(double mean, int k) {
  if (k <= 0) return 1.0;
  if (!(mean > 0.0)) return 0.0;
  const double log_mean = std::log(mean);
  double below = 0.0;
  for (int i = 0; i < k; ++i) below += std::exp(-mean + i * log_mean - std::lgamma(i + 1.0));
  return std::clamp(1.0 - below, 0.0, 1.0);
}

double zone_probability(const ZoneProbabilityInput& input, RebalanceStrategy strategy) {
  if (input.outstanding_count > 0) return 1.0;
  switch (strategy) {
    case RebalanceStrategy::uniform: return poisson_upper_tail(1.0, input.r_z);
    case RebalanceStrategy::demand: return poisson_upper_tail(input.lambda_future, input.r_z);
    case RebalanceStrategy::demand_and_supply:
      return poisson_upper_tail(input.lambda_future, input.r_z + input.v_z);
  }
  return 0.0;
}

RebalanceObjective objective_values(std::span<const RebalanceMove> moves, std::span<const double> zone_probability) {
  RebalanceObjective out;
  std::vector<VehicleId> seen;
  std::vector<ZoneId> served;
  for (const RebalanceMove& m : moves) {
    if (std::find(seen.begin(), seen.end(), m.vehicle) != seen.end())
      throw std::invalid_argument(fmt::format("vehicle {} has two destinations", m.vehicle));
    seen.push_back(m.vehicle);
    out.cost += m.distance;
    if (std::find(served.begin(), served.end(), m.zone) == served.end()) served.push_back(m.zone);
  }
  for (ZoneId z : served) out.service *= zone_probability[static_cast<std::size_t>(z)];
  return out;
}

std::vector<VehicleId> eligible_rebalance_vehicles(const SystemState& state, double psi_s) {
  std::vector<VehicleId> out;
  for (const Vehicle& v : state.vehicles) {
    if (v.status == VehicleStatus::idle_waiting && !v.moving()) {
      out.push_back(v.id);
    } else if (v.status == VehicleStatus::idle_after_rebalancing && v.rebalance_arrived_at &&
               state.clock - *v.rebalance_arrived_at >= psi_s) {
      out.push_back(v.id);
    }
  }
  return out;
}

std::vector<ZoneProbabilityInput> zone_inputs(const SystemState& state, const ZonePartition& zones,
                                              const DemandRates& rates, double lookahead_s) {
  std::vector<ZoneProbabilityInput> in(zones.zone_count());
  const double t1 = state.clock + lookahead_s;
  if (rates.zone_count() == zones.zone_count())
    for (std::size_t z = 0; z < in.size(); ++z)
      in[z].lambda_future = rates.expected(static_cast<ZoneId>(z), state.clock, t1);
  for (const Vehicle& v : state.vehicles) {
    if (v.schedule.empty()) continue;
    const Stop& last = v.schedule.back();
    if (last.time <= t1) ++in[static_cast<std::size_t>(zones.zone_of(last.node))].v_z;
  }
  for (RequestIndex r : state.outstanding) {
    if (state.states[static_cast<std::size_t>(r)].phase != RequestPhase::pending) continue;
    ++in[static_cast<std::size_t>(zones.zone_of(state.requests[static_cast<std::size_t>(r)].origin))]
          .outstanding_count;
  }
  return in;
}

RebalanceAction rebalance_greedy(std::span<const VehicleId> eligible, std::span<const NodeId> vehicle_node,
                                 std::vector<ZoneProbabilityInput> inputs, const ZonePartition& zones,
                                 const TravelMatrix& matrix, RebalanceStrategy strategy, double phi_m) {
  RebalanceAction action;
  if (eligible.empty()) return action;
  const std::size_t nz = zones.zone_count();

  struct Candidate {
    double distance;
    VehicleId vehicle;
  };
  std::vector<std::vector<Candidate>> cand(nz);
  for (std::size_t z = 0; z < nz; ++z) {
    const NodeId c = zones.zone(static_cast<ZoneId>(z)).centroid_node;
    if (c == kNoNode) continue;
    for (VehicleId v : eligible) {
      const NodeId at = vehicle_node[static_cast<std::size_t>(v)];
      if (!matrix.reachable(at, c)) continue;
      const double d = matrix.distance(at, c);
      if (d <= phi_m) cand[z].push_back({d, v});
    }
    std::sort(cand[z].begin(), cand[z].end(), [](const Candidate& a, const Candidate& b) {
      return a.distance != b.distance ? a.distance < b.distance : a.vehicle < b.vehicle;
    });
  }

  using Entry = std::pair<double, ZoneId>;
  auto lower = [](const Entry& a, const Entry& b) {
    return a.first != b.first ? a.first < b.first : a.second > b.second;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(lower)> heap(lower);
  for (std::size_t z = 0; z < nz; ++z)
    if (!cand[z].empty()) heap.emplace(zone_probability(inputs[z], strategy), static_cast<ZoneId>(z));

  std::vector<char> done(vehicle_node.size(), 0);
  std::vector<std::size_t> next(nz, 0);
  std::size_t remaining = eligible.size();
  while (remaining > 0 && !heap.empty()) {
    const auto [p, z] = heap.top();
    heap.pop();
    if (!(p > 0.0)) break;
    const auto uz = static_cast<std::size_t>(z);
    auto& list = cand[uz];
    while (next[uz] < list.size() && done[static_cast<std::size_t>(list[next[uz]].vehicle)]) ++next[uz];
    if (next[uz] == list.size()) continue;
    const Candidate c = list[next[uz]++];
    done[static_cast<std::size_t>(c.vehicle)] = 1;
    --remaining;

    RebalanceMove m{c.vehicle, z, zones.zone(z).centroid_node, c.distance, p, false};
    if (inputs[uz].outstanding_count > 0) {
      --inputs[uz].outstanding_count;
      m.outstanding = true;
    } else {
      ++inputs[uz].r_z;
    }
    action.moves.push_back(m);
    if (next[uz] < list.size()) heap.emplace(zone_probability(inputs[uz], strategy), z);
  }
  for (VehicleId v : eligible)
    if (!done[static_cast<std::size_t>(v)]) action.stay.push_back(v);
  return action;
}

RebalanceAction rebalance_vehicles(const SystemState& state, const ZonePartition& zones, const DemandRates& rates,
                                   const TravelMatrix& matrix, const RebalanceOptions& options) {
  if (!(options.phi_m > 0.0)) throw std::invalid_argument("rebalancing distance must be positive");
  const std::vector<VehicleId> eligible = eligible_rebalance_vehicles(state, options.psi_s);
  std::vector<NodeId> nodes(state.vehicles.size(), kNoNode);
  for (const Vehicle& v : state.vehicles) nodes[static_cast<std::size_t>(v.id)] = v.node;
  return rebalance_greedy(eligible, nodes, zone_inputs(state, zones, rates, options.lookahead_s), zones, matrix,
                          options.strategy, options.phi_m);
}

}  // namespace arrp
