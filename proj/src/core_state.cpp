#include "arrp/core_state.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace arrp {

TimeWindow dropoff_window(const Request& req) {
  return {req.earliest_pickup + req.direct_time, req.latest_pickup + req.direct_time + req.max_delay};
}

std::string_view to_string(RequestPhase phase) {
  switch (phase) {
    case RequestPhase::pending: return "pending";
    case RequestPhase::assigned: return "assigned";
    case RequestPhase::onboard: return "onboard";
    case RequestPhase::completed: return "completed";
    case RequestPhase::rejected: return "rejected";
  }
  return "?";
}

std::string_view to_string(VehicleStatus status) {
  switch (status) {
    case VehicleStatus::idle_waiting: return "idle_waiting";
    case VehicleStatus::rebalancing: return "rebalancing";
    case VehicleStatus::idle_after_rebalancing: return "idle_after_rebalancing";
    case VehicleStatus::in_service_solo: return "in_service_solo";
    case VehicleStatus::in_service_shared: return "in_service_shared";
  }
  return "?";
}

std::string_view to_string(OdometerClass c) {
  switch (c) {
    case OdometerClass::occupied: return "occupied";
    case OdometerClass::empty_pickup: return "empty_pickup";
    case OdometerClass::empty_rebalance: return "empty_rebalance";
  }
  return "?";
}

std::vector<int> Vehicle::occupancy_after(std::span<const Request> requests) const {
  std::vector<int> out;
  out.reserve(schedule.size());
  int occ = occupancy;
  for (const Stop& s : schedule) {
    const int q = requests[static_cast<std::size_t>(s.request)].party_size;
    occ += s.is_pickup() ? q : -q;
    out.push_back(occ);
  }
  return out;
}

void Odometer::add(OdometerClass c, double meters) {
  switch (c) {
    case OdometerClass::occupied: occupied += meters; break;
    case OdometerClass::empty_pickup: empty_pickup += meters; break;
    case OdometerClass::empty_rebalance: empty_rebalance += meters; break;
  }
}

void propagate_schedule_times(Vehicle& vehicle, const TravelMatrix& matrix, double clock) {
  if (vehicle.schedule.empty()) return;
  NodeId prev = vehicle.node;
  double t = vehicle.ready_time(clock);
  for (Stop& s : vehicle.schedule) {
    s.arrival = t + matrix.time(prev, s.node);
    s.time = s.is_pickup() ? std::max(s.arrival, s.window.earliest) : s.arrival;
    t = s.time;
    prev = s.node;
  }
}

std::optional<int> vehicle_priority(VehicleStatus status) {
  switch (status) {
    case VehicleStatus::idle_waiting:
    case VehicleStatus::idle_after_rebalancing:
    case VehicleStatus::rebalancing:
      return 0;
    case VehicleStatus::in_service_shared:
      return 1;
    case VehicleStatus::in_service_solo:
      return std::nullopt;
  }
  return std::nullopt;
}

VehicleStatus service_status(const Vehicle& vehicle, std::span<const Request> requests) {
  auto solo = [&](RequestIndex r) { return !requests[static_cast<std::size_t>(r)].willing_to_share; };
  const bool any_solo = std::any_of(vehicle.onboard.begin(), vehicle.onboard.end(), solo) ||
                        std::any_of(vehicle.schedule.begin(), vehicle.schedule.end(),
                                    [&](const Stop& s) { return solo(s.request); });
  return any_solo ? VehicleStatus::in_service_solo : VehicleStatus::in_service_shared;
}

void execute_stop(SystemState& state, VehicleId vid, double time, double arrived_at) {
  Vehicle& v = state.vehicles.at(static_cast<std::size_t>(vid));
  if (v.schedule.empty()) throw InvariantViolation(fmt::format("vehicle {} has no stop to execute", vid));
  const Stop stop = v.schedule.front();
  const Request& req = state.requests.at(static_cast<std::size_t>(stop.request));
  RequestState& rs = state.states.at(static_cast<std::size_t>(stop.request));

  if (v.moving() || v.node != stop.node)
    throw InvariantViolation(fmt::format("vehicle {} not at node {} for request {}", vid, stop.node, req.id));
  if (rs.assigned_vehicle != vid)
    throw InvariantViolation(fmt::format("request {} is not assigned to vehicle {}", req.id, vid));

  if (stop.is_pickup()) {
    if (rs.phase != RequestPhase::assigned)
      throw InvariantViolation(fmt::format("pickup of request {} in phase {}", req.id, to_string(rs.phase)));
    if (time < req.earliest_pickup - kTimeTolerance || time > req.latest_pickup + kTimeTolerance)
      throw InvariantViolation(fmt::format("request {} picked up at {} outside [{}, {}]", req.id, time,
                                           req.earliest_pickup, req.latest_pickup));
    if (v.occupancy > 0 && time - arrived_at > v.max_wait + kTimeTolerance)
      throw InvariantViolation(fmt::format("vehicle {} waited {} s for request {}", vid, time - arrived_at, req.id));
    if (v.occupancy + req.party_size > v.capacity)
      throw InvariantViolation(fmt::format("vehicle {} over capacity picking up request {}", vid, req.id));
    if (!v.onboard.empty()) {
      rs.was_shared = true;
      for (RequestIndex other : v.onboard) state.states[static_cast<std::size_t>(other)].was_shared = true;
    }
    v.occupancy += req.party_size;
    v.onboard.push_back(stop.request);
    rs.phase = RequestPhase::onboard;
    rs.actual_pickup = time;
  } else {
    auto it = std::find(v.onboard.begin(), v.onboard.end(), stop.request);
    if (rs.phase != RequestPhase::onboard || it == v.onboard.end())
      throw InvariantViolation(fmt::format("drop-off of request {} before its pickup", req.id));
    if (v.occupancy - req.party_size < 0)
      throw InvariantViolation(fmt::format("vehicle {} occupancy underflow", vid));
    const double delay = (time - *rs.actual_pickup) - req.direct_time;
    if (delay > req.max_delay + kTimeTolerance)
      throw InvariantViolation(fmt::format("request {} delayed {} s (max {})", req.id, delay, req.max_delay));
    v.occupancy -= req.party_size;
    v.onboard.erase(it);
    rs.phase = RequestPhase::completed;
    rs.actual_dropoff = time;
  }

  v.schedule.erase(v.schedule.begin());
  v.anchor_time = time;
  if (v.schedule.empty()) {
    if (!v.onboard.empty()) throw InvariantViolation(fmt::format("vehicle {} carries riders with no stops", vid));
    v.status = VehicleStatus::idle_waiting;
    v.idle_since = time;
    v.rebalance_arrived_at.reset();
  } else {
    v.status = service_status(v, state.requests);
  }
}

}  // namespace arrp
