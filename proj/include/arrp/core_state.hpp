#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "arrp/network.hpp"

namespace arrp {

using RequestIndex = std::int32_t;
using VehicleId = std::int32_t;

inline constexpr RequestIndex kNoRequest = -1;
inline constexpr VehicleId kNoVehicle = -1;

// Slack for floating-point comparisons in execution-time audits (seconds).
inline constexpr double kTimeTolerance = 1e-6;

// A broken simulation invariant; the run must stop.
struct InvariantViolation : std::logic_error {
  using std::logic_error::logic_error;
};

struct TimeWindow {
  double earliest = 0.0;
  double latest = 0.0;
};

struct Request {
  std::int64_t id = 0;
  NodeId origin = kNoNode;
  NodeId destination = kNoNode;
  double placed_at = 0.0;
  int party_size = 1;
  bool willing_to_share = true;
  bool advance = false;
  double earliest_pickup = 0.0;
  double latest_pickup = 0.0;
  double max_delay = 0.0;
  double direct_time = 0.0;
  double direct_dist = 0.0;

  TimeWindow pickup_window() const { return {earliest_pickup, latest_pickup}; }
};

// [e + direct, l + direct + max_delay]
TimeWindow dropoff_window(const Request& req);

enum class RequestPhase : std::uint8_t { pending, assigned, onboard, completed, rejected };

std::string_view to_string(RequestPhase phase);

struct RequestState {
  RequestPhase phase = RequestPhase::pending;
  bool visible = false;
  std::optional<double> scheduled_pickup;
  std::optional<double> scheduled_dropoff;
  std::optional<double> actual_pickup;
  std::optional<double> actual_dropoff;
  VehicleId assigned_vehicle = kNoVehicle;
  bool was_shared = false;
};

enum class StopKind : std::uint8_t { pickup, dropoff };

struct Stop {
  RequestIndex request = kNoRequest;
  StopKind kind = StopKind::pickup;
  NodeId node = kNoNode;
  TimeWindow window;
  double arrival = 0.0;  // when the vehicle reaches the node
  double time = 0.0;     // when the stop is served

  bool is_pickup() const { return kind == StopKind::pickup; }
  double wait() const { return time - arrival; }
};

enum class VehicleStatus : std::uint8_t {
  idle_waiting,
  rebalancing,
  idle_after_rebalancing,
  in_service_solo,
  in_service_shared,
};

std::string_view to_string(VehicleStatus status);

inline bool is_idle(VehicleStatus s) {
  return s == VehicleStatus::idle_waiting || s == VehicleStatus::rebalancing ||
         s == VehicleStatus::idle_after_rebalancing;
}

enum class OdometerClass : std::uint8_t { occupied, empty_pickup, empty_rebalance };

std::string_view to_string(OdometerClass c);

/// Vehicle state between decisions.
///
/// `node`/`anchor_time` is where the vehicle next stands still: the node it
/// is parked at (and since when), or the head of the link it is traversing
/// and the arrival time there. Vehicles never turn around mid-link, so all
/// planning starts from the anchor.
struct Vehicle {
  VehicleId id = kNoVehicle;
  int capacity = 4;
  double max_wait = 600.0;

  NodeId node = kNoNode;
  double anchor_time = 0.0;
  VehicleStatus status = VehicleStatus::idle_waiting;

  std::vector<Stop> schedule;
  std::vector<RequestIndex> onboard;
  int occupancy = 0;

  ZoneId rebalance_target = kNoZone;
  NodeId rebalance_node = kNoNode;
  double idle_since = 0.0;
  std::optional<double> rebalance_arrived_at;

  // Link in progress (link_from -> node), booked on arrival.
  NodeId link_from = kNoNode;
  double link_entry_time = 0.0;
  double link_meters = 0.0;
  OdometerClass link_class = OdometerClass::empty_pickup;

  bool moving() const { return link_from != kNoNode; }
  // Earliest time the vehicle can leave its anchor, given the decision clock.
  double ready_time(double clock) const { return moving() ? anchor_time : std::max(anchor_time, clock); }
  std::vector<int> occupancy_after(std::span<const Request> requests) const;
};

struct Odometer {
  double occupied = 0.0;
  double empty_pickup = 0.0;
  double empty_rebalance = 0.0;

  double total() const { return occupied + empty_pickup + empty_rebalance; }
  void add(OdometerClass c, double meters);
};

struct SystemState {
  int epoch = 0;
  double clock = 0.0;
  std::vector<Request> requests;
  std::vector<RequestState> states;
  std::vector<Vehicle> vehicles;
  std::vector<RequestIndex> outstanding;  // visible, unassigned
  std::vector<Odometer> odometers;        // per vehicle
};

// Recomputes stop times from the vehicle's anchor: pickups are served at
// max(arrival, earliest), drop-offs on arrival.
void propagate_schedule_times(Vehicle& vehicle, const TravelMatrix& matrix, double clock);

// Lower rank = higher priority. Solo-committed vehicles are ineligible.
std::optional<int> vehicle_priority(VehicleStatus status);

// Solo if any request it carries or will carry declined sharing.
VehicleStatus service_status(const Vehicle& vehicle, std::span<const Request> requests);

// Serves the head stop of the vehicle's schedule at `time` and updates
// request and vehicle state. `arrived_at` is when the vehicle reached the
// node; a vehicle with riders on board may not wait there longer than its
// max_wait. Throws InvariantViolation on out-of-order drop-offs,
// occupancy overflow/underflow, or window violations.
void execute_stop(SystemState& state, VehicleId vehicle, double time, double arrived_at);

}  // namespace arrp
