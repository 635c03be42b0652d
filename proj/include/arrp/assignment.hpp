#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arrp/core_state.hpp"
#include "arrp/network.hpp"

namespace arrp {

/// One way of inserting a request into a vehicle's schedule.
///
/// The pickup goes before original stop `pickup_index`, the drop-off before
/// original stop `dropoff_index` (index == schedule size means "append").
/// With equal indices the two new stops are adjacent.
struct InsertionPlan {
  VehicleId vehicle = kNoVehicle;
  int pickup_index = 0;
  int dropoff_index = 0;
  std::vector<Stop> new_schedule;
  double added_vmt = 0.0;   // meters
  double early_wait = 0.0;  // vehicle wait at the new pickup, seconds
};

// Per-position shift budget; theta[j] bounds the delay that may be pushed
// into stop j without breaking any later window.
struct ScreeningTable {
  std::vector<double> theta;
};

struct Assignment {
  RequestIndex request = kNoRequest;
  VehicleId vehicle = kNoVehicle;
  int pickup_index = 0;
  int dropoff_index = 0;
  double added_vmt = 0.0;
  VehicleStatus previous_status = VehicleStatus::idle_waiting;
};

struct AssignmentAction {
  std::map<VehicleId, std::vector<RequestIndex>> assigned;
  std::vector<RequestIndex> rejected;
  std::vector<RequestIndex> deferred;
  std::vector<Assignment> log;  // in commit order
};

struct AssignmentOptions {
  double epsilon_m = 1000.0;
  int threads = 1;
};

// (|S|+2)(|S|+1)/2
long long max_insertion_count(std::size_t schedule_len);

// Suffix minimum of per-stop slack (latest - scheduled).
ScreeningTable build_screening_table(std::span<const double> slack);

// Extra travel time from visiting `new_node` between prev and next; with no
// next stop it is the time to reach new_node. Infinite when unreachable.
double insertion_detour(const TravelMatrix& matrix, NodeId prev, NodeId new_node,
                        std::optional<NodeId> next);

// Time by which a stop must be served: the pickup window end, or for a
// drop-off the rider's pickup time + direct time + max delay.
double stop_deadline(const Stop& stop, const Vehicle& vehicle, std::span<const Request> requests,
                     std::span<const RequestState> states);

struct ScheduleCheck {
  bool ok = true;
  std::string reason;
};

// Full re-verification of a candidate schedule for `vehicle`: times are
// propagated from the vehicle's anchor, then pickup windows, ride delay,
// capacity, solo commitment, early-arrival wait and stop ordering are
// checked. `schedule` may differ from vehicle.schedule.
ScheduleCheck verify_schedule(const Vehicle& vehicle, std::span<const Stop> schedule,
                              std::span<const Request> requests, std::span<const RequestState> states,
                              const TravelMatrix& matrix, double clock);

// Every feasible insertion of `req` into `vehicle`, each with its propagated
// schedule. Positions are explored from the last stop backwards.
std::vector<InsertionPlan> feasible_insertion_plans(RequestIndex req, const Vehicle& vehicle,
                                                    const SystemState& state, const TravelMatrix& matrix);

// Cheapest feasible insertion (ties: earlier pickup, then earlier drop-off).
// new_schedule is left empty.
std::optional<InsertionPlan> best_insertion(RequestIndex req, const Vehicle& vehicle, const SystemState& state,
                                            const TravelMatrix& matrix);

// Route length from the anchor through the plan's schedule minus the same
// for the vehicle's current schedule.
double plan_cost(const InsertionPlan& plan, const Vehicle& vehicle, const TravelMatrix& matrix);

// Route length from the vehicle's anchor through all stops of `schedule`.
double schedule_length(const Vehicle& vehicle, std::span<const Stop> schedule, const TravelMatrix& matrix);

// Builds the schedule produced by inserting req's pickup/drop-off at the
// plan positions (times not propagated).
std::vector<Stop> apply_insertion(const Vehicle& vehicle, const Request& request, RequestIndex req,
                                  int pickup_index, int dropoff_index);

// Commits a plan: updates the vehicle schedule, propagated times, status and
// the states of every request on the vehicle. Throws InvariantViolation if
// the resulting schedule fails verification.
void commit_insertion(SystemState& state, RequestIndex req, VehicleId vehicle, int pickup_index,
                      int dropoff_index, const TravelMatrix& matrix);

// Sequential insertion heuristic over the pooled requests: ascending earliest
// pickup (ties by id); expired requests rejected; each request goes to the
// best idle vehicle when within epsilon of the best overall plan, otherwise
// to the overall best; requests with no feasible plan are deferred.
AssignmentAction assign_requests(SystemState& state, std::span<const RequestIndex> pooled,
                                 const TravelMatrix& matrix, const AssignmentOptions& options);

}  // namespace arrp
