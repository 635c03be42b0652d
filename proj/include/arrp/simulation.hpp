#pragma once

#include <span>
#include <vector>

#include "arrp/assignment.hpp"
#include "arrp/core_state.hpp"
#include "arrp/network.hpp"
#include "arrp/rebalancing.hpp"
#include "arrp/trace.hpp"

namespace arrp {

struct EpochSchedule {
  double delta_t = 30.0;
  double horizon = 0.0;  // 0 disables the advance channel
  double start = 0.0;
  double end = 3600.0;
};

struct SimulationOptions {
  EpochSchedule epochs;
  AssignmentOptions assignment;
  RebalanceOptions rebalancing;
  bool rebalance = true;
  double max_drain_s = 6 * 3600.0;
};

// Read-only inputs shared by every run over the same world.
struct World {
  const RoadGraph* graph = nullptr;
  const ZonePartition* zones = nullptr;
  const TravelMatrix* matrix = nullptr;
  const DemandRates* rates = nullptr;
};

// Requests the scheduler sees at `clock`: the carryover, on-demand requests
// placed up to `clock`, and advance requests placed up to `clock` whose
// earliest pickup is within `horizon`. Sorted, no duplicates.
std::vector<RequestIndex> pool_requests(std::span<const Request> requests, std::span<const RequestState> states,
                                        double clock, double delta_t, double horizon,
                                        std::span<const RequestIndex> carryover);

class Simulator {
 public:
  Simulator(World world, SimulationOptions options, std::vector<Request> requests, std::vector<Vehicle> fleet);

  // Moves the world over (clock, clock + delta_t], then pools, assigns and
  // (unless draining) rebalances at the new clock.
  void step();
  // Steps until the demand horizon ends, then drains.
  void run();

  bool draining() const { return draining_; }
  bool settled() const;

  const SystemState& state() const { return state_; }
  SystemState& state() { return state_; }
  const EventTrace& trace() const { return trace_; }
  EventTrace&& take_trace() { return std::move(trace_); }

 private:
  void advance_world(double t0, double t1, std::vector<Event>& out);
  void move_vehicle(Vehicle& v, double t0, double t1, std::vector<Event>& out);
  void depart(Vehicle& v, NodeId toward, double at, OdometerClass cls);
  void decide(std::vector<Event>& out);
  void apply_rebalance(const RebalanceAction& action, std::vector<Event>& out);

  World world_;
  SimulationOptions opt_;
  SystemState state_;
  EventTrace trace_;
  std::vector<RequestIndex> placement_order_;  // requests by placed_at
  std::size_t next_placement_ = 0;
  bool first_step_ = true;
  bool draining_ = false;
};

}  // namespace arrp
