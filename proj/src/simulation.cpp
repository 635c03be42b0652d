#include "arrp/simulation.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

namespace arrp {

namespace {

Event event(EventType type, double time, RequestIndex r, VehicleId v, NodeId node, ZoneId zone) {
  Event e;
  e.type = type;
  e.time = time;
  e.request = r;
  e.vehicle = v;
  e.node = node;
  e.zone = zone;
  return e;
}

}  // namespace

std::vector<RequestIndex> pool_requests(std::span<const Request> requests, std::span<const RequestState> states,
                                        double clock, double delta_t, double horizon,
                                        std::span<const RequestIndex> carryover) {
  (void)delta_t;  // on-demand arrivals older than one epoch are already visible or carried over
  std::vector<RequestIndex> pool(carryover.begin(), carryover.end());
  for (std::size_t i = 0; i < requests.size(); ++i) {
    const Request& r = requests[i];
    const RequestState& s = states[i];
    if (s.visible || s.phase != RequestPhase::pending) continue;
    if (r.placed_at > clock) continue;
    if (r.advance && r.earliest_pickup > clock + horizon) continue;
    pool.push_back(static_cast<RequestIndex>(i));
  }
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
  return pool;
}

Simulator::Simulator(World world, SimulationOptions options, std::vector<Request> requests,
                     std::vector<Vehicle> fleet)
    : world_(world), opt_(options) {
  if (!world_.graph || !world_.zones || !world_.matrix || !world_.rates)
    throw std::invalid_argument("simulator world is incomplete");
  if (!(opt_.epochs.delta_t > 0.0)) throw std::invalid_argument("epoch length must be positive");
  state_.requests = std::move(requests);
  state_.states.assign(state_.requests.size(), RequestState{});
  state_.vehicles = std::move(fleet);
  state_.odometers.assign(state_.vehicles.size(), Odometer{});
  for (std::size_t i = 0; i < state_.vehicles.size(); ++i)
    if (state_.vehicles[i].id != static_cast<VehicleId>(i))
      throw std::invalid_argument("vehicle ids must be 0..M-1 in order");
  state_.clock = opt_.epochs.start - opt_.epochs.delta_t;
  placement_order_.resize(state_.requests.size());
  std::iota(placement_order_.begin(), placement_order_.end(), RequestIndex{0});
  std::stable_sort(placement_order_.begin(), placement_order_.end(), [&](RequestIndex a, RequestIndex b) {
    return state_.requests[static_cast<std::size_t>(a)].placed_at <
           state_.requests[static_cast<std::size_t>(b)].placed_at;
  });
}

bool Simulator::settled() const {
  for (std::size_t i = 0; i < state_.requests.size(); ++i) {
    const RequestPhase p = state_.states[i].phase;
    if (p == RequestPhase::completed || p == RequestPhase::rejected) continue;
    if (state_.requests[i].placed_at > opt_.epochs.end) continue;
    return false;
  }
  return std::none_of(state_.vehicles.begin(), state_.vehicles.end(),
                      [](const Vehicle& v) { return v.moving() || !v.schedule.empty(); });
}

void Simulator::run() {
  while (state_.clock + opt_.epochs.delta_t < opt_.epochs.end) step();
  draining_ = true;
  const double limit = opt_.epochs.end + opt_.max_drain_s;
  while (!settled() && state_.clock < limit) step();
}

void Simulator::step() {
  const double t0 = state_.clock;
  const double t1 = t0 + opt_.epochs.delta_t;
  std::vector<Event> events;
  advance_world(t0, t1, events);
  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.time < b.time; });
  state_.clock = t1;
  ++state_.epoch;
  decide(events);
  first_step_ = false;
  trace_.append(events);
}

void Simulator::advance_world(double t0, double t1, std::vector<Event>& out) {
  const ZonePartition& zones = *world_.zones;
  while (next_placement_ < placement_order_.size()) {
    const RequestIndex r = placement_order_[next_placement_];
    const Request& req = state_.requests[static_cast<std::size_t>(r)];
    if (req.placed_at > t1 || req.placed_at > opt_.epochs.end) break;
    if (first_step_ || req.placed_at > t0)
      out.push_back(event(EventType::request_placed, req.placed_at, r, kNoVehicle, req.origin, zones.zone_of(req.origin)));
    ++next_placement_;
  }
  for (Vehicle& v : state_.vehicles) move_vehicle(v, t0, t1, out);
}

void Simulator::depart(Vehicle& v, NodeId toward, double at, OdometerClass cls) {
  const TravelMatrix& m = *world_.matrix;
  const NodeId hop = m.next_hop(v.node, toward);
  if (hop == kNoNode || hop == v.node)
    throw InvariantViolation(fmt::format("vehicle {} has no route from node {} to {}", v.id, v.node, toward));
  v.link_from = v.node;
  v.link_entry_time = at;
  v.link_meters = m.distance(v.node, hop);
  v.link_class = cls;
  v.anchor_time = at + m.time(v.node, hop);
  v.node = hop;
}

void Simulator::move_vehicle(Vehicle& v, double t0, double t1, std::vector<Event>& out) {
  const ZonePartition& zones = *world_.zones;
  for (;;) {
    if (v.moving()) {
      if (v.anchor_time > t1) return;
      state_.odometers[static_cast<std::size_t>(v.id)].add(v.link_class, v.link_meters);
      Event e = event(EventType::vehicle_moved, v.anchor_time, kNoRequest, v.id, v.node, zones.zone_of(v.node));
      e.meters = v.link_meters;
      e.odometer = v.link_class;
      out.push_back(e);
      v.link_from = kNoNode;
    }
    const double now = std::max(v.anchor_time, t0);
    if (!v.schedule.empty()) {
      const Stop& s = v.schedule.front();
      if (v.node != s.node) {
        double leave = now;
        // An empty vehicle holds where it is instead of arriving early.
        if (v.occupancy == 0 && s.is_pickup())
          leave = std::max(now, s.window.earliest - world_.matrix->time(v.node, s.node));
        if (leave > t1) return;
        depart(v, s.node, leave, v.occupancy > 0 ? OdometerClass::occupied : OdometerClass::empty_pickup);
        continue;
      }
      const double t = s.is_pickup() ? std::max(now, s.window.earliest) : now;
      if (t > t1) return;
      const RequestIndex r = s.request;
      const bool pickup = s.is_pickup();
      execute_stop(state_, v.id, t, v.anchor_time);
      out.push_back(event(pickup ? EventType::picked_up : EventType::dropped_off, t, r, v.id, v.node,
                     zones.zone_of(v.node)));
      continue;
    }
    if (v.status == VehicleStatus::rebalancing) {
      if (v.node == v.rebalance_node) {
        v.status = VehicleStatus::idle_after_rebalancing;
        v.rebalance_arrived_at = now;
        v.anchor_time = now;
        out.push_back(event(EventType::rebalance_end, now, kNoRequest, v.id, v.node, zones.zone_of(v.node)));
        return;
      }
      depart(v, v.rebalance_node, now, OdometerClass::empty_rebalance);
      continue;
    }
    return;
  }
}

void Simulator::decide(std::vector<Event>& out) {
  const ZonePartition& zones = *world_.zones;
  const double clock = state_.clock;
  std::vector<RequestIndex> pool =
      pool_requests(state_.requests, state_.states, clock, opt_.epochs.delta_t, opt_.epochs.horizon,
                    state_.outstanding);
  std::erase_if(pool, [&](RequestIndex r) {
    return state_.requests[static_cast<std::size_t>(r)].placed_at > opt_.epochs.end;
  });
  for (RequestIndex r : pool) {
    RequestState& s = state_.states[static_cast<std::size_t>(r)];
    if (s.visible) continue;
    s.visible = true;
    const NodeId o = state_.requests[static_cast<std::size_t>(r)].origin;
    out.push_back(event(EventType::request_visible, clock, r, kNoVehicle, o, zones.zone_of(o)));
  }

  const AssignmentAction action = assign_requests(state_, pool, *world_.matrix, opt_.assignment);
  for (const Assignment& a : action.log) {
    const NodeId o = state_.requests[static_cast<std::size_t>(a.request)].origin;
    if (a.previous_status == VehicleStatus::rebalancing) {
      const Vehicle& v = state_.vehicles[static_cast<std::size_t>(a.vehicle)];
      out.push_back(event(EventType::rebalance_end, clock, kNoRequest, v.id, v.node, zones.zone_of(v.node)));
    }
    out.push_back(event(EventType::assigned, clock, a.request, a.vehicle, o, zones.zone_of(o)));
  }
  for (RequestIndex r : action.rejected) {
    const NodeId o = state_.requests[static_cast<std::size_t>(r)].origin;
    out.push_back(event(EventType::rejected, clock, r, kNoVehicle, o, zones.zone_of(o)));
  }
  state_.outstanding = action.deferred;
  std::sort(state_.outstanding.begin(), state_.outstanding.end());

  if (opt_.rebalance && !draining_)
    apply_rebalance(rebalance_vehicles(state_, zones, *world_.rates, *world_.matrix, opt_.rebalancing), out);

  // Stops due at the decision instant itself belong to this epoch.
  for (Vehicle& v : state_.vehicles) move_vehicle(v, clock, clock, out);
}

void Simulator::apply_rebalance(const RebalanceAction& action, std::vector<Event>& out) {
  const ZonePartition& zones = *world_.zones;
  const double clock = state_.clock;
  for (const RebalanceMove& m : action.moves) {
    Vehicle& v = state_.vehicles[static_cast<std::size_t>(m.vehicle)];
    out.push_back(event(EventType::rebalance_start, clock, kNoRequest, v.id, m.target, m.zone));
    v.rebalance_target = m.zone;
    v.rebalance_node = m.target;
    v.anchor_time = clock;
    if (zones.zone_of(v.node) == m.zone || v.node == m.target) {
      v.status = VehicleStatus::idle_after_rebalancing;
      v.rebalance_arrived_at = clock;
      out.push_back(event(EventType::rebalance_end, clock, kNoRequest, v.id, v.node, zones.zone_of(v.node)));
    } else {
      v.status = VehicleStatus::rebalancing;
      v.rebalance_arrived_at.reset();
    }
  }
}

}  // namespace arrp
