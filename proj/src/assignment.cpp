#include "arrp/assignment.hpp"

#include <algorithm>
#include <limits>

#include <fmt/format.h>
#include <omp.h>

namespace arrp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Every time bound is tested with the same slack, so that the screen and the
// full check agree when a stop lands exactly on its deadline.
constexpr double kTol = kTimeTolerance;

// Flat copy of one vehicle's schedule plus the derived quantities the
// screening needs. Reused across calls on the same thread.
struct ScheduleView {
  int size = 0;
  NodeId anchor = kNoNode;
  double ready = 0.0;
  std::vector<NodeId> node;
  std::vector<double> time;
  std::vector<double> arrival;
  std::vector<double> wait;
  std::vector<double> deadline;
  std::vector<int> partner;  // drop-off: index of its pickup, -1 if already onboard
  std::vector<char> pickup;
  std::vector<int> occ_after;
  std::vector<double> theta;

  // Scratch for the schedule with the new pickup inserted.
  std::vector<double> time2;
  std::vector<double> arrival2;
  std::vector<double> wait2;
  std::vector<double> deadline2;
  std::vector<double> theta2;

  void resize(int s) {
    size = s;
    const auto n = static_cast<std::size_t>(s);
    node.resize(n);
    time.resize(n);
    arrival.resize(n);
    wait.resize(n);
    deadline.resize(n);
    partner.resize(n);
    pickup.resize(n);
    occ_after.resize(n);
    theta.resize(n + 1);
    time2.resize(n);
    arrival2.resize(n);
    wait2.resize(n);
    deadline2.resize(n);
    theta2.resize(n + 1);
  }
};

ScheduleView& scratch_view() {
  thread_local ScheduleView view;
  return view;
}

// theta[j] for j in [from, size): the largest arrival delay at stop j that
// keeps every constraining later stop on time. A delay entering stop j is
// absorbed by early-arrival waits before it reaches stop k. A drop-off only
// constrains when its pickup lies before j; otherwise both shift and the
// ride time cannot grow.
void compute_theta(int from, int size, const double* time, const double* wait, const double* deadline,
                   const int* partner, const char* pickup, double* theta) {
  for (int j = from; j < size; ++j) {
    double absorbed = 0.0;
    double best = kInf;
    for (int k = j; k < size; ++k) {
      absorbed += wait[k];
      if (pickup[k] || partner[k] < j) best = std::min(best, deadline[k] - time[k] + absorbed);
    }
    theta[j] = best;
  }
  theta[size] = kInf;
}

void build_view(ScheduleView& v, const Vehicle& vehicle, std::span<const Request> requests,
                std::span<const RequestState> states, double clock) {
  const int s = static_cast<int>(vehicle.schedule.size());
  v.resize(s);
  v.anchor = vehicle.node;
  v.ready = vehicle.ready_time(clock);
  int occ = vehicle.occupancy;
  for (int k = 0; k < s; ++k) {
    const Stop& stop = vehicle.schedule[static_cast<std::size_t>(k)];
    const Request& r = requests[static_cast<std::size_t>(stop.request)];
    const auto uk = static_cast<std::size_t>(k);
    v.node[uk] = stop.node;
    v.time[uk] = stop.time;
    v.arrival[uk] = stop.arrival;
    v.wait[uk] = stop.is_pickup() ? stop.time - stop.arrival : 0.0;
    v.pickup[uk] = stop.is_pickup() ? 1 : 0;
    occ += stop.is_pickup() ? r.party_size : -r.party_size;
    v.occ_after[uk] = occ;
    if (stop.is_pickup()) {
      v.partner[uk] = -2;
      v.deadline[uk] = r.latest_pickup;
    } else {
      int p = -1;
      for (int q = k - 1; q >= 0; --q) {
        const Stop& other = vehicle.schedule[static_cast<std::size_t>(q)];
        if (other.request == stop.request && other.is_pickup()) {
          p = q;
          break;
        }
      }
      v.partner[uk] = p;
      const double picked = p >= 0 ? v.time[static_cast<std::size_t>(p)]
                                   : states[static_cast<std::size_t>(stop.request)].actual_pickup.value_or(0.0);
      v.deadline[uk] = picked + r.direct_time + r.max_delay;
    }
  }
  compute_theta(0, s, v.time.data(), v.wait.data(), v.deadline.data(), v.partner.data(), v.pickup.data(),
                v.theta.data());
}

// Cheap necessary conditions before enumerating positions. Both time bounds
// follow from the triangle inequality on travel times.
bool may_serve(const Vehicle& vehicle, const Request& r, const TravelMatrix& m, double clock) {
  if (vehicle.status == VehicleStatus::in_service_solo) return false;
  if (!r.willing_to_share && !(vehicle.schedule.empty() && vehicle.onboard.empty())) return false;
  if (r.party_size > vehicle.capacity) return false;
  const double ready = vehicle.ready_time(clock);
  if (!(ready + m.time(vehicle.node, r.origin) <= r.latest_pickup + kTol)) return false;
  NodeId last = vehicle.node;
  double last_time = ready;
  if (!vehicle.schedule.empty()) {
    last = vehicle.schedule.back().node;
    last_time = vehicle.schedule.back().time;
  }
  // The latest arrival at the origin over all positions is via the last stop.
  // An empty vehicle can hold instead of arriving early at a new first stop.
  if (vehicle.occupancy > 0 && !(last_time + m.time(last, r.origin) >= r.earliest_pickup - vehicle.max_wait - kTol)) return false;
  return true;
}

struct Found {
  int pickup_index;
  int dropoff_index;
  double cost;
  double wait;
};

// Visits every feasible (pickup, drop-off) position pair. Pickup positions
// are scanned from the last stop backwards.
template <typename Visit>
void enumerate_insertions(const Vehicle& vehicle, const Request& r, const SystemState& state,
                          const TravelMatrix& m, Visit&& visit) {
  if (!may_serve(vehicle, r, m, state.clock)) return;
  ScheduleView& v = scratch_view();
  build_view(v, vehicle, state.requests, state.states, state.clock);
  const int S = v.size;
  const NodeId o = r.origin;
  const NodeId d = r.destination;
  const int q = r.party_size;
  const double od_time = m.time(o, d);
  const double od_dist = m.distance(o, d);
  // Nobody on board: the vehicle holds at its anchor rather than arriving
  // early, so the wait bound does not apply to its first stop.
  const bool hold = vehicle.occupancy == 0;

  for (int i = S; i >= 0; --i) {
    const auto ui = static_cast<std::size_t>(i);
    const NodeId prev = i == 0 ? v.anchor : v.node[ui - 1];
    const double prev_time = i == 0 ? v.ready : v.time[ui - 1];
    const double reach = prev_time + m.time(prev, o);
    if (!(reach <= r.latest_pickup + kTol)) continue;
    const double alpha = std::max(reach, r.earliest_pickup);
    const double wait = alpha - reach;
    // Arrival via any earlier position is no later, so the wait only grows.
    // Only a new first stop of an empty vehicle is exempt.
    if (!(wait <= vehicle.max_wait + kTol) && !(i == 0 && hold)) {
      if (!hold) break;
      i = 1;
      continue;
    }
    const int occ_before = i == 0 ? vehicle.occupancy : v.occ_after[ui - 1];
    if (occ_before + q > vehicle.capacity) continue;

    // Drop-off directly after the pickup.
    {
      const double beta = alpha + od_time;
      bool ok = beta - alpha - r.direct_time <= r.max_delay + kTol;
      if (ok && i < S) ok = beta + m.time(d, v.node[ui]) - v.arrival[ui] <= v.theta[ui] + kTol;
      if (ok && i == 0 && hold && S > 0)
        ok = v.time[0] - (beta + m.time(d, v.node[0])) <= vehicle.max_wait + kTol;
      if (ok) {
        double cost = m.distance(prev, o) + od_dist;
        if (i < S) cost += m.distance(d, v.node[ui]) - m.distance(prev, v.node[ui]);
        visit(Found{i, i, cost, wait});
      }
    }
    if (i == S) continue;

    const double shift = alpha + m.time(o, v.node[ui]) - v.arrival[ui];
    if (!(shift <= v.theta[ui] + kTol)) continue;
    if (i == 0 && hold && !(v.time[0] - (alpha + m.time(o, v.node[0])) <= vehicle.max_wait + kTol)) continue;

    // Times with only the pickup inserted, then the budget table for the
    // drop-off on that schedule.
    for (int k = i; k < S; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      const double arr = k == i ? alpha + m.time(o, v.node[uk])
                                : v.time2[uk - 1] + m.time(v.node[uk - 1], v.node[uk]);
      const double t = v.pickup[uk] ? std::max(arr, vehicle.schedule[uk].window.earliest) : arr;
      v.arrival2[uk] = arr;
      v.time2[uk] = t;
      v.wait2[uk] = t - arr;
    }
    for (int k = 0; k < S; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      if (k < i) {
        v.time2[uk] = v.time[uk];
        v.arrival2[uk] = v.arrival[uk];
        v.wait2[uk] = v.wait[uk];
      }
      if (!v.pickup[uk] && v.partner[uk] >= i) {
        const Request& rk = state.requests[static_cast<std::size_t>(vehicle.schedule[uk].request)];
        v.deadline2[uk] = v.time2[static_cast<std::size_t>(v.partner[uk])] + rk.direct_time + rk.max_delay;
      } else {
        v.deadline2[uk] = v.deadline[uk];
      }
    }
    compute_theta(i + 1, S, v.time2.data(), v.wait2.data(), v.deadline2.data(), v.partner.data(),
                  v.pickup.data(), v.theta2.data());

    const double pickup_cost = m.distance(prev, o) + m.distance(o, v.node[ui]) - m.distance(prev, v.node[ui]);
    for (int j = i + 1; j <= S; ++j) {
      const auto uj = static_cast<std::size_t>(j);
      if (v.occ_after[uj - 1] + q > vehicle.capacity) break;
      const double beta = v.time2[uj - 1] + m.time(v.node[uj - 1], d);
      // Later drop-off positions never arrive earlier.
      if (!(beta - alpha - r.direct_time <= r.max_delay + kTol)) break;
      if (j < S && !(beta + m.time(d, v.node[uj]) - v.arrival2[uj] <= v.theta2[uj] + kTol)) continue;
      double cost = pickup_cost + m.distance(v.node[uj - 1], d);
      if (j < S) cost += m.distance(d, v.node[uj]) - m.distance(v.node[uj - 1], v.node[uj]);
      visit(Found{i, j, cost, wait});
    }
  }
}

bool better(const Found& a, const Found& b) {
  if (a.cost != b.cost) return a.cost < b.cost;
  if (a.pickup_index != b.pickup_index) return a.pickup_index < b.pickup_index;
  return a.dropoff_index < b.dropoff_index;
}

std::optional<Found> best_found(const Vehicle& vehicle, const Request& r, const SystemState& state,
                                const TravelMatrix& m) {
  std::optional<Found> best;
  enumerate_insertions(vehicle, r, state, m, [&](const Found& f) {
    if (!best || better(f, *best)) best = f;
  });
  return best;
}

}  // namespace

long long max_insertion_count(std::size_t schedule_len) {
  const auto s = static_cast<long long>(schedule_len);
  return (s + 2) * (s + 1) / 2;
}

ScreeningTable build_screening_table(std::span<const double> slack) {
  ScreeningTable table;
  table.theta.resize(slack.size());
  double running = kInf;
  for (std::size_t k = slack.size(); k-- > 0;) {
    running = std::min(running, slack[k]);
    table.theta[k] = running;
  }
  return table;
}

double insertion_detour(const TravelMatrix& matrix, NodeId prev, NodeId new_node, std::optional<NodeId> next) {
  if (!matrix.reachable(prev, new_node)) return kUnreachable;
  if (!next) return matrix.time(prev, new_node);
  if (!matrix.reachable(new_node, *next) || !matrix.reachable(prev, *next)) return kUnreachable;
  return matrix.time(prev, new_node) + matrix.time(new_node, *next) - matrix.time(prev, *next);
}

double stop_deadline(const Stop& stop, const Vehicle& vehicle, std::span<const Request> requests,
                     std::span<const RequestState> states) {
  const Request& r = requests[static_cast<std::size_t>(stop.request)];
  if (stop.is_pickup()) return r.latest_pickup;
  for (const Stop& s : vehicle.schedule)
    if (s.request == stop.request && s.is_pickup()) return s.time + r.direct_time + r.max_delay;
  return states[static_cast<std::size_t>(stop.request)].actual_pickup.value_or(0.0) + r.direct_time + r.max_delay;
}

ScheduleCheck verify_schedule(const Vehicle& vehicle, std::span<const Stop> schedule,
                              std::span<const Request> requests, std::span<const RequestState> states,
                              const TravelMatrix& matrix, double clock) {
  auto fail = [](std::string why) { return ScheduleCheck{false, std::move(why)}; };

  std::vector<RequestIndex> riders(vehicle.onboard);
  std::vector<RequestIndex> seen_pickup;
  std::vector<std::pair<RequestIndex, double>> picked;  // scheduled pickup times
  bool any_solo = false;
  std::size_t distinct = riders.size();
  for (RequestIndex r : riders) any_solo |= !requests[static_cast<std::size_t>(r)].willing_to_share;

  NodeId prev = vehicle.node;
  double t = vehicle.ready_time(clock);
  int occ = vehicle.occupancy;
  for (const Stop& s : schedule) {
    const Request& r = requests[static_cast<std::size_t>(s.request)];
    const double arrival = t + matrix.time(prev, s.node);
    if (s.is_pickup()) {
      const double served = std::max(arrival, r.earliest_pickup);
      if (!(served <= r.latest_pickup + kTol)) return fail(fmt::format("request {} picked up late", r.id));
      const bool first_of_empty = vehicle.occupancy == 0 && &s == &schedule.front();
      if (!first_of_empty && !(served - arrival <= vehicle.max_wait + kTol)) return fail(fmt::format("wait too long for request {}", r.id));
      occ += r.party_size;
      if (occ > vehicle.capacity) return fail("capacity exceeded");
      seen_pickup.push_back(s.request);
      picked.emplace_back(s.request, served);
      any_solo |= !r.willing_to_share;
      ++distinct;
      t = served;
    } else {
      double pickup_time = 0.0;
      auto it = std::find_if(picked.begin(), picked.end(), [&](const auto& p) { return p.first == s.request; });
      if (it != picked.end()) {
        pickup_time = it->second;
      } else if (std::find(riders.begin(), riders.end(), s.request) != riders.end()) {
        pickup_time = states[static_cast<std::size_t>(s.request)].actual_pickup.value_or(0.0);
      } else {
        return fail(fmt::format("drop-off of request {} precedes its pickup", r.id));
      }
      if (!(arrival - pickup_time - r.direct_time <= r.max_delay + kTol))
        return fail(fmt::format("request {} exceeds its delay bound", r.id));
      occ -= r.party_size;
      if (occ < 0) return fail("occupancy below zero");
      t = arrival;
    }
    prev = s.node;
  }
  if (occ != 0) return fail("schedule does not drop off every rider");
  if (any_solo && distinct > 1) return fail("solo rider shares the vehicle");
  return {};
}

std::vector<Stop> apply_insertion(const Vehicle& vehicle, const Request& request, RequestIndex req,
                                  int pickup_index, int dropoff_index) {
  std::vector<Stop> out(vehicle.schedule);
  Stop pickup{req, StopKind::pickup, request.origin, request.pickup_window(), 0.0, 0.0};
  Stop dropoff{req, StopKind::dropoff, request.destination, dropoff_window(request), 0.0, 0.0};
  out.insert(out.begin() + pickup_index, pickup);
  out.insert(out.begin() + dropoff_index + 1, dropoff);
  return out;
}

double schedule_length(const Vehicle& vehicle, std::span<const Stop> schedule, const TravelMatrix& matrix) {
  double total = 0.0;
  NodeId prev = vehicle.node;
  for (const Stop& s : schedule) {
    total += matrix.distance(prev, s.node);
    prev = s.node;
  }
  return total;
}

double plan_cost(const InsertionPlan& plan, const Vehicle& vehicle, const TravelMatrix& matrix) {
  return schedule_length(vehicle, plan.new_schedule, matrix) - schedule_length(vehicle, vehicle.schedule, matrix);
}

std::vector<InsertionPlan> feasible_insertion_plans(RequestIndex req, const Vehicle& vehicle,
                                                    const SystemState& state, const TravelMatrix& matrix) {
  const Request& r = state.requests.at(static_cast<std::size_t>(req));
  std::vector<Found> found;
  enumerate_insertions(vehicle, r, state, matrix, [&](const Found& f) { found.push_back(f); });
  std::vector<InsertionPlan> plans;
  plans.reserve(found.size());
  for (const Found& f : found) {
    InsertionPlan p;
    p.vehicle = vehicle.id;
    p.pickup_index = f.pickup_index;
    p.dropoff_index = f.dropoff_index;
    p.added_vmt = f.cost;
    p.early_wait = f.wait;
    Vehicle copy = vehicle;
    copy.schedule = apply_insertion(vehicle, r, req, f.pickup_index, f.dropoff_index);
    propagate_schedule_times(copy, matrix, state.clock);
    p.new_schedule = std::move(copy.schedule);
    plans.push_back(std::move(p));
  }
  return plans;
}

std::optional<InsertionPlan> best_insertion(RequestIndex req, const Vehicle& vehicle, const SystemState& state,
                                            const TravelMatrix& matrix) {
  const auto f = best_found(vehicle, state.requests.at(static_cast<std::size_t>(req)), state, matrix);
  if (!f) return std::nullopt;
  InsertionPlan p;
  p.vehicle = vehicle.id;
  p.pickup_index = f->pickup_index;
  p.dropoff_index = f->dropoff_index;
  p.added_vmt = f->cost;
  p.early_wait = f->wait;
  return p;
}

void commit_insertion(SystemState& state, RequestIndex req, VehicleId vid, int pickup_index, int dropoff_index,
                      const TravelMatrix& matrix) {
  Vehicle& v = state.vehicles.at(static_cast<std::size_t>(vid));
  const Request& r = state.requests.at(static_cast<std::size_t>(req));
  std::vector<Stop> schedule = apply_insertion(v, r, req, pickup_index, dropoff_index);
  const ScheduleCheck check = verify_schedule(v, schedule, state.requests, state.states, matrix, state.clock);
  if (!check.ok)
    throw InvariantViolation(fmt::format("insertion of request {} into vehicle {} infeasible: {}", r.id, vid,
                                         check.reason));
  v.anchor_time = v.ready_time(state.clock);
  v.schedule = std::move(schedule);
  propagate_schedule_times(v, matrix, state.clock);
  if (is_idle(v.status)) {
    v.rebalance_target = kNoZone;
    v.rebalance_node = kNoNode;
    v.rebalance_arrived_at.reset();
  }
  v.status = service_status(v, state.requests);

  RequestState& rs = state.states[static_cast<std::size_t>(req)];
  rs.phase = RequestPhase::assigned;
  rs.assigned_vehicle = vid;
  for (const Stop& s : v.schedule) {
    RequestState& other = state.states[static_cast<std::size_t>(s.request)];
    if (s.is_pickup())
      other.scheduled_pickup = s.time;
    else
      other.scheduled_dropoff = s.time;
  }
}

AssignmentAction assign_requests(SystemState& state, std::span<const RequestIndex> pooled,
                                 const TravelMatrix& matrix, const AssignmentOptions& options) {
  AssignmentAction action;
  std::vector<RequestIndex> order(pooled.begin(), pooled.end());
  std::sort(order.begin(), order.end(), [&](RequestIndex a, RequestIndex b) {
    const Request& ra = state.requests[static_cast<std::size_t>(a)];
    const Request& rb = state.requests[static_cast<std::size_t>(b)];
    if (ra.earliest_pickup != rb.earliest_pickup) return ra.earliest_pickup < rb.earliest_pickup;
    return ra.id < rb.id;
  });

  const auto fleet = static_cast<std::ptrdiff_t>(state.vehicles.size());
  std::vector<std::optional<Found>> best(state.vehicles.size());
  const int threads = std::max(1, options.threads);

  for (RequestIndex n : order) {
    const Request& r = state.requests[static_cast<std::size_t>(n)];
    RequestState& rs = state.states[static_cast<std::size_t>(n)];
    if (rs.phase != RequestPhase::pending)
      throw InvariantViolation(fmt::format("request {} pooled in phase {}", r.id, to_string(rs.phase)));
    if (state.clock > r.latest_pickup) {
      rs.phase = RequestPhase::rejected;
      action.rejected.push_back(n);
      continue;
    }

    const SystemState& snapshot = state;
#pragma omp parallel for schedule(dynamic, 32) num_threads(threads) if (threads > 1)
    for (std::ptrdiff_t m = 0; m < fleet; ++m)
      best[static_cast<std::size_t>(m)] =
          best_found(snapshot.vehicles[static_cast<std::size_t>(m)], r, snapshot, matrix);

    // Reduce in vehicle-id order so the outcome does not depend on threads.
    VehicleId overall = kNoVehicle;
    VehicleId idle = kNoVehicle;
    for (std::size_t m = 0; m < best.size(); ++m) {
      if (!best[m]) continue;
      const auto vid = static_cast<VehicleId>(m);
      if (overall == kNoVehicle || best[m]->cost < best[static_cast<std::size_t>(overall)]->cost) overall = vid;
      if (vehicle_priority(state.vehicles[m].status) == 0 &&
          (idle == kNoVehicle || best[m]->cost < best[static_cast<std::size_t>(idle)]->cost))
        idle = vid;
    }
    if (overall == kNoVehicle) {
      action.deferred.push_back(n);
      continue;
    }
    VehicleId chosen = overall;
    if (idle != kNoVehicle &&
        std::abs(best[static_cast<std::size_t>(idle)]->cost - best[static_cast<std::size_t>(overall)]->cost) <=
            options.epsilon_m)
      chosen = idle;

    const Found f = *best[static_cast<std::size_t>(chosen)];
    const VehicleStatus before = state.vehicles[static_cast<std::size_t>(chosen)].status;
    commit_insertion(state, n, chosen, f.pickup_index, f.dropoff_index, matrix);
    action.assigned[chosen].push_back(n);
    action.log.push_back({n, chosen, f.pickup_index, f.dropoff_index, f.cost, before});
  }
  return action;
}

}  // namespace arrp
