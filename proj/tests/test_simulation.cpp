#include <doctest.h>

#include <sstream>

#include "arrp/metrics.hpp"
#include "arrp/scenario.hpp"
#include "arrp/simulation.hpp"
#include "support/testkit.hpp"

using namespace arrp;
using testkit::Los;

namespace {

// Line of nodes 100 m apart at 10 m/s, one zone per 500 m.
struct LineWorld {
  RoadGraph graph = make_lattice(10, 1, 100.0, 10.0);
  ZonePartition zones = ZonePartition::covering(graph, 500.0);
  TravelMatrix matrix = all_pairs_shortest(graph);
  DemandRates rates{zones.zone_count(), 4, 900.0};
  World world() const { return {&graph, &zones, &matrix, &rates}; }
};

SimulationOptions options(double end, double horizon = 0.0, bool rebalance = false) {
  SimulationOptions o;
  o.epochs = {30.0, horizon, 0.0, end};
  o.rebalance = rebalance;
  return o;
}

std::vector<Vehicle> fleet_at(std::vector<NodeId> nodes, int capacity = 4) {
  std::vector<Vehicle> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    Vehicle v;
    v.id = static_cast<VehicleId>(i);
    v.node = nodes[i];
    v.capacity = capacity;
    out.push_back(v);
  }
  return out;
}

std::vector<const Event*> of_type(const EventTrace& t, EventType type) {
  std::vector<const Event*> out;
  for (const Event& e : t.events())
    if (e.type == type) out.push_back(&e);
  return out;
}

std::string ndjson(const EventTrace& t, std::span<const Request> requests) {
  std::ostringstream os;
  write_ndjson(os, t, requests);
  return os.str();
}

}  // namespace

TEST_SUITE("simulation") {

TEST_CASE("pool boundaries") {
  const LineWorld w;
  const double clock = 600.0, h = 900.0;
  std::vector<Request> rs{
      testkit::make_request(1, 0, 5, 590.0, {300, 600}, w.matrix),              // on demand, last epoch
      testkit::make_request(2, 0, 5, clock + h, {300, 600}, w.matrix, true, 1, 1200.0),      // at the horizon
      testkit::make_request(3, 0, 5, clock + h + 1, {300, 600}, w.matrix, true, 1, 1200.0),  // just past it
      testkit::make_request(4, 0, 5, 700.0, {300, 600}, w.matrix),              // not placed yet
      testkit::make_request(5, 0, 5, 100.0, {300, 600}, w.matrix),              // already visible
  };
  std::vector<RequestState> st(rs.size());
  st[4].visible = true;
  const std::vector<RequestIndex> carry{4};
  CHECK(pool_requests(rs, st, clock, 30.0, h, carry) == std::vector<RequestIndex>{0, 1, 4});
  CHECK(pool_requests(rs, st, clock + 30.0, 30.0, h, carry) == std::vector<RequestIndex>{0, 1, 2, 4});
  CHECK(pool_requests(rs, st, clock, 30.0, 0.0, {}) == std::vector<RequestIndex>{0});
  CHECK(pool_requests(rs, st, clock, 30.0, 0.0, std::vector<RequestIndex>{0, 0}) == std::vector<RequestIndex>{0});
  st[0].phase = RequestPhase::assigned;
  CHECK(pool_requests(rs, st, clock, 30.0, h, {}) == std::vector<RequestIndex>{1});
}

TEST_CASE("a step with nothing to do only advances the clock") {
  const LineWorld w;
  Simulator sim(w.world(), options(3600.0), {}, fleet_at({2, 7}));
  sim.step();
  sim.step();
  CHECK(sim.state().clock == 30.0);
  CHECK(sim.trace().size() == 0);
  CHECK(sim.state().vehicles[0].node == 2);
  CHECK(sim.state().vehicles[1].node == 7);
  CHECK(sim.state().vehicles[0].status == VehicleStatus::idle_waiting);
  CHECK(sim.settled());
}

TEST_CASE("one request, one nearby vehicle") {
  const LineWorld w;
  Request r = testkit::make_request(1, 1, 4, 5.0, {300, 600}, w.matrix);
  CHECK(r.direct_time == 30.0);
  Simulator sim(w.world(), options(300.0), {r}, fleet_at({0}));
  sim.run();
  const EventTrace& t = sim.trace();
  REQUIRE(of_type(t, EventType::request_placed).size() == 1);
  CHECK(of_type(t, EventType::request_placed)[0]->time == 5.0);
  CHECK(of_type(t, EventType::request_visible)[0]->time == 30.0);
  const auto assigned = of_type(t, EventType::assigned);
  REQUIRE(assigned.size() == 1);
  CHECK(assigned[0]->time == 30.0);
  CHECK(assigned[0]->vehicle == 0);
  const auto pick = of_type(t, EventType::picked_up);
  const auto drop = of_type(t, EventType::dropped_off);
  REQUIRE(pick.size() == 1);
  REQUIRE(drop.size() == 1);
  CHECK(pick[0]->time == 40.0);
  CHECK(drop[0]->time == 70.0);
  CHECK(drop[0]->time - pick[0]->time == r.direct_time);

  const auto moves = of_type(t, EventType::vehicle_moved);
  REQUIRE(moves.size() == 4);
  CHECK(moves[0]->odometer == OdometerClass::empty_pickup);
  CHECK(moves[0]->time == 40.0);
  for (int k = 1; k < 4; ++k) {
    CHECK(moves[static_cast<std::size_t>(k)]->odometer == OdometerClass::occupied);
    CHECK(moves[static_cast<std::size_t>(k)]->time == 40.0 + 10.0 * k);
  }
  const Odometer& odo = sim.state().odometers[0];
  CHECK(odo.empty_pickup == 100.0);
  CHECK(odo.occupied == 300.0);
  CHECK(sim.state().states[0].phase == RequestPhase::completed);
  CHECK(sim.state().vehicles[0].status == VehicleStatus::idle_waiting);
  CHECK(sim.settled());
}

TEST_CASE("an empty vehicle holds back for a late pickup") {
  const LineWorld w;
  // Advance request: visible at 30 (H = 900), pickup not before 600.
  Request r = testkit::make_request(1, 5, 8, 600.0, {300, 600}, w.matrix, true, 1, 900.0);
  r.placed_at = 0.0;
  Simulator sim(w.world(), options(1200.0, 900.0), {r}, fleet_at({0}));
  sim.run();
  const auto moves = of_type(sim.trace(), EventType::vehicle_moved);
  REQUIRE_FALSE(moves.empty());
  CHECK(moves.front()->time == 560.0);
  CHECK(of_type(sim.trace(), EventType::picked_up)[0]->time == 600.0);
}

TEST_CASE("an expired request is rejected exactly once") {
  const LineWorld w;
  const Request r = testkit::make_request(1, 1, 4, 0.0, {60, 600}, w.matrix);
  Simulator sim(w.world(), options(600.0), {r}, {});
  sim.run();
  const auto rejected = of_type(sim.trace(), EventType::rejected);
  REQUIRE(rejected.size() == 1);
  CHECK(rejected[0]->time == 90.0);
  CHECK(of_type(sim.trace(), EventType::request_visible).size() == 1);
  CHECK(sim.state().states[0].phase == RequestPhase::rejected);
  CHECK(sim.state().outstanding.empty());
}

TEST_CASE("requests placed after the end are ignored") {
  const LineWorld w;
  const Request r = testkit::make_request(1, 1, 4, 700.0, {300, 600}, w.matrix);
  Simulator sim(w.world(), options(600.0), {r}, fleet_at({0}));
  sim.run();
  CHECK(sim.trace().size() == 0);
  CHECK(sim.settled());
}

TEST_CASE("an empty request set gives an empty report") {
  const LineWorld w;
  Simulator sim(w.world(), options(600.0, 0.0, true), {}, fleet_at({0, 3}));
  sim.run();
  CHECK(of_type(sim.trace(), EventType::request_placed).empty());
  const MetricsReport rep = compute_metrics(sim.trace(), {}, 2);
  CHECK_FALSE(rep.vmr.has_value());
  CHECK_FALSE(rep.avg_wait.has_value());
  CHECK(rep.active_vehicles == 0);
  CHECK(rep.requests_total == 0);
}

TEST_CASE("construction rejects bad inputs") {
  const LineWorld w;
  World broken = w.world();
  broken.rates = nullptr;
  CHECK_THROWS_AS(Simulator(broken, options(60.0), {}, {}), std::invalid_argument);
  auto o = options(60.0);
  o.epochs.delta_t = 0.0;
  CHECK_THROWS_AS(Simulator(w.world(), o, {}, {}), std::invalid_argument);
  auto fleet = fleet_at({0, 1});
  fleet[1].id = 5;
  CHECK_THROWS_AS(Simulator(w.world(), options(60.0), {}, fleet), std::invalid_argument);
}

TEST_CASE("synthetic hour: audited trace, exact epochs, deterministic") {
  ScenarioConfig cfg;
  cfg.grid_cols = 10;
  cfg.grid_rows = 10;
  cfg.node_spacing_m = 400.0;
  cfg.zone_size_m = 1000.0;
  cfg.origin_sigma_m = 1200.0;
  cfg.dest_sigma_m = 1200.0;
  cfg.requests_per_hour = 500.0;
  cfg.fleet_size = 40;
  cfg.capacity = 4;
  cfg.horizon_s = 900.0;
  cfg.arf = 0.5;
  cfg.wsf = 0.67;
  cfg.seed = 7;
  ScenarioWorld world = ScenarioWorld::build(cfg);
  world.prepare(cfg.traffic_tier, 1);
  const TravelMatrix& m = world.matrix(cfg.traffic_tier);
  const ScenarioInputs inputs = prepare_inputs(cfg, world, m);
  std::vector<Request> requests = materialize_demand(inputs.draws, cfg, m);
  CHECK(requests.size() > 400);
  CHECK(requests.size() < 600);

  const World w{&world.graph(), &world.zones(), &m, &world.rates()};
  Simulator sim(w, simulation_options(cfg), requests, make_fleet(inputs.fleet_nodes, cfg));
  double expect = cfg.delta_t_s * -1.0;
  bool exact = true, inside = true, feasible = true;
  std::size_t seen = 0;
  while (!(sim.draining() && sim.settled()) && sim.state().clock < cfg.duration_s + cfg.max_drain_s) {
    if (!sim.draining() && sim.state().clock + cfg.delta_t_s >= cfg.duration_s) {
      sim.run();
      break;
    }
    const double t0 = sim.state().clock;
    sim.step();
    expect += cfg.delta_t_s;
    exact &= sim.state().clock == t0 + cfg.delta_t_s && sim.state().clock == expect;
    const auto ev = sim.trace().events();
    for (; seen < ev.size(); ++seen) {
      const Event& e = ev[seen];
      const bool early_placement = e.type == EventType::request_placed && t0 < cfg.delta_t_s * -0.5;
      if (e.time > sim.state().clock || (e.time <= t0 && !early_placement)) {
        inside = false;
        MESSAGE(to_string(e.type), " at ", e.time, " in (", t0, ", ", sim.state().clock, "]");
      }
    }
    for (const Vehicle& v : sim.state().vehicles) {
      const auto verdict = testkit::oracle_schedule(sim.state(), v, m);
      if (!verdict.feasible) {
        feasible = false;
        MESSAGE("vehicle ", v.id, " at ", sim.state().clock, ": ", verdict.reason);
      }
    }
  }
  CHECK(exact);
  CHECK(inside);
  CHECK(feasible);
  CHECK(sim.settled());

  testkit::AuditInput in;
  in.trace = &sim.trace();
  in.requests = sim.state().requests;
  in.final_state = &sim.state();
  in.start_nodes = inputs.fleet_nodes;
  in.graph = &world.graph();
  in.delta_t = cfg.delta_t_s;
  const testkit::AuditReport rep = testkit::audit_trace(in);
  for (const auto& v : rep.violations) MESSAGE(v);
  CHECK(rep.violations.empty());
  CHECK(rep.placed == static_cast<long long>(requests.size()));
  CHECK(rep.served + rep.rejected + rep.residual == rep.placed);
  CHECK(rep.residual == 0);
  CHECK(rep.served > rep.placed / 2);
  CHECK(rep.shared_pickups > 0);
  CHECK(sim.trace().count(EventType::rebalance_start) > 0);

  // Same inputs again: identical trace.
  Simulator again(w, simulation_options(cfg), requests, make_fleet(inputs.fleet_nodes, cfg));
  again.run();
  CHECK(ndjson(again.trace(), requests) == ndjson(sim.trace(), requests));
  const RunResult full = run_scenario(cfg, world, inputs);
  CHECK(ndjson(full.trace, full.requests) == ndjson(sim.trace(), requests));
}

}  // TEST_SUITE
