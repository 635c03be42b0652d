#include <doctest.h>

#include <sstream>

#include "arrp/metrics.hpp"
#include "arrp/scenario.hpp"
#include "support/testkit.hpp"

using namespace arrp;

namespace {

Event ev(EventType type, double time, RequestIndex r = kNoRequest, VehicleId v = kNoVehicle) {
  Event e;
  e.type = type;
  e.time = time;
  e.request = r;
  e.vehicle = v;
  return e;
}

Event moved(double time, VehicleId v, double meters, OdometerClass cls) {
  Event e = ev(EventType::vehicle_moved, time, kNoRequest, v);
  e.meters = meters;
  e.odometer = cls;
  return e;
}

Request rider(std::int64_t id, double earliest, double direct) {
  Request r;
  r.id = id;
  r.earliest_pickup = earliest;
  r.placed_at = earliest;
  r.latest_pickup = earliest + 420;
  r.direct_time = direct;
  r.max_delay = 900;
  return r;
}

void lifecycle(EventTrace& t, RequestIndex r, double at) {
  t.append(ev(EventType::request_placed, at, r));
  t.append(ev(EventType::request_visible, at, r));
  t.append(ev(EventType::assigned, at, r, 0));
}

ReportRow row_for(const ScenarioConfig& cfg, const MetricsReport& m) { return {report_key(cfg), m, {}}; }

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::size_t fields(const std::string& line) { return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1; }

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("one solo trip") {
  const std::vector<Request> rs{rider(1, 0.0, 800.0)};
  EventTrace t;
  lifecycle(t, 0, 0.0);
  t.append(moved(100.0, 0, 1609.0, OdometerClass::empty_pickup));
  t.append(ev(EventType::picked_up, 100.0, 0, 0));
  t.append(moved(900.0, 0, 8047.0, OdometerClass::occupied));
  t.append(ev(EventType::dropped_off, 900.0, 0, 0));
  const MetricsReport m = compute_metrics(t, rs, 3);
  CHECK(m.vmr_service == 8047.0);
  CHECK(m.vmr_idle == 1609.0);
  CHECK(m.vmr == 9656.0);
  CHECK(m.total_vmt == 9656.0);
  CHECK(m.pct_shared == 0.0);
  CHECK(m.pct_served == 1.0);
  CHECK(m.avg_wait == 100.0);
  CHECK(m.avg_delay == 0.0);
  CHECK(m.active_vehicles == 1);
  CHECK(m.max_occupancy_hist == std::vector<int>{0, 1});
}

TEST_CASE("two fully overlapping riders") {
  const std::vector<Request> rs{rider(1, 0.0, 100.0), rider(2, 0.0, 100.0)};
  EventTrace t;
  lifecycle(t, 0, 0.0);
  lifecycle(t, 1, 0.0);
  t.append(ev(EventType::picked_up, 10.0, 0, 0));
  t.append(ev(EventType::picked_up, 10.0, 1, 0));
  t.append(moved(110.0, 0, 1000.0, OdometerClass::occupied));
  t.append(ev(EventType::dropped_off, 110.0, 0, 0));
  t.append(ev(EventType::dropped_off, 110.0, 1, 0));
  const MetricsReport m = compute_metrics(t, rs, 1);
  CHECK(m.pct_shared == 1.0);
  CHECK(m.max_occupancy_hist == std::vector<int>{0, 0, 1});
  CHECK(m.vmr == 500.0);
  CHECK(m.avg_wait == 10.0);
}

TEST_CASE("rejections count against service only") {
  const std::vector<Request> rs{rider(1, 0.0, 100.0), rider(2, 0.0, 100.0), rider(3, 0.0, 100.0),
                                rider(4, 0.0, 100.0)};
  EventTrace t;
  for (RequestIndex r = 0; r < 4; ++r) t.append(ev(EventType::request_placed, 0.0, r));
  t.append(ev(EventType::rejected, 450.0, 1));
  t.append(ev(EventType::rejected, 450.0, 2));
  t.append(ev(EventType::picked_up, 30.0, 0, 0));
  t.append(ev(EventType::dropped_off, 200.0, 0, 0));
  const MetricsReport m = compute_metrics(t, rs, 2);
  CHECK(m.pct_served == 0.25);
  CHECK(m.requests_rejected == 2);
  CHECK(m.avg_wait == 30.0);
  CHECK(m.avg_delay == 70.0);
}

TEST_CASE("nothing served leaves ratios absent") {
  const std::vector<Request> rs{rider(1, 0.0, 100.0)};
  EventTrace t;
  t.append(ev(EventType::request_placed, 0.0, 0));
  t.append(ev(EventType::rejected, 500.0, 0));
  t.append(moved(50.0, 0, 300.0, OdometerClass::empty_rebalance));
  const MetricsReport m = compute_metrics(t, rs, 1);
  CHECK_FALSE(m.vmr);
  CHECK_FALSE(m.vmr_service);
  CHECK_FALSE(m.pct_shared);
  CHECK(m.pct_served == 0.0);
  CHECK(m.total_vmt == 300.0);
  CHECK(m.active_vehicles == 0);
}

TEST_CASE("an unfinished trip is an error") {
  const std::vector<Request> rs{rider(1, 0.0, 100.0)};
  EventTrace t;
  t.append(ev(EventType::picked_up, 0.0, 0, 0));
  CHECK_THROWS_AS(compute_metrics(t, rs, 1), std::invalid_argument);
  EventTrace u;
  u.append(ev(EventType::dropped_off, 0.0, 0, 0));
  CHECK_THROWS_AS(compute_metrics(u, rs, 1), std::invalid_argument);
}

TEST_CASE("simulated run agrees with a naive replay") {
  ScenarioConfig cfg;
  cfg.grid_cols = 8;
  cfg.grid_rows = 8;
  cfg.node_spacing_m = 400.0;
  cfg.requests_per_hour = 200.0;
  cfg.fleet_size = 15;
  cfg.capacity = 3;
  cfg.horizon_s = 300.0;
  cfg.arf = 0.33;
  cfg.wsf = 0.67;
  cfg.los_tier = LosTier::strict;
  cfg.seed = 11;
  ScenarioWorld world = ScenarioWorld::build(cfg);
  world.prepare(cfg.traffic_tier, 1);
  const ScenarioInputs inputs = prepare_inputs(cfg, world, world.matrix(cfg.traffic_tier));
  const RunResult res = run_scenario(cfg, world, inputs);
  const MetricsReport& m = res.report;
  const MetricsReport n = testkit::naive_metrics(res.trace, res.requests, 15);

  REQUIRE(m.requests_served > 100);
  CHECK(m.requests_total == n.requests_total);
  CHECK(m.requests_served == n.requests_served);
  CHECK(m.requests_rejected == n.requests_rejected);
  CHECK(*m.vmr == doctest::Approx(*n.vmr).epsilon(1e-12));
  CHECK(*m.vmr_service == doctest::Approx(*n.vmr_service).epsilon(1e-12));
  CHECK(*m.vmr_idle == doctest::Approx(*n.vmr_idle).epsilon(1e-12));
  CHECK(*m.pct_shared == *n.pct_shared);
  CHECK(*m.pct_served == *n.pct_served);
  CHECK(*m.avg_wait == doctest::Approx(*n.avg_wait).epsilon(1e-12));
  CHECK(*m.avg_delay == doctest::Approx(*n.avg_delay).epsilon(1e-12));
  CHECK(m.active_vehicles == n.active_vehicles);
  CHECK(m.max_occupancy_hist == n.max_occupancy_hist);
  CHECK(*m.pct_shared > 0.0);

  // Sharing from the trace matches the flags kept in the final state.
  long long flagged = 0;
  for (const RequestState& s : res.final_state.states)
    if (s.phase == RequestPhase::completed && s.was_shared) ++flagged;
  CHECK(flagged == static_cast<long long>(*m.pct_shared * static_cast<double>(m.requests_served) + 0.5));

  double odo = 0.0;
  for (const Odometer& o : res.final_state.odometers) odo += o.total();
  CHECK(m.total_vmt == doctest::Approx(odo).epsilon(1e-12));
  CHECK(*m.vmr * static_cast<double>(m.requests_served) == doctest::Approx(m.total_vmt).epsilon(1e-6));
  CHECK(*m.vmr == *m.vmr_service + *m.vmr_idle);
  CHECK(*m.pct_served == static_cast<double>(m.requests_served) / static_cast<double>(m.requests_total));
  CHECK(static_cast<int>(m.max_occupancy_hist.size()) - 1 <= cfg.capacity);
  CHECK(m.active_vehicles <= cfg.fleet_size);
  const LosBounds los = los_bounds(cfg.los_tier);
  CHECK(*m.avg_wait <= los.max_wait_s);
  CHECK(*m.avg_delay <= los.max_delay_s);
}

TEST_CASE("report rows") {
  ScenarioConfig cfg;
  cfg.scenario_id = "one";
  MetricsReport m;
  m.vmr = 9656.0;
  m.vmr_service = 8047.0;
  m.vmr_idle = 1609.0;
  m.pct_shared = 0.0;
  m.pct_served = 1.0;
  m.avg_wait = 100.0;
  m.avg_delay = 0.0;
  m.active_vehicles = 1;
  m.max_occupancy_hist = {0, 1};
  m.total_vmt = 9656.0;
  m.requests_total = 1;
  m.requests_served = 1;
  const std::vector<ReportRow> rows{row_for(cfg, m)};

  const auto dir = testkit::scratch_dir("metrics");
  write_metrics_csv(dir / "a.csv", rows);
  write_metrics_csv(dir / "b.csv", rows);
  const std::string a = testkit::read_file(dir / "a.csv");
  CHECK(a == testkit::read_file(dir / "b.csv"));
  const auto ls = lines(a);
  REQUIRE(ls.size() == 2);
  CHECK(ls[0].rfind("scenario_id,fleet_size,capacity,horizon_s,wsf,arf,los_tier,traffic_tier,seed,vmr_m,"
                    "vmr_service_m,vmr_idle_m,pct_shared,pct_served,avg_wait_s,avg_delay_s,active_vehicles,"
                    "total_vmt_m",
                    0) == 0);
  CHECK(ls[0].find("occ_10") != std::string::npos);
  CHECK(ls[0].find("occ_11") == std::string::npos);
  CHECK(fields(ls[1]) == fields(ls[0]));
  CHECK(ls[1].rfind("one,1500,4,0,1.0000,0.0000,neutral,normal,1,9656.000,8047.000,1609.000,", 0) == 0);

  ReportRow empty = row_for(cfg, MetricsReport{});
  CHECK(fields(export_report(empty, 10)) == fields(ls[0]));
  ReportRow failed = row_for(cfg, MetricsReport{});
  failed.error = "bad, \"quoted\" cell";
  const std::string f = export_report(failed, 10);
  CHECK(f.find("\"bad, \"\"quoted\"\" cell\"") != std::string::npos);

  MetricsReport big = m;
  big.max_occupancy_hist.assign(13, 0);
  big.max_occupancy_hist[12] = 1;
  const std::vector<ReportRow> wide{row_for(cfg, m), row_for(cfg, big)};
  CHECK(occupancy_columns(wide) == 12);
}

TEST_CASE("full sweep exports one row per cell") {
  const std::vector<SweepCell> cells = sweep_grid(ScenarioConfig{});
  REQUIRE(cells.size() == 2880);
  std::vector<ReportRow> rows;
  for (const SweepCell& c : cells) rows.push_back(row_for(c.config, MetricsReport{}));
  const auto dir = testkit::scratch_dir("metrics_sweep");
  write_metrics_csv(dir / "all.csv", rows);
  const auto ls = lines(testkit::read_file(dir / "all.csv"));
  CHECK(ls.size() == 2881);
}

}  // TEST_SUITE
