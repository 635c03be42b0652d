#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>

#include <fcntl.h>
#include <unistd.h>

#include <fmt/format.h>
#include <json.hpp>

#include "arrp/cli.hpp"
#include "arrp/metrics.hpp"
#include "arrp/scenario.hpp"
#include "support/testkit.hpp"

using namespace arrp;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = 0;
  std::string err;
};

// Runs the CLI with stderr redirected into a file.
Outcome cli(std::vector<std::string> args) {
  const fs::path capture = fs::temp_directory_path() / fmt::format("arrp_cli_stderr_{}", ::getpid());
  std::vector<char*> argv;
  std::string prog = "arrp_sim";
  argv.push_back(prog.data());
  for (auto& a : args) argv.push_back(a.data());
  std::fflush(stderr);
  const int saved = ::dup(2);
  const int fd = ::open(capture.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
  ::dup2(fd, 2);
  ::close(fd);
  Outcome out;
  out.code = cli_main(static_cast<int>(argv.size()), argv.data());
  std::fflush(stderr);
  ::dup2(saved, 2);
  ::close(saved);
  out.err = testkit::read_file(capture);
  fs::remove(capture);
  return out;
}

const char* kTiny = R"({
  "grid_cols": 4, "grid_rows": 4, "node_spacing_m": 500, "requests_per_hour": 150,
  "fleet_size": 12, "duration_s": 1800, "seed": 3, "horizon_s": 300, "arf": 0.5, "wsf": 0.67
})";

fs::path tiny_config(const fs::path& dir, std::string_view extra = "") {
  std::string text = kTiny;
  if (!extra.empty()) text.insert(text.rfind('}'), fmt::format(", {}", extra));
  testkit::write_file(dir / "config.json", text);
  return dir / "config.json";
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::vector<std::vector<std::string>> out;
  std::istringstream in(testkit::read_file(path));
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> row(1);
    bool q = false;
    for (char c : line) {
      if (c == '"') q = !q;
      else if (c == ',' && !q) row.emplace_back();
      else row.back() += c;
    }
    out.push_back(row);
  }
  return out;
}

std::string cell(const std::vector<std::vector<std::string>>& t, std::size_t row, std::string_view col) {
  for (std::size_t i = 0; i < t[0].size(); ++i)
    if (t[0][i] == col) return t[row][i];
  FAIL("missing column ", col);
  return {};
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("run writes one metrics row and a consistent trace") {
  const fs::path dir = testkit::scratch_dir("cli_run");
  const Outcome o = cli({"run", "--config", tiny_config(dir).string(), "--out", (dir / "out").string(), "--trace"});
  INFO(o.err);
  REQUIRE(o.code == kExitOk);
  const auto t = read_csv(dir / "out" / "metrics.csv");
  REQUIRE(t.size() == 2);
  CHECK(t[0].size() == t[1].size());
  CHECK(cell(t, 1, "error").empty());

  std::map<std::string, long long> count;
  std::istringstream in(testkit::read_file(dir / "out" / "trace.ndjson"));
  double last = -1e300;
  for (std::string line; std::getline(in, line);) {
    const auto j = nlohmann::json::parse(line);
    ++count[j.at("event_type").get<std::string>()];
    CHECK(j.at("time_s").get<double>() >= last);
    last = j.at("time_s").get<double>();
  }
  CHECK(count["request_placed"] == std::stoll(cell(t, 1, "requests_total")));
  CHECK(count["dropped_off"] == std::stoll(cell(t, 1, "requests_served")));
  CHECK(count["rejected"] == std::stoll(cell(t, 1, "requests_rejected")));
  CHECK(count["picked_up"] == count["dropped_off"]);
  CHECK(count["vehicle_moved"] > 0);
  CHECK(cell(t, 1, "seed") == "3");
}

TEST_CASE("seed flag overrides the config") {
  const fs::path dir = testkit::scratch_dir("cli_seed");
  REQUIRE(cli({"run", "--config", tiny_config(dir).string(), "--out", dir.string(), "--seed", "11"}).code == 0);
  CHECK(cell(read_csv(dir / "metrics.csv"), 1, "seed") == "11");
}

TEST_CASE("input errors exit 1 and name the problem") {
  const fs::path dir = testkit::scratch_dir("cli_bad");
  Outcome o = cli({"run", "--config", tiny_config(dir, R"("fleet": 10)").string(), "--out", dir.string()});
  CHECK(o.code == kExitInput);
  CHECK(o.err.find("'fleet'") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "metrics.csv"));

  o = cli({"run", "--config", tiny_config(dir, R"("arf": 7)").string(), "--out", dir.string()});
  CHECK(o.code == kExitInput);
  CHECK(o.err.find("'arf'") != std::string::npos);

  CHECK(cli({"run", "--config", (dir / "missing.json").string()}).code == kExitInput);
  CHECK(cli({"run"}).code == kExitInput);
  CHECK(cli({"launch"}).code == kExitInput);
  CHECK(cli({"run", "--config", tiny_config(dir).string(), "--jobs", "0"}).code == kExitInput);
  CHECK(cli({"report", "--out", (dir / "nowhere").string()}).code == kExitInput);
}

TEST_CASE("validate") {
  const fs::path dir = testkit::scratch_dir("cli_validate");
  CHECK(cli({"validate", "--config", tiny_config(dir).string()}).code == kExitOk);
  CHECK(cli({"validate", "--config", tiny_config(dir, R"("los_tier": "lax")").string()}).code == kExitInput);
}

TEST_CASE("sweep rows, order and parallelism") {
  const fs::path dir = testkit::scratch_dir("cli_sweep");
  const fs::path cfg = tiny_config(dir, R"("sweep_capacity": [2, 4], "sweep_horizon_min": [0], "sweep_wsf": [1],
      "sweep_arf": [0], "sweep_los": ["neutral"], "sweep_traffic": ["normal"])");
  REQUIRE(cli({"sweep", "--config", cfg.string(), "--out", (dir / "a").string()}).code == kExitOk);
  const auto t = read_csv(dir / "a" / "metrics.csv");
  REQUIRE(t.size() == 3);
  CHECK(cell(t, 1, "capacity") == "2");
  CHECK(cell(t, 2, "capacity") == "4");

  const fs::path wide = tiny_config(dir, R"("sweep_capacity": [2, 4], "sweep_horizon_min": [0, 5], "sweep_wsf": [0.33, 1],
      "sweep_arf": [0.5], "sweep_los": ["strict"], "sweep_traffic": ["light", "congested"])");
  REQUIRE(cli({"sweep", "--config", wide.string(), "--out", (dir / "j1").string(), "--jobs", "1"}).code == 0);
  REQUIRE(cli({"sweep", "--config", wide.string(), "--out", (dir / "j8").string(), "--jobs", "8"}).code == 0);
  ::setenv("ARRP_SIM_JOBS", "3", 1);
  const int env_code = cli({"sweep", "--config", wide.string(), "--out", (dir / "env").string()}).code;
  ::setenv("ARRP_SIM_JOBS", "many", 1);
  const int bad_env = cli({"sweep", "--config", wide.string(), "--out", (dir / "bad").string()}).code;
  ::unsetenv("ARRP_SIM_JOBS");
  CHECK(env_code == kExitOk);
  CHECK(bad_env == kExitInput);
  const std::string one = testkit::read_file(dir / "j1" / "metrics.csv");
  CHECK(read_csv(dir / "j1" / "metrics.csv").size() == 17);
  CHECK(one == testkit::read_file(dir / "j8" / "metrics.csv"));
  CHECK(one == testkit::read_file(dir / "env" / "metrics.csv"));
}

TEST_CASE("a failing cell is recorded and the sweep exits 3") {
  const fs::path dir = testkit::scratch_dir("cli_cell");
  testkit::write_file(dir / "requests.csv",
                      "id,placed_at_s,earliest_pickup_s,origin_node,dest_node,party_size,willing_to_share,advance\n"
                      "1,0,60,0,5,1,1,0\n"
                      "2,0,600,3,9,1,1,1\n");
  const fs::path cfg = tiny_config(dir, fmt::format(R"("requests_csv": "{}", "sweep_capacity": [4],
      "sweep_horizon_min": [0, 15], "sweep_wsf": [1], "sweep_arf": [0], "sweep_los": ["neutral"],
      "sweep_traffic": ["normal"])",
                                                   (dir / "requests.csv").string()));
  const Outcome o = cli({"sweep", "--config", cfg.string(), "--out", dir.string()});
  CHECK(o.code == kExitCellFailed);
  const auto t = read_csv(dir / "metrics.csv");
  REQUIRE(t.size() == 3);
  CHECK(cell(t, 1, "error").empty());
  CHECK(cell(t, 1, "requests_served") == "2");
  CHECK(cell(t, 2, "error").find("lead time") != std::string::npos);
  CHECK(cell(t, 2, "vmr_m").empty());
}

TEST_CASE("report groups match a hand aggregation") {
  const fs::path dir = testkit::scratch_dir("cli_report");
  std::vector<ReportRow> rows;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int n = 0;
  for (double h : {0.0, 900.0})
    for (int cap : {2, 4})
      for (double wsf : {0.0, 1.0})
        for (double arf : {0.0, 0.5})
          for (int rep = 0; rep < 2; ++rep) {
            ReportRow r;
            r.key = {fmt::format("s{}", n++), 100, cap, h, wsf, arf, rep ? "strict" : "neutral", "normal", 1};
            MetricsReport& m = r.report;
            if (!(cap == 2 && h == 900.0 && rep == 1)) {
              m.vmr = 1000 + 500 * u(rng);
              m.vmr_service = *m.vmr * 0.7;
              m.vmr_idle = *m.vmr - *m.vmr_service;
              m.pct_shared = u(rng);
              m.avg_wait = 100 + 100 * u(rng);
              m.avg_delay = 50 * u(rng);
            }
            m.pct_served = u(rng);
            m.active_vehicles = static_cast<int>(50 + 50 * u(rng));
            m.max_occupancy_hist = {0, 3, static_cast<int>(10 * u(rng))};
            m.total_vmt = 1e5 * u(rng);
            rows.push_back(r);
          }
  ReportRow failed = rows.front();
  failed.error = "boom";
  rows.push_back(failed);
  write_metrics_csv(dir / "metrics.csv", rows);
  REQUIRE(cli({"report", "--out", dir.string()}).code == kExitOk);

  // Recompute from the exported CSV itself, as a spreadsheet would.
  const auto src = read_csv(dir / "metrics.csv");
  std::map<std::pair<double, double>, std::pair<double, int>> wait;  // (wsf, arf) -> sum, n
  std::map<std::pair<double, double>, int> scenarios;
  for (std::size_t i = 1; i < src.size(); ++i) {
    if (!cell(src, i, "error").empty()) continue;
    const auto key = std::pair(std::stod(cell(src, i, "wsf")), std::stod(cell(src, i, "arf")));
    ++scenarios[key];
    const std::string w = cell(src, i, "avg_wait_s");
    if (w.empty()) continue;
    wait[key].first += std::stod(w);
    ++wait[key].second;
  }
  const auto rep = read_csv(dir / "report_wsf_arf.csv");
  REQUIRE(rep.size() == 5);
  for (std::size_t i = 1; i < rep.size(); ++i) {
    const auto key = std::pair(std::stod(cell(rep, i, "wsf")), std::stod(cell(rep, i, "arf")));
    CHECK(std::stoi(cell(rep, i, "scenarios")) == scenarios[key]);
    const auto [sum, k] = wait[key];
    CHECK(std::abs(std::stod(cell(rep, i, "mean_avg_wait_s")) - sum / k) <= 5e-7);
  }

  const auto hc = read_csv(dir / "report_horizon_capacity.csv");
  CHECK(hc.size() == 5);
  CHECK(cell(hc, 1, "horizon_s") == "0");
  CHECK(cell(hc, 1, "capacity") == "2");
  CHECK(cell(hc, 4, "horizon_s") == "900");
  const auto fleet = read_csv(dir / "report_fleet_los_horizon.csv");
  CHECK(fleet.size() == 5);
  const auto occ = read_csv(dir / "report_occupancy.csv");
  REQUIRE(occ.size() == 3);
  CHECK(std::stod(cell(occ, 1, "mean_occ_1")) == 3.0);
  CHECK(cell(occ, 1, "mean_occ_10") == "0.000000");
}

TEST_CASE("report on a single row and on rows with nothing served") {
  const fs::path dir = testkit::scratch_dir("cli_report_one");
  ScenarioConfig c;
  MetricsReport empty;
  empty.pct_served = 0.0;
  empty.requests_total = 5;
  const std::vector<ReportRow> rows{{report_key(c), empty, {}}};
  write_metrics_csv(dir / "metrics.csv", rows);
  REQUIRE(cli({"report", "--out", dir.string()}).code == kExitOk);
  const auto t = read_csv(dir / "report_wsf_arf.csv");
  REQUIRE(t.size() == 2);
  CHECK(cell(t, 1, "scenarios") == "1");
  CHECK(cell(t, 1, "mean_vmr_m").empty());
  CHECK(cell(t, 1, "mean_avg_wait_s").empty());
  CHECK(cell(t, 1, "mean_pct_served") == "0.000000");
}

}  // TEST_SUITE
