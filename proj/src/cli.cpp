#include "arrp/cli.hpp"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <omp.h>

#include "arrp/metrics.hpp"
#include "arrp/scenario.hpp"
#include "csv_util.hpp"
#include "io_util.hpp"

namespace arrp {

namespace {

void warn_all(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) fmt::print(stderr, "warning: {}\n", w);
}

ScenarioConfig load_for(const CommandSpec& spec) {
  if (spec.config_path.empty()) throw InputError("--config is required");
  ScenarioConfig c = load_config(spec.config_path);
  if (spec.seed) c.seed = *spec.seed;
  return c;
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (!std::filesystem::is_directory(dir)) throw InputError(fmt::format("cannot create output directory {}", dir.string()));
}

}  // namespace

int cmd_run(const CommandSpec& spec) {
  ScenarioConfig config;
  ScenarioWorld world;
  ScenarioInputs inputs;
  try {
    config = load_for(spec);
    config.threads = spec.jobs;
    ensure_dir(spec.output_dir);
    world = ScenarioWorld::build(config);
    world.prepare(config.traffic_tier, spec.jobs);
    inputs = prepare_inputs(config, world, world.matrix(config.traffic_tier));
    warn_all(inputs.warnings);
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitInput;
  }
  try {
    RunResult result = run_scenario(config, world, inputs);
    std::vector<ReportRow> rows{{report_key(config), result.report, {}}};
    write_metrics_csv(spec.output_dir / "metrics.csv", rows);
    if (spec.trace) write_ndjson_file(spec.output_dir / "trace.ndjson", result.trace, result.requests);
    fmt::print(stderr, "served {}/{} requests, {:.0f} m driven\n", result.report.requests_served,
               result.report.requests_total, result.report.total_vmt);
  } catch (const InvariantViolation& e) {
    fmt::print(stderr, "invariant violation: {}\n", e.what());
    return kExitInvariant;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitInput;
  }
  return kExitOk;
}

int cmd_sweep(const CommandSpec& spec) {
  ScenarioConfig base;
  ScenarioWorld world;
  ScenarioInputs inputs;
  std::vector<SweepCell> cells;
  try {
    base = load_for(spec);
    base.threads = 1;
    ensure_dir(spec.output_dir);
    cells = sweep_grid(base);
    world = ScenarioWorld::build(base);
    std::set<TrafficTier> tiers;
    for (const SweepCell& c : cells) tiers.insert(c.config.traffic_tier);
    for (TrafficTier t : tiers) world.prepare(t, spec.jobs);
    inputs = prepare_inputs(base, world, world.matrix(*tiers.begin()));
    warn_all(inputs.warnings);
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitInput;
  }

  std::vector<ReportRow> rows(cells.size());
  std::atomic<std::size_t> done{0};
  const auto n = static_cast<std::ptrdiff_t>(cells.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(spec.jobs)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const SweepCell& cell = cells[static_cast<std::size_t>(i)];
    ReportRow& row = rows[static_cast<std::size_t>(i)];
    row.key = report_key(cell.config);
    try {
      row.report = run_scenario(cell.config, world, inputs).report;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    const std::size_t k = ++done;
#pragma omp critical(progress)
    fmt::print(stderr, "[{}/{}] {}{}\n", k, cells.size(), cell.config.scenario_id, row.error.empty() ? "" : " FAILED");
  }

  try {
    write_metrics_csv(spec.output_dir / "metrics.csv", rows);
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitInput;
  }
  const bool failed = std::any_of(rows.begin(), rows.end(), [](const ReportRow& r) { return !r.error.empty(); });
  return failed ? kExitCellFailed : kExitOk;
}

int cmd_validate(const CommandSpec& spec) {
  try {
    ScenarioConfig config = load_for(spec);
    ScenarioWorld world = ScenarioWorld::build(config);
    world.prepare(config.traffic_tier, spec.jobs);
    ScenarioInputs inputs = prepare_inputs(config, world, world.matrix(config.traffic_tier));
    warn_all(inputs.warnings);
    const std::size_t requests = inputs.from_file ? inputs.loaded.size() : inputs.draws.size();
    fmt::print("config ok: {} nodes, {} links, {} zones, {} requests, {} vehicles, {} sweep cells\n",
               world.graph().node_count(), world.graph().links().size(), world.zones().zone_count(), requests,
               inputs.fleet_nodes.size(), sweep_grid(config).size());
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitInput;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// report

namespace {

std::vector<std::string> split_quoted(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else if (c != '\r') {
      out.back() += c;
    }
  }
  return out;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw InputError(fmt::format("metrics.csv lacks column '{}'", name));
  }
};

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open {}", path.string()));
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw InputError(fmt::format("{} is empty", path.string()));
  t.header = split_quoted(line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto row = split_quoted(line);
    if (row.size() != t.header.size())
      throw InputError(fmt::format("{}:{}: expected {} fields, found {}", path.string(), line_no, t.header.size(),
                                   row.size()));
    t.rows.push_back(std::move(row));
  }
  return t;
}

struct Mean {
  double sum = 0.0;
  long long n = 0;
  void add(const std::string& field) {
    double v = 0.0;
    if (csv::parse(std::string_view(field), v)) {
      sum += v;
      ++n;
    }
  }
  std::string str() const { return n ? fmt::format("{:.6f}", sum / static_cast<double>(n)) : std::string(); }
};

// Mean of each metric per distinct `keys` tuple. Failed rows are skipped;
// groups are ordered by key, numerically where the key parses as a number.
void grouped_means(const Table& t, const std::vector<std::string>& keys, const std::vector<std::string>& metrics,
                   const std::filesystem::path& out_path) {
  std::vector<std::size_t> kc, mc;
  for (const auto& k : keys) kc.push_back(t.column(k));
  for (const auto& m : metrics) mc.push_back(t.column(m));
  const std::size_t err = t.column("error");

  auto key_less = [](const std::vector<std::string>& a, const std::vector<std::string>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      double x = 0.0, y = 0.0;
      const bool nx = csv::parse(std::string_view(a[i]), x), ny = csv::parse(std::string_view(b[i]), y);
      if (nx && ny && x != y) return x < y;
      if (!(nx && ny) && a[i] != b[i]) return a[i] < b[i];
    }
    return false;
  };
  std::map<std::vector<std::string>, std::pair<long long, std::vector<Mean>>, decltype(key_less)> groups(key_less);
  for (const auto& row : t.rows) {
    if (!row[err].empty()) continue;
    std::vector<std::string> key;
    for (std::size_t c : kc) key.push_back(row[c]);
    auto& g = groups[key];
    if (g.second.empty()) g.second.resize(mc.size());
    ++g.first;
    for (std::size_t i = 0; i < mc.size(); ++i) g.second[i].add(row[mc[i]]);
  }

  io::write_atomically(out_path, [&](std::ostream& out) {
    std::string header;
    for (const auto& k : keys) header += k + ",";
    header += "scenarios";
    for (const auto& m : metrics) header += ",mean_" + m;
    out << header << '\n';
    for (const auto& [key, g] : groups) {
      std::string line;
      for (const auto& k : key) line += k + ",";
      line += std::to_string(g.first);
      for (const Mean& m : g.second) line += "," + m.str();
      out << line << '\n';
    }
  });
}

}  // namespace

int cmd_report(const CommandSpec& spec) {
  try {
    const Table t = read_table(spec.output_dir / "metrics.csv");
    const std::vector<std::string> metrics{"vmr_m",      "vmr_service_m", "vmr_idle_m",      "pct_shared",
                                           "pct_served", "avg_wait_s",    "avg_delay_s",     "active_vehicles",
                                           "total_vmt_m"};
    grouped_means(t, {"wsf", "arf"}, metrics, spec.output_dir / "report_wsf_arf.csv");
    grouped_means(t, {"horizon_s", "capacity"}, metrics, spec.output_dir / "report_horizon_capacity.csv");
    grouped_means(t, {"los_tier", "horizon_s"}, {"fleet_size", "active_vehicles", "pct_served"},
                  spec.output_dir / "report_fleet_los_horizon.csv");
    std::vector<std::string> occ;
    for (const auto& h : t.header)
      if (h.rfind("occ_", 0) == 0) occ.push_back(h);
    grouped_means(t, {"capacity"}, occ, spec.output_dir / "report_occupancy.csv");
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitInput;
  }
  return kExitOk;
}

int cli_main(int argc, char** argv) {
  CLI::App app{"Ride-pooling fleet simulator with advance requests"};
  app.require_subcommand(1);
  CommandSpec spec;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", spec.config_path, "scenario config (JSON)");
    if (needs_config) opt->required();
    sub->add_option("--out", spec.output_dir, "output directory");
    sub->add_option("--jobs", jobs, "worker count")->check(CLI::PositiveNumber);
    sub->add_flag("--trace", spec.trace, "write trace.ndjson");
    sub->add_option("--seed", seed, "seed override");
  };
  auto* run = app.add_subcommand("run", "run one scenario");
  auto* sweep = app.add_subcommand("sweep", "run the full-factorial sweep");
  auto* validate_cmd = app.add_subcommand("validate", "check a config and its inputs");
  auto* report = app.add_subcommand("report", "aggregate metrics.csv into grouped summaries");
  add_common(run, true);
  add_common(sweep, true);
  add_common(validate_cmd, true);
  add_common(report, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInput;
  }

  if (jobs) {
    spec.jobs = *jobs;
  } else if (const char* env = std::getenv("ARRP_SIM_JOBS"); env && *env) {
    int v = 0;
    if (!csv::parse(std::string_view(env), v) || v < 1) {
      fmt::print(stderr, "error: ARRP_SIM_JOBS must be a positive integer\n");
      return kExitInput;
    }
    spec.jobs = v;
  }
  spec.seed = seed;

  if (run->parsed()) return cmd_run(spec);
  if (sweep->parsed()) return cmd_sweep(spec);
  if (validate_cmd->parsed()) return cmd_validate(spec);
  return cmd_report(spec);
}

}  // namespace arrp
