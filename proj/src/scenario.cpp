#include "arrp/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "csv_util.hpp"

namespace arrp {

using nlohmann::json;

LosBounds los_bounds(LosTier tier) {
  switch (tier) {
    case LosTier::strict: return {300.0, 600.0};
    case LosTier::neutral: return {420.0, 900.0};
    case LosTier::flexible: return {600.0, 1200.0};
  }
  return {};
}

LosTier parse_los_tier(std::string_view name) {
  if (name == "strict") return LosTier::strict;
  if (name == "neutral") return LosTier::neutral;
  if (name == "flexible") return LosTier::flexible;
  throw InputError(fmt::format("unknown LOS tier '{}'", name));
}

std::string_view to_string(LosTier tier) {
  switch (tier) {
    case LosTier::strict: return "strict";
    case LosTier::neutral: return "neutral";
    case LosTier::flexible: return "flexible";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Config

namespace {

template <typename T>
T get_as(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw InputError(fmt::format("config key '{}' has the wrong type", key));
  }
}

using Setter = std::function<void(ScenarioConfig&, const json&, const std::string&)>;

template <typename T>
Setter field(T ScenarioConfig::*member) {
  return [member](ScenarioConfig& c, const json& v, const std::string& key) { c.*member = get_as<T>(v, key); };
}

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = [] {
    std::map<std::string, Setter, std::less<>> t;
    t["scenario_id"] = field(&ScenarioConfig::scenario_id);
    t["fleet_size"] = field(&ScenarioConfig::fleet_size);
    t["capacity"] = field(&ScenarioConfig::capacity);
    t["horizon_s"] = field(&ScenarioConfig::horizon_s);
    t["horizon_min"] = [](ScenarioConfig& c, const json& v, const std::string& k) {
      c.horizon_s = get_as<double>(v, k) * 60.0;
    };
    t["wsf"] = field(&ScenarioConfig::wsf);
    t["arf"] = field(&ScenarioConfig::arf);
    t["los_tier"] = [](ScenarioConfig& c, const json& v, const std::string& k) {
      c.los_tier = parse_los_tier(get_as<std::string>(v, k));
    };
    t["traffic_tier"] = [](ScenarioConfig& c, const json& v, const std::string& k) {
      c.traffic_tier = parse_traffic_tier(get_as<std::string>(v, k));
    };
    t["delta_t_s"] = field(&ScenarioConfig::delta_t_s);
    t["epsilon_m"] = field(&ScenarioConfig::epsilon_m);
    t["psi_s"] = field(&ScenarioConfig::psi_s);
    t["phi_m"] = field(&ScenarioConfig::phi_m);
    t["lookahead_s"] = field(&ScenarioConfig::lookahead_s);
    t["w_m_s"] = field(&ScenarioConfig::w_m_s);
    t["seed"] = field(&ScenarioConfig::seed);
    t["rebalance_strategy"] = [](ScenarioConfig& c, const json& v, const std::string& k) {
      c.rebalance_strategy = parse_rebalance_strategy(get_as<std::string>(v, k));
    };
    t["rebalance"] = field(&ScenarioConfig::rebalance);
    t["duration_s"] = field(&ScenarioConfig::duration_s);
    t["max_drain_s"] = field(&ScenarioConfig::max_drain_s);
    t["grid_cols"] = field(&ScenarioConfig::grid_cols);
    t["grid_rows"] = field(&ScenarioConfig::grid_rows);
    t["zone_size_m"] = field(&ScenarioConfig::zone_size_m);
    t["node_spacing_m"] = field(&ScenarioConfig::node_spacing_m);
    t["speed_mps"] = field(&ScenarioConfig::speed_mps);
    t["requests_per_hour"] = field(&ScenarioConfig::requests_per_hour);
    t["origin_sigma_m"] = field(&ScenarioConfig::origin_sigma_m);
    t["dest_sigma_m"] = field(&ScenarioConfig::dest_sigma_m);
    t["rate_interval_s"] = field(&ScenarioConfig::rate_interval_s);
    t["nodes_csv"] = field(&ScenarioConfig::nodes_csv);
    t["links_csv"] = field(&ScenarioConfig::links_csv);
    t["links_undirected"] = field(&ScenarioConfig::links_undirected);
    t["requests_csv"] = field(&ScenarioConfig::requests_csv);
    t["rates_csv"] = field(&ScenarioConfig::rates_csv);
    t["threads"] = field(&ScenarioConfig::threads);
    t["sweep_capacity"] = field(&ScenarioConfig::sweep_capacity);
    t["sweep_horizon_min"] = field(&ScenarioConfig::sweep_horizon_min);
    t["sweep_wsf"] = field(&ScenarioConfig::sweep_wsf);
    t["sweep_arf"] = field(&ScenarioConfig::sweep_arf);
    t["sweep_los"] = [](ScenarioConfig& c, const json& v, const std::string& k) {
      c.sweep_los.clear();
      for (const auto& s : get_as<std::vector<std::string>>(v, k)) c.sweep_los.push_back(parse_los_tier(s));
    };
    t["sweep_traffic"] = [](ScenarioConfig& c, const json& v, const std::string& k) {
      c.sweep_traffic.clear();
      for (const auto& s : get_as<std::vector<std::string>>(v, k)) c.sweep_traffic.push_back(parse_traffic_tier(s));
    };
    return t;
  }();
  return table;
}

}  // namespace

ScenarioConfig parse_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw InputError(fmt::format("config is not valid JSON: {}", e.what()));
  }
  if (!doc.is_object()) throw InputError("config must be a JSON object");
  ScenarioConfig c;
  for (const auto& [key, value] : doc.items()) {
    auto it = setters().find(key);
    if (it == setters().end()) throw InputError(fmt::format("unknown config key '{}'", key));
    it->second(c, value, key);
  }
  validate(c);
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open config {}", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const ScenarioConfig& c) {
  json j;
  j["scenario_id"] = c.scenario_id;
  j["fleet_size"] = c.fleet_size;
  j["capacity"] = c.capacity;
  j["horizon_s"] = c.horizon_s;
  j["wsf"] = c.wsf;
  j["arf"] = c.arf;
  j["los_tier"] = to_string(c.los_tier);
  j["traffic_tier"] = to_string(c.traffic_tier);
  j["delta_t_s"] = c.delta_t_s;
  j["epsilon_m"] = c.epsilon_m;
  j["psi_s"] = c.psi_s;
  j["phi_m"] = c.phi_m;
  j["lookahead_s"] = c.lookahead_s;
  j["w_m_s"] = c.w_m_s;
  j["seed"] = c.seed;
  j["rebalance_strategy"] = to_string(c.rebalance_strategy);
  j["rebalance"] = c.rebalance;
  j["duration_s"] = c.duration_s;
  j["max_drain_s"] = c.max_drain_s;
  j["grid_cols"] = c.grid_cols;
  j["grid_rows"] = c.grid_rows;
  j["zone_size_m"] = c.zone_size_m;
  j["node_spacing_m"] = c.node_spacing_m;
  j["speed_mps"] = c.speed_mps;
  j["requests_per_hour"] = c.requests_per_hour;
  j["origin_sigma_m"] = c.origin_sigma_m;
  j["dest_sigma_m"] = c.dest_sigma_m;
  j["rate_interval_s"] = c.rate_interval_s;
  j["nodes_csv"] = c.nodes_csv;
  j["links_csv"] = c.links_csv;
  j["links_undirected"] = c.links_undirected;
  j["requests_csv"] = c.requests_csv;
  j["rates_csv"] = c.rates_csv;
  j["threads"] = c.threads;
  j["sweep_capacity"] = c.sweep_capacity;
  j["sweep_horizon_min"] = c.sweep_horizon_min;
  j["sweep_wsf"] = c.sweep_wsf;
  j["sweep_arf"] = c.sweep_arf;
  j["sweep_los"] = json::array();
  for (LosTier t : c.sweep_los) j["sweep_los"].push_back(to_string(t));
  j["sweep_traffic"] = json::array();
  for (TrafficTier t : c.sweep_traffic) j["sweep_traffic"].push_back(to_string(t));
  return j.dump(2);
}

void validate(const ScenarioConfig& c) {
  auto require = [](bool ok, std::string_view key, std::string_view what) {
    if (!ok) throw InputError(fmt::format("config key '{}' {}", key, what));
  };
  auto fraction = [](double f) { return f >= 0.0 && f <= 1.0; };
  require(c.fleet_size > 0, "fleet_size", "must be positive");
  require(c.capacity > 0, "capacity", "must be positive");
  require(c.horizon_s >= 0.0, "horizon_s", "must be non-negative");
  require(fraction(c.wsf), "wsf", "must be in [0, 1]");
  require(fraction(c.arf), "arf", "must be in [0, 1]");
  require(c.delta_t_s > 0.0, "delta_t_s", "must be positive");
  require(c.epsilon_m >= 0.0, "epsilon_m", "must be non-negative");
  require(c.psi_s >= 0.0, "psi_s", "must be non-negative");
  require(c.phi_m > 0.0, "phi_m", "must be positive");
  require(c.lookahead_s > 0.0, "lookahead_s", "must be positive");
  require(c.w_m_s >= 0.0, "w_m_s", "must be non-negative");
  require(c.duration_s > 0.0, "duration_s", "must be positive");
  require(c.max_drain_s >= 0.0, "max_drain_s", "must be non-negative");
  require(c.grid_cols > 0, "grid_cols", "must be positive");
  require(c.grid_rows > 0, "grid_rows", "must be positive");
  require(c.zone_size_m > 0.0, "zone_size_m", "must be positive");
  require(c.node_spacing_m > 0.0, "node_spacing_m", "must be positive");
  require(c.speed_mps > 0.0, "speed_mps", "must be positive");
  require(c.requests_per_hour >= 0.0, "requests_per_hour", "must be non-negative");
  require(c.origin_sigma_m >= 0.0, "origin_sigma_m", "must be non-negative");
  require(c.dest_sigma_m >= 0.0, "dest_sigma_m", "must be non-negative");
  require(c.rate_interval_s > 0.0, "rate_interval_s", "must be positive");
  require(c.nodes_csv.empty() == c.links_csv.empty(), "links_csv", "and nodes_csv must be given together");
  require(c.threads >= 1, "threads", "must be at least 1");
  for (int cap : c.sweep_capacity) require(cap > 0, "sweep_capacity", "entries must be positive");
  for (double h : c.sweep_horizon_min) require(h >= 0.0, "sweep_horizon_min", "entries must be non-negative");
  for (double f : c.sweep_wsf) require(fraction(f), "sweep_wsf", "entries must be in [0, 1]");
  for (double f : c.sweep_arf) require(fraction(f), "sweep_arf", "entries must be in [0, 1]");
}

ReportKey report_key(const ScenarioConfig& c) {
  return {c.scenario_id, c.fleet_size, c.capacity, c.horizon_s, c.wsf, c.arf, std::string(to_string(c.los_tier)),
          std::string(to_string(c.traffic_tier)), c.seed};
}

// ---------------------------------------------------------------------------
// World

namespace {

Point zone_centre(const ZoneCell& cell) {
  return {(cell.bounds.min_x + cell.bounds.max_x) / 2.0, (cell.bounds.min_y + cell.bounds.max_y) / 2.0};
}

Point partition_centre(const ZonePartition& zones) {
  BoundingBox box = zones.zone(0).bounds;
  for (const ZoneCell& c : zones.zones()) {
    box.min_x = std::min(box.min_x, c.bounds.min_x);
    box.min_y = std::min(box.min_y, c.bounds.min_y);
    box.max_x = std::max(box.max_x, c.bounds.max_x);
    box.max_y = std::max(box.max_y, c.bounds.max_y);
  }
  return {(box.min_x + box.max_x) / 2.0, (box.min_y + box.max_y) / 2.0};
}

struct RawRequest {
  std::int64_t id = 0;
  double placed_at = 0.0;
  double earliest = 0.0;
  NodeId origin = kNoNode;
  NodeId destination = kNoNode;
  int party = 1;
  bool share = true;
  bool advance = false;
};

std::vector<RawRequest> read_request_rows(const std::filesystem::path& path, const RoadGraph& graph) {
  std::vector<RawRequest> rows;
  const auto n = static_cast<long long>(graph.node_count());
  csv::for_each_row(path, [&](const std::vector<std::string_view>& f, std::size_t line) {
    auto bad = [&](std::string_view what) {
      return InputError(fmt::format("{}:{}: {}", path.string(), line, what));
    };
    if (f.size() != 8 && f.size() != 10) throw bad("expected 8 or 10 fields");
    RawRequest r;
    if (!csv::parse(f[0], r.id)) throw bad("bad id");
    if (!csv::parse(f[1], r.placed_at) || !csv::parse(f[2], r.earliest)) throw bad("bad time");
    if (!(r.earliest >= r.placed_at)) throw bad("earliest_pickup_s before placed_at_s");
    std::size_t k = 3;
    if (f.size() == 8) {
      long long o = 0, d = 0;
      if (!csv::parse(f[3], o) || !csv::parse(f[4], d)) throw bad("bad node id");
      if (o < 0 || o >= n || d < 0 || d >= n) throw bad("node id outside the graph");
      r.origin = static_cast<NodeId>(o);
      r.destination = static_cast<NodeId>(d);
      k = 5;
    } else {
      Point o, d;
      if (!csv::parse(f[3], o.x) || !csv::parse(f[4], o.y) || !csv::parse(f[5], d.x) || !csv::parse(f[6], d.y))
        throw bad("bad coordinate");
      r.origin = nearest_node(graph, o);
      r.destination = nearest_node(graph, d);
      k = 7;
    }
    int share = 0, advance = 0;
    if (!csv::parse(f[k], r.party) || r.party < 1) throw bad("party_size must be a positive integer");
    if (!csv::parse(f[k + 1], share) || (share != 0 && share != 1)) throw bad("willing_to_share must be 0 or 1");
    if (!csv::parse(f[k + 2], advance) || (advance != 0 && advance != 1)) throw bad("advance must be 0 or 1");
    r.share = share == 1;
    r.advance = advance == 1;
    rows.push_back(r);
  });
  return rows;
}

// Nearest zone that has nodes, by centre distance (ties: lower id).
std::vector<ZoneId> nonempty_redirect(const ZonePartition& zones) {
  const std::size_t nz = zones.zone_count();
  std::vector<ZoneId> to(nz, kNoZone);
  for (std::size_t z = 0; z < nz; ++z) {
    if (!zones.nodes_in(static_cast<ZoneId>(z)).empty()) {
      to[z] = static_cast<ZoneId>(z);
      continue;
    }
    const Point c = zone_centre(zones.zone(static_cast<ZoneId>(z)));
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t w = 0; w < nz; ++w) {
      if (zones.nodes_in(static_cast<ZoneId>(w)).empty()) continue;
      const Point p = zone_centre(zones.zone(static_cast<ZoneId>(w)));
      const double d = std::hypot(p.x - c.x, p.y - c.y);
      if (d < best) {
        best = d;
        to[z] = static_cast<ZoneId>(w);
      }
    }
  }
  return to;
}

}  // namespace

std::vector<double> gaussian_zone_weights(const ZonePartition& zones, double sigma_m) {
  std::vector<double> w(zones.zone_count(), 1.0);
  if (sigma_m <= 0.0 || zones.zone_count() == 0) return w;
  const Point centre = partition_centre(zones);
  for (const ZoneCell& c : zones.zones()) {
    const Point p = zone_centre(c);
    const double d2 = (p.x - centre.x) * (p.x - centre.x) + (p.y - centre.y) * (p.y - centre.y);
    w[static_cast<std::size_t>(c.id)] = std::exp(-d2 / (2.0 * sigma_m * sigma_m));
  }
  return w;
}

DemandRates synthetic_rates(const ZonePartition& zones, const ScenarioConfig& config) {
  const auto intervals = static_cast<std::size_t>(std::ceil(config.duration_s / config.rate_interval_s));
  DemandRates rates(zones.zone_count(), intervals, config.rate_interval_s);
  std::vector<double> w = gaussian_zone_weights(zones, config.origin_sigma_m);
  for (std::size_t z = 0; z < w.size(); ++z)
    if (zones.nodes_in(static_cast<ZoneId>(z)).empty()) w[z] = 0.0;
  double total = 0.0;
  for (double x : w) total += x;
  if (total <= 0.0) return rates;
  const double per_interval = config.requests_per_hour * config.rate_interval_s / 3600.0;
  for (std::size_t z = 0; z < w.size(); ++z)
    for (std::size_t k = 0; k < intervals; ++k) rates.set_rate(static_cast<ZoneId>(z), k, per_interval * w[z] / total);
  return rates;
}

ScenarioWorld ScenarioWorld::build(const ScenarioConfig& config) {
  validate(config);
  ScenarioWorld w;
  if (!config.nodes_csv.empty()) {
    w.graph_ = load_graph_csv(config.nodes_csv, config.links_csv, config.links_undirected);
    w.zones_ = std::make_unique<ZonePartition>(ZonePartition::covering(w.graph_, config.zone_size_m));
  } else {
    const double width = config.grid_cols * config.zone_size_m;
    const double height = config.grid_rows * config.zone_size_m;
    const int nx = std::max(1, static_cast<int>(std::lround(width / config.node_spacing_m)));
    const int ny = std::max(1, static_cast<int>(std::lround(height / config.node_spacing_m)));
    // Offsetting by half a spacing keeps every node off the cell boundaries.
    const double half = config.node_spacing_m / 2.0;
    w.graph_ = make_lattice(nx, ny, config.node_spacing_m, config.speed_mps, {half, half});
    w.zones_ = std::make_unique<ZonePartition>(
        ZonePartition::grid(w.graph_, config.zone_size_m, config.grid_cols, config.grid_rows, {0.0, 0.0}));
  }

  if (!config.rates_csv.empty()) {
    w.rates_ = load_rates_csv(config.rates_csv, *w.zones_, config.rate_interval_s);
  } else if (!config.requests_csv.empty()) {
    // Empirical rates from the request file itself.
    const auto rows = read_request_rows(config.requests_csv, w.graph_);
    double last = 0.0;
    for (const RawRequest& r : rows) last = std::max(last, r.earliest);
    const auto intervals = static_cast<std::size_t>(std::floor(last / config.rate_interval_s)) + 1;
    w.rates_ = DemandRates(w.zones_->zone_count(), intervals, config.rate_interval_s);
    for (const RawRequest& r : rows) {
      if (r.earliest < 0.0) continue;
      const ZoneId z = w.zones_->zone_of(r.origin);
      const auto k = static_cast<std::size_t>(std::floor(r.earliest / config.rate_interval_s));
      w.rates_.set_rate(z, k, w.rates_.rate(z, k) + 1.0);
    }
  } else {
    w.rates_ = synthetic_rates(*w.zones_, config);
  }
  w.attraction_ = gaussian_zone_weights(*w.zones_, config.dest_sigma_m);
  return w;
}

void ScenarioWorld::prepare(TrafficTier tier, int threads) {
  if (tiers_.count(tier)) return;
  if (!free_flow_) free_flow_ = std::make_unique<TravelMatrix>(all_pairs_shortest(graph_, threads));
  tiers_[tier] = std::make_unique<TravelMatrix>(scale_travel_times(*free_flow_, tier));
  bool all = tiers_.size() == 3;
  if (all) free_flow_.reset();
}

const TravelMatrix& ScenarioWorld::matrix(TrafficTier tier) const {
  auto it = tiers_.find(tier);
  if (it == tiers_.end()) throw std::logic_error(fmt::format("travel matrix for {} traffic not prepared", to_string(tier)));
  return *it->second;
}

// ---------------------------------------------------------------------------
// Demand

std::vector<DemandDraw> draw_demand(const DemandRates& rates, const ZonePartition& zones,
                                    std::span<const double> attraction, const TravelMatrix& matrix,
                                    double duration_s, std::mt19937_64& rng, std::vector<std::string>* warnings) {
  const std::size_t nz = zones.zone_count();
  const std::vector<ZoneId> redirect = nonempty_redirect(zones);

  // Fold every interval's rate onto zones that actually have nodes.
  std::vector<double> lambda(nz * rates.interval_count(), 0.0);
  for (std::size_t z = 0; z < nz && z < rates.zone_count(); ++z) {
    for (std::size_t k = 0; k < rates.interval_count(); ++k) {
      const double r = rates.rate(static_cast<ZoneId>(z), k);
      if (r <= 0.0) continue;
      const ZoneId to = redirect[z];
      if (to == kNoZone) continue;
      if (to != static_cast<ZoneId>(z) && warnings)
        warnings->push_back(fmt::format("zone {} has no nodes; its demand moves to zone {}", z, to));
      lambda[static_cast<std::size_t>(to) * rates.interval_count() + k] += r;
    }
  }

  std::vector<double> weights(nz, 0.0);
  for (std::size_t z = 0; z < nz; ++z)
    if (!zones.nodes_in(static_cast<ZoneId>(z)).empty()) weights[z] = z < attraction.size() ? attraction[z] : 1.0;
  if (std::all_of(weights.begin(), weights.end(), [](double w) { return w <= 0.0; })) return {};
  std::discrete_distribution<std::size_t> dest_zone(weights.begin(), weights.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto pick_node = [&](ZoneId z) {
    const auto nodes = zones.nodes_in(z);
    std::uniform_int_distribution<std::size_t> pick(0, nodes.size() - 1);
    return nodes[pick(rng)];
  };

  std::vector<DemandDraw> out;
  std::size_t dropped = 0;
  const double len = rates.interval_length();
  for (std::size_t k = 0; k < rates.interval_count(); ++k) {
    for (std::size_t z = 0; z < nz; ++z) {
      const double mean = lambda[z * rates.interval_count() + k];
      if (mean <= 0.0) continue;
      std::poisson_distribution<int> count(mean);
      const int c = count(rng);
      for (int i = 0; i < c; ++i) {
        DemandDraw d;
        d.earliest = (static_cast<double>(k) + unit(rng)) * len;
        d.origin = pick_node(static_cast<ZoneId>(z));
        for (int attempt = 0; attempt < 20; ++attempt) {
          const NodeId dest = pick_node(static_cast<ZoneId>(dest_zone(rng)));
          if (dest != d.origin && matrix.reachable(d.origin, dest)) {
            d.destination = dest;
            break;
          }
        }
        d.u_share = unit(rng);
        d.u_advance = unit(rng);
        if (d.destination == kNoNode || d.earliest >= duration_s) {
          dropped += d.destination == kNoNode;
          continue;
        }
        out.push_back(d);
      }
    }
  }
  if (dropped > 0 && warnings)
    warnings->push_back(fmt::format("{} synthetic requests had no reachable destination and were dropped", dropped));
  std::stable_sort(out.begin(), out.end(), [](const DemandDraw& a, const DemandDraw& b) { return a.earliest < b.earliest; });
  return out;
}

std::vector<Request> materialize_demand(std::span<const DemandDraw> draws, const ScenarioConfig& config,
                                        const TravelMatrix& matrix) {
  const LosBounds los = los_bounds(config.los_tier);
  std::vector<Request> out;
  out.reserve(draws.size());
  for (std::size_t i = 0; i < draws.size(); ++i) {
    const DemandDraw& d = draws[i];
    Request r;
    r.id = static_cast<std::int64_t>(i) + 1;
    r.origin = d.origin;
    r.destination = d.destination;
    r.willing_to_share = d.u_share < config.wsf;
    r.advance = d.u_advance < config.arf;
    r.earliest_pickup = d.earliest;
    r.placed_at = r.advance ? d.earliest - config.horizon_s : d.earliest;
    r.latest_pickup = d.earliest + los.max_wait_s;
    r.max_delay = los.max_delay_s;
    r.direct_time = matrix.time(d.origin, d.destination);
    r.direct_dist = matrix.distance(d.origin, d.destination);
    out.push_back(r);
  }
  return out;
}

std::vector<Request> synthesize_demand(const DemandRates& rates, const ZonePartition& zones,
                                       std::span<const double> attraction, const TravelMatrix& matrix,
                                       const ScenarioConfig& config, std::uint64_t seed,
                                       std::vector<std::string>* warnings) {
  std::mt19937_64 rng(seed);
  const auto draws = draw_demand(rates, zones, attraction, matrix, config.duration_s, rng, warnings);
  return materialize_demand(draws, config, matrix);
}

void apply_service_levels(std::vector<Request>& requests, const ScenarioConfig& config, const TravelMatrix& matrix) {
  const LosBounds los = los_bounds(config.los_tier);
  for (Request& r : requests) {
    if (r.advance && r.earliest_pickup - r.placed_at < config.horizon_s)
      throw InputError(fmt::format("request {}: advance lead time {:g} s is shorter than the horizon {:g} s", r.id,
                                   r.earliest_pickup - r.placed_at, config.horizon_s));
    r.latest_pickup = r.earliest_pickup + los.max_wait_s;
    r.max_delay = los.max_delay_s;
    r.direct_time = matrix.time(r.origin, r.destination);
    r.direct_dist = matrix.distance(r.origin, r.destination);
  }
}

std::vector<Request> load_requests(const std::filesystem::path& path, const RoadGraph& graph,
                                   const ScenarioConfig& config, const TravelMatrix& matrix,
                                   std::vector<std::string>* warnings) {
  std::vector<Request> out;
  for (const RawRequest& raw : read_request_rows(path, graph)) {
    if (!matrix.reachable(raw.origin, raw.destination)) {
      if (warnings)
        warnings->push_back(fmt::format("request {}: destination unreachable from origin; dropped", raw.id));
      continue;
    }
    Request r;
    r.id = raw.id;
    r.placed_at = raw.placed_at;
    r.earliest_pickup = raw.earliest;
    r.origin = raw.origin;
    r.destination = raw.destination;
    r.party_size = raw.party;
    r.willing_to_share = raw.share;
    r.advance = raw.advance;
    out.push_back(r);
  }
  apply_service_levels(out, config, matrix);
  std::stable_sort(out.begin(), out.end(), [](const Request& a, const Request& b) {
    return a.earliest_pickup != b.earliest_pickup ? a.earliest_pickup < b.earliest_pickup : a.id < b.id;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Fleet

std::vector<NodeId> draw_fleet_nodes(int fleet_size, const DemandRates& rates, const ZonePartition& zones,
                                     std::mt19937_64& rng) {
  if (fleet_size <= 0) throw InputError("fleet_size must be positive");
  const std::size_t nz = zones.zone_count();
  std::vector<double> w(nz, 0.0);
  for (std::size_t z = 0; z < nz; ++z)
    if (!zones.nodes_in(static_cast<ZoneId>(z)).empty() && z < rates.zone_count())
      w[z] = rates.zone_total(static_cast<ZoneId>(z));
  if (std::all_of(w.begin(), w.end(), [](double x) { return x <= 0.0; }))
    for (std::size_t z = 0; z < nz; ++z) w[z] = zones.nodes_in(static_cast<ZoneId>(z)).empty() ? 0.0 : 1.0;
  std::discrete_distribution<std::size_t> zone(w.begin(), w.end());
  std::vector<NodeId> out;
  out.reserve(static_cast<std::size_t>(fleet_size));
  for (int i = 0; i < fleet_size; ++i) {
    const auto nodes = zones.nodes_in(static_cast<ZoneId>(zone(rng)));
    std::uniform_int_distribution<std::size_t> pick(0, nodes.size() - 1);
    out.push_back(nodes[pick(rng)]);
  }
  return out;
}

std::vector<Vehicle> make_fleet(std::span<const NodeId> nodes, const ScenarioConfig& config) {
  std::vector<Vehicle> fleet;
  fleet.reserve(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    Vehicle v;
    v.id = static_cast<VehicleId>(i);
    v.capacity = config.capacity;
    v.max_wait = config.w_m_s;
    v.node = nodes[i];
    v.anchor_time = 0.0;
    v.idle_since = 0.0;
    fleet.push_back(std::move(v));
  }
  return fleet;
}

std::vector<Vehicle> init_fleet(const ScenarioConfig& config, const DemandRates& rates, const ZonePartition& zones,
                                std::mt19937_64& rng) {
  return make_fleet(draw_fleet_nodes(config.fleet_size, rates, zones, rng), config);
}

// ---------------------------------------------------------------------------
// Runs

ScenarioInputs prepare_inputs(const ScenarioConfig& config, const ScenarioWorld& world, const TravelMatrix& matrix) {
  ScenarioInputs in;
  std::mt19937_64 rng(config.seed);
  if (!config.requests_csv.empty()) {
    in.from_file = true;
    in.loaded = load_requests(config.requests_csv, world.graph(), config, matrix, &in.warnings);
  } else {
    in.draws =
        draw_demand(world.rates(), world.zones(), world.attraction(), matrix, config.duration_s, rng, &in.warnings);
  }
  in.fleet_nodes = draw_fleet_nodes(config.fleet_size, world.rates(), world.zones(), rng);
  return in;
}

SimulationOptions simulation_options(const ScenarioConfig& c) {
  SimulationOptions o;
  o.epochs.delta_t = c.delta_t_s;
  o.epochs.horizon = c.horizon_s;
  o.epochs.start = 0.0;
  o.epochs.end = c.duration_s;
  o.assignment.epsilon_m = c.epsilon_m;
  o.assignment.threads = c.threads;
  o.rebalancing.strategy = c.rebalance_strategy;
  o.rebalancing.psi_s = c.psi_s;
  o.rebalancing.phi_m = c.phi_m;
  o.rebalancing.lookahead_s = c.lookahead_s;
  o.rebalance = c.rebalance;
  o.max_drain_s = c.max_drain_s;
  return o;
}

RunResult run_scenario(const ScenarioConfig& config, const ScenarioWorld& world, const ScenarioInputs& inputs) {
  validate(config);
  const TravelMatrix& matrix = world.matrix(config.traffic_tier);
  std::vector<Request> requests;
  if (inputs.from_file) {
    requests = inputs.loaded;
    apply_service_levels(requests, config, matrix);
  } else {
    requests = materialize_demand(inputs.draws, config, matrix);
  }
  World w{&world.graph(), &world.zones(), &matrix, &world.rates()};
  Simulator sim(w, simulation_options(config), requests, make_fleet(inputs.fleet_nodes, config));
  sim.run();
  RunResult out;
  out.report = compute_metrics(sim.trace(), sim.state().requests, sim.state().vehicles.size());
  out.final_state = std::move(sim.state());
  out.trace = sim.take_trace();
  out.requests = std::move(requests);
  return out;
}

// ---------------------------------------------------------------------------
// Sweep

std::vector<SweepCell> sweep_grid(const ScenarioConfig& base) {
  const std::vector<int> caps =
      base.sweep_capacity.empty() ? std::vector<int>(kTableCapacity.begin(), kTableCapacity.end()) : base.sweep_capacity;
  const std::vector<double> hors = base.sweep_horizon_min.empty()
                                       ? std::vector<double>(kTableHorizonMin.begin(), kTableHorizonMin.end())
                                       : base.sweep_horizon_min;
  const std::vector<double> wsfs =
      base.sweep_wsf.empty() ? std::vector<double>(kTableFraction.begin(), kTableFraction.end()) : base.sweep_wsf;
  const std::vector<double> arfs =
      base.sweep_arf.empty() ? std::vector<double>(kTableFraction.begin(), kTableFraction.end()) : base.sweep_arf;
  const std::vector<LosTier> los = base.sweep_los.empty()
                                       ? std::vector<LosTier>{LosTier::strict, LosTier::neutral, LosTier::flexible}
                                       : base.sweep_los;
  const std::vector<TrafficTier> traffic =
      base.sweep_traffic.empty()
          ? std::vector<TrafficTier>{TrafficTier::light, TrafficTier::normal, TrafficTier::congested}
          : base.sweep_traffic;

  std::vector<SweepCell> cells;
  cells.reserve(caps.size() * hors.size() * wsfs.size() * arfs.size() * los.size() * traffic.size());
  for (std::size_t a = 0; a < caps.size(); ++a)
    for (std::size_t b = 0; b < hors.size(); ++b)
      for (std::size_t c = 0; c < wsfs.size(); ++c)
        for (std::size_t d = 0; d < arfs.size(); ++d)
          for (std::size_t e = 0; e < los.size(); ++e)
            for (std::size_t f = 0; f < traffic.size(); ++f) {
              SweepCell cell;
              cell.index = cells.size();
              cell.axis = {a, b, c, d, e, f};
              ScenarioConfig& cfg = cell.config;
              cfg = base;
              cfg.capacity = caps[a];
              cfg.horizon_s = hors[b] * 60.0;
              cfg.wsf = wsfs[c];
              cfg.arf = arfs[d];
              cfg.los_tier = los[e];
              cfg.traffic_tier = traffic[f];
              cfg.scenario_id = fmt::format("{:04}-c{}-h{:g}-w{:.2f}-a{:.2f}-{}-{}", cell.index, caps[a], hors[b],
                                            wsfs[c], arfs[d], to_string(los[e]), to_string(traffic[f]));
              cells.push_back(std::move(cell));
            }
  return cells;
}

}  // namespace arrp
