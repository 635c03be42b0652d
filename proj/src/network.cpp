#include "arrp/network.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "arrp/apsp_kernels.hpp"
#include "csv_util.hpp"

namespace arrp {

NodeId RoadGraph::add_node(Point p) {
  nodes_.push_back(p);
  return static_cast<NodeId>(nodes_.size() - 1);
}

void RoadGraph::add_link(NodeId from, NodeId to, double length_m, double speed_mps) {
  if (!contains(from) || !contains(to))
    throw InputError(fmt::format("link {}->{} references an unknown node", from, to));
  if (!(length_m > 0.0) || !(speed_mps > 0.0))
    throw InputError(fmt::format("link {}->{} needs positive length and speed", from, to));
  links_.push_back({from, to, length_m, speed_mps});
}

bool RoadGraph::symmetric() const {
  std::map<std::pair<NodeId, NodeId>, std::pair<double, double>> best;
  for (const Link& l : links_) {
    auto key = std::make_pair(l.from, l.to);
    auto val = std::make_pair(l.free_flow_time(), l.length_m);
    auto it = best.find(key);
    if (it == best.end() || val < it->second) best[key] = val;
  }
  for (const auto& [key, val] : best) {
    auto it = best.find({key.second, key.first});
    if (it == best.end() || it->second != val) return false;
  }
  return true;
}

RoadGraph make_lattice(int nx, int ny, double spacing_m, double speed_mps, Point origin) {
  if (nx <= 0 || ny <= 0) throw InputError("lattice dimensions must be positive");
  RoadGraph g;
  for (int r = 0; r < ny; ++r)
    for (int c = 0; c < nx; ++c)
      g.add_node({origin.x + c * spacing_m, origin.y + r * spacing_m});
  auto id = [nx](int r, int c) { return static_cast<NodeId>(r * nx + c); };
  for (int r = 0; r < ny; ++r) {
    for (int c = 0; c < nx; ++c) {
      if (c + 1 < nx) {
        g.add_link(id(r, c), id(r, c + 1), spacing_m, speed_mps);
        g.add_link(id(r, c + 1), id(r, c), spacing_m, speed_mps);
      }
      if (r + 1 < ny) {
        g.add_link(id(r, c), id(r + 1, c), spacing_m, speed_mps);
        g.add_link(id(r + 1, c), id(r, c), spacing_m, speed_mps);
      }
    }
  }
  return g;
}

RoadGraph load_graph_csv(const std::filesystem::path& nodes_csv,
                         const std::filesystem::path& links_csv, bool undirected) {
  std::vector<std::pair<long long, Point>> rows;
  csv::for_each_row(nodes_csv, [&](const auto& f, std::size_t line) {
    long long id = 0;
    Point p;
    if (f.size() < 3 || !csv::parse(f[0], id) || !csv::parse(f[1], p.x) || !csv::parse(f[2], p.y))
      throw InputError(fmt::format("{}:{}: expected id,x_m,y_m", nodes_csv.string(), line));
    rows.emplace_back(id, p);
  });
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  RoadGraph g;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].first != static_cast<long long>(i))
      throw InputError(fmt::format("{}: node ids must be dense 0..{}", nodes_csv.string(), rows.size() - 1));
    g.add_node(rows[i].second);
  }
  csv::for_each_row(links_csv, [&](const auto& f, std::size_t line) {
    NodeId a = 0, b = 0;
    double len = 0.0, speed = 0.0;
    if (f.size() < 4 || !csv::parse(f[0], a) || !csv::parse(f[1], b) || !csv::parse(f[2], len) ||
        !csv::parse(f[3], speed))
      throw InputError(fmt::format("{}:{}: expected from,to,length_m,speed_mps", links_csv.string(), line));
    try {
      g.add_link(a, b, len, speed);
      if (undirected) g.add_link(b, a, len, speed);
    } catch (const InputError& e) {
      throw InputError(fmt::format("{}:{}: {}", links_csv.string(), line, e.what()));
    }
  });
  if (g.node_count() == 0) throw InputError("graph has no nodes");
  return g;
}

double traffic_factor(TrafficTier tier) {
  switch (tier) {
    case TrafficTier::light: return 1.0;
    case TrafficTier::normal: return 1.5;     // speed 2/3 of light
    case TrafficTier::congested: return 2.0;  // speed 1/2 of light
  }
  throw InputError("unknown traffic tier");
}

TrafficTier parse_traffic_tier(std::string_view name) {
  if (name == "light" || name == "high") return TrafficTier::light;
  if (name == "normal" || name == "medium") return TrafficTier::normal;
  if (name == "congested" || name == "low") return TrafficTier::congested;
  throw InputError(fmt::format("unknown traffic tier '{}'", name));
}

std::string_view to_string(TrafficTier tier) {
  switch (tier) {
    case TrafficTier::light: return "light";
    case TrafficTier::normal: return "normal";
    case TrafficTier::congested: return "congested";
  }
  return "?";
}

TravelMatrix::TravelMatrix(std::size_t n)
    : n_(n), tau_(n * n, kUnreachable), dist_(n * n, kUnreachable), next_(n * n, kNoNode) {}

TravelMatrix all_pairs_shortest(const RoadGraph& graph, int threads) {
  if (graph.node_count() == 0) throw InputError("all_pairs_shortest: empty graph");
  TravelMatrix m = kernels::seed_matrix(graph);
  kernels::floyd_warshall_parallel(m, threads);
  return m;
}

TravelMatrix scale_travel_times(const TravelMatrix& matrix, TrafficTier tier) {
  const double f = traffic_factor(tier);
  TravelMatrix out = matrix;
  for (double& t : out.times())
    if (t != kUnreachable) t *= f;
  out.set_time_factor(matrix.time_factor() * f);
  return out;
}

std::vector<NodeId> shortest_path_route(const TravelMatrix& matrix, NodeId origin, NodeId destination) {
  if (!matrix.reachable(origin, destination))
    throw InputError(fmt::format("no route from node {} to node {}", origin, destination));
  std::vector<NodeId> route{origin};
  NodeId at = origin;
  while (at != destination) {
    at = matrix.next_hop(at, destination);
    route.push_back(at);
    if (route.size() > matrix.size()) throw InputError("next-hop table contains a cycle");
  }
  return route;
}

BoundingBox bounding_box(const RoadGraph& graph) {
  BoundingBox b{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
                std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest()};
  for (const Point& p : graph.nodes()) {
    b.min_x = std::min(b.min_x, p.x);
    b.min_y = std::min(b.min_y, p.y);
    b.max_x = std::max(b.max_x, p.x);
    b.max_y = std::max(b.max_y, p.y);
  }
  return b;
}

namespace {

// Cell index along one axis; values on an interior edge go to the lower cell.
int axis_cell(double v, double origin, double cell, int count) {
  const double u = (v - origin) / cell;
  int idx = static_cast<int>(std::ceil(u)) - 1;
  return std::clamp(idx, 0, count - 1);
}

double sq_dist(Point a, Point b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

}  // namespace

ZonePartition ZonePartition::grid(const RoadGraph& graph, double cell_size_m, int cols, int rows,
                                  Point origin) {
  if (!(cell_size_m > 0.0) || cols <= 0 || rows <= 0)
    throw InputError("zone grid needs positive cell size and dimensions");
  if (graph.node_count() == 0) throw InputError("zone grid over an empty graph");
  ZonePartition p;
  p.rows_ = rows;
  p.cols_ = cols;
  p.cell_ = cell_size_m;
  p.origin_ = origin;
  p.zones_.resize(static_cast<std::size_t>(rows * cols));
  p.members_.resize(p.zones_.size());
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      ZoneCell& z = p.zones_[static_cast<std::size_t>(r * cols + c)];
      z.id = r * cols + c;
      z.row = r;
      z.col = c;
      z.bounds = {origin.x + c * cell_size_m, origin.y + r * cell_size_m,
                  origin.x + (c + 1) * cell_size_m, origin.y + (r + 1) * cell_size_m};
    }
  }
  p.node_to_zone_.resize(graph.node_count());
  for (std::size_t n = 0; n < graph.node_count(); ++n) {
    const ZoneId z = p.locate(graph.nodes()[n]);
    p.node_to_zone_[n] = z;
    p.members_[static_cast<std::size_t>(z)].push_back(static_cast<NodeId>(n));
  }
  for (ZoneCell& z : p.zones_) {
    const Point centre{(z.bounds.min_x + z.bounds.max_x) / 2, (z.bounds.min_y + z.bounds.max_y) / 2};
    const auto& members = p.members_[static_cast<std::size_t>(z.id)];
    if (members.empty()) {
      z.centroid_node = nearest_node(graph, centre);
      continue;
    }
    double best = std::numeric_limits<double>::max();
    for (NodeId n : members) {
      const double d = sq_dist(graph.position(n), centre);
      if (d < best) {
        best = d;
        z.centroid_node = n;
      }
    }
  }
  return p;
}

ZonePartition ZonePartition::covering(const RoadGraph& graph, double cell_size_m) {
  const BoundingBox b = bounding_box(graph);
  const int cols = std::max(1, static_cast<int>(std::ceil((b.max_x - b.min_x) / cell_size_m)));
  const int rows = std::max(1, static_cast<int>(std::ceil((b.max_y - b.min_y) / cell_size_m)));
  return grid(graph, cell_size_m, cols, rows, {b.min_x, b.min_y});
}

ZoneId ZonePartition::locate(Point p) const {
  const int c = axis_cell(p.x, origin_.x, cell_, cols_);
  const int r = axis_cell(p.y, origin_.y, cell_, rows_);
  return zone_at(r, c);
}

ZoneId assign_zone(const ZonePartition& partition, NodeId node) { return partition.zone_of(node); }

DemandRates::DemandRates(std::size_t zones, std::size_t intervals, double interval_length_s)
    : zones_(zones), intervals_(intervals), interval_(interval_length_s), lambda_(zones * intervals, 0.0) {
  if (!(interval_length_s > 0.0)) throw InputError("rate interval length must be positive");
}

void DemandRates::set_rate(ZoneId z, std::size_t k, double value) {
  if (!(value >= 0.0)) throw InputError("demand rates must be nonnegative");
  lambda_.at(static_cast<std::size_t>(z) * intervals_ + k) = value;
}

double DemandRates::expected(ZoneId z, double t0, double t1) const {
  if (!(t1 > t0) || intervals_ == 0) return 0.0;
  double total = 0.0;
  const auto first = static_cast<long long>(std::floor(std::max(t0, 0.0) / interval_));
  for (long long k = first; k < static_cast<long long>(intervals_); ++k) {
    const double a = static_cast<double>(k) * interval_;
    const double b = a + interval_;
    if (a >= t1) break;
    const double overlap = std::min(b, t1) - std::max(a, t0);
    if (overlap > 0.0) total += rate(z, static_cast<std::size_t>(k)) * overlap / interval_;
  }
  return total;
}

double DemandRates::zone_total(ZoneId z) const {
  double s = 0.0;
  for (std::size_t k = 0; k < intervals_; ++k) s += rate(z, k);
  return s;
}

DemandRates load_rates_csv(const std::filesystem::path& path, const ZonePartition& partition,
                           double interval_length_s) {
  struct Row {
    int r, c;
    std::size_t k;
    double rate;
  };
  std::vector<Row> rows;
  std::size_t intervals = 0;
  csv::for_each_row(path, [&](const auto& f, std::size_t line) {
    Row row{};
    if (f.size() < 4 || !csv::parse(f[0], row.r) || !csv::parse(f[1], row.c) || !csv::parse(f[2], row.k) ||
        !csv::parse(f[3], row.rate))
      throw InputError(fmt::format("{}:{}: expected zone_row,zone_col,interval_index,rate", path.string(), line));
    if (row.r < 0 || row.r >= partition.rows() || row.c < 0 || row.c >= partition.cols())
      throw InputError(fmt::format("{}:{}: zone ({}, {}) outside the grid", path.string(), line, row.r, row.c));
    if (!(row.rate >= 0.0)) throw InputError(fmt::format("{}:{}: negative rate", path.string(), line));
    intervals = std::max(intervals, row.k + 1);
    rows.push_back(row);
  });
  DemandRates rates(partition.zone_count(), intervals, interval_length_s);
  for (const Row& row : rows) rates.set_rate(partition.zone_at(row.r, row.c), row.k, row.rate);
  return rates;
}

NodeId nearest_node(const RoadGraph& graph, Point p) {
  NodeId best = kNoNode;
  double best_d = std::numeric_limits<double>::max();
  for (std::size_t n = 0; n < graph.node_count(); ++n) {
    const double d = sq_dist(graph.nodes()[n], p);
    if (d < best_d) {
      best_d = d;
      best = static_cast<NodeId>(n);
    }
  }
  return best;
}

}  // namespace arrp
