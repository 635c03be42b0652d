#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace arrp {

using NodeId = std::int32_t;
using ZoneId = std::int32_t;

inline constexpr NodeId kNoNode = -1;
inline constexpr ZoneId kNoZone = -1;

// Sentinel for disconnected node pairs in TravelMatrix.
inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Link {
  NodeId from = kNoNode;
  NodeId to = kNoNode;
  double length_m = 0.0;
  double speed_mps = 0.0;

  double free_flow_time() const { return length_m / speed_mps; }
};

/// Directed road graph with planar node coordinates (meters).
///
/// Node ids are dense, assigned in insertion order. Links must reference
/// existing nodes and carry positive length and speed.
class RoadGraph {
 public:
  NodeId add_node(Point p);
  void add_link(NodeId from, NodeId to, double length_m, double speed_mps);

  std::size_t node_count() const { return nodes_.size(); }
  std::span<const Point> nodes() const { return nodes_; }
  std::span<const Link> links() const { return links_; }
  const Point& position(NodeId n) const { return nodes_.at(static_cast<std::size_t>(n)); }
  bool contains(NodeId n) const { return n >= 0 && static_cast<std::size_t>(n) < nodes_.size(); }

  bool symmetric() const;

 private:
  std::vector<Point> nodes_;
  std::vector<Link> links_;
};

// 4-neighbour lattice with nx * ny nodes, both directions linked.
RoadGraph make_lattice(int nx, int ny, double spacing_m, double speed_mps, Point origin = {});

// nodes.csv: id,x_m,y_m   links.csv: from,to,length_m,speed_mps
// Ids in nodes.csv must be exactly 0..n-1 (any order).
RoadGraph load_graph_csv(const std::filesystem::path& nodes_csv,
                         const std::filesystem::path& links_csv, bool undirected);

enum class TrafficTier { light, normal, congested };

double traffic_factor(TrafficTier tier);
TrafficTier parse_traffic_tier(std::string_view name);
std::string_view to_string(TrafficTier tier);

/// All-pairs shortest travel times and distances.
///
/// Paths minimise travel time; `distance` is measured along the
/// time-shortest path (ties on time broken by shorter distance). Row-major
/// n x n storage. `next_hop(i, j)` is the neighbour of i on the path to j.
class TravelMatrix {
 public:
  TravelMatrix() = default;
  explicit TravelMatrix(std::size_t n);

  std::size_t size() const { return n_; }

  double time(NodeId i, NodeId j) const { return tau_[index(i, j)]; }
  double distance(NodeId i, NodeId j) const { return dist_[index(i, j)]; }
  NodeId next_hop(NodeId i, NodeId j) const { return next_[index(i, j)]; }
  bool reachable(NodeId i, NodeId j) const { return tau_[index(i, j)] != kUnreachable; }

  // Multiplier applied to free-flow times (1 for light traffic).
  double time_factor() const { return factor_; }

  std::span<double> times() { return tau_; }
  std::span<double> distances() { return dist_; }
  std::span<NodeId> next_hops() { return next_; }
  std::span<const double> times() const { return tau_; }
  std::span<const double> distances() const { return dist_; }
  std::span<const NodeId> next_hops() const { return next_; }

  void set_time_factor(double f) { factor_ = f; }

 private:
  std::size_t index(NodeId i, NodeId j) const {
    return static_cast<std::size_t>(i) * n_ + static_cast<std::size_t>(j);
  }

  std::size_t n_ = 0;
  double factor_ = 1.0;
  std::vector<double> tau_;
  std::vector<double> dist_;
  std::vector<NodeId> next_;
};

// Floyd-Warshall over free-flow link times. `threads` <= 0 uses the OpenMP
// default team size.
TravelMatrix all_pairs_shortest(const RoadGraph& graph, int threads = 0);

// Multiplies every finite time by the tier factor; distances and next hops
// are unchanged.
TravelMatrix scale_travel_times(const TravelMatrix& matrix, TrafficTier tier);

// Node sequence from origin to destination; throws InputError when the pair
// is disconnected.
std::vector<NodeId> shortest_path_route(const TravelMatrix& matrix, NodeId origin,
                                        NodeId destination);

struct BoundingBox {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;
};

BoundingBox bounding_box(const RoadGraph& graph);

struct ZoneCell {
  ZoneId id = kNoZone;
  int row = 0;
  int col = 0;
  BoundingBox bounds;
  NodeId centroid_node = kNoNode;
};

/// Rectangular grid of zones over a bounding box.
///
/// A node lying exactly on a shared cell edge belongs to the cell with the
/// smaller (row, col). Nodes outside the box clamp to the nearest edge cell.
class ZonePartition {
 public:
  static ZonePartition grid(const RoadGraph& graph, double cell_size_m, int cols, int rows,
                            Point origin);
  // Grid covering the graph's bounding box.
  static ZonePartition covering(const RoadGraph& graph, double cell_size_m);

  std::size_t zone_count() const { return zones_.size(); }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double cell_size() const { return cell_; }

  const ZoneCell& zone(ZoneId z) const { return zones_.at(static_cast<std::size_t>(z)); }
  std::span<const ZoneCell> zones() const { return zones_; }
  ZoneId zone_of(NodeId n) const { return node_to_zone_.at(static_cast<std::size_t>(n)); }
  std::span<const NodeId> nodes_in(ZoneId z) const { return members_.at(static_cast<std::size_t>(z)); }
  ZoneId zone_at(int row, int col) const { return row * cols_ + col; }

  // Cell containing a coordinate, using the boundary tie rule.
  ZoneId locate(Point p) const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  double cell_ = 0.0;
  Point origin_;
  std::vector<ZoneCell> zones_;
  std::vector<ZoneId> node_to_zone_;
  std::vector<std::vector<NodeId>> members_;
};

ZoneId assign_zone(const ZonePartition& partition, NodeId node);

/// Expected request counts per zone per rate interval.
class DemandRates {
 public:
  DemandRates() = default;
  DemandRates(std::size_t zones, std::size_t intervals, double interval_length_s = 900.0);

  std::size_t zone_count() const { return zones_; }
  std::size_t interval_count() const { return intervals_; }
  double interval_length() const { return interval_; }

  double rate(ZoneId z, std::size_t k) const { return lambda_[static_cast<std::size_t>(z) * intervals_ + k]; }
  void set_rate(ZoneId z, std::size_t k, double value);

  // Expected requests in zone z over [t0, t1), prorating partial intervals.
  // Times beyond the last interval contribute nothing.
  double expected(ZoneId z, double t0, double t1) const;
  double zone_total(ZoneId z) const;

 private:
  std::size_t zones_ = 0;
  std::size_t intervals_ = 0;
  double interval_ = 900.0;
  std::vector<double> lambda_;
};

// Rates CSV: zone_row,zone_col,interval_index,rate
DemandRates load_rates_csv(const std::filesystem::path& path, const ZonePartition& partition,
                           double interval_length_s);

NodeId nearest_node(const RoadGraph& graph, Point p);

}  // namespace arrp
