#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "arrp/core_state.hpp"

namespace arrp {

enum class EventType : std::uint8_t {
  request_placed,
  request_visible,
  assigned,
  rejected,
  picked_up,
  dropped_off,
  rebalance_start,
  rebalance_end,
  vehicle_moved,
};

std::string_view to_string(EventType t);

struct Event {
  EventType type = EventType::request_placed;
  double time = 0.0;
  RequestIndex request = kNoRequest;
  VehicleId vehicle = kNoVehicle;
  NodeId node = kNoNode;
  ZoneId zone = kNoZone;
  std::optional<double> meters;        // vehicle_moved only
  std::optional<OdometerClass> odometer;  // vehicle_moved only
};

class EventTrace {
 public:
  void append(const Event& e) { events_.push_back(e); }
  void append(std::span<const Event> batch) { events_.insert(events_.end(), batch.begin(), batch.end()); }

  std::span<const Event> events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  std::size_t count(EventType t) const;

 private:
  std::vector<Event> events_;
};

// One JSON object per line. Request ids are the external ids from
// `requests`; inapplicable fields are null.
void write_ndjson(std::ostream& out, const EventTrace& trace, std::span<const Request> requests);

// Writes to a sibling temporary then renames over `path`.
void write_ndjson_file(const std::filesystem::path& path, const EventTrace& trace,
                       std::span<const Request> requests);

}  // namespace arrp
