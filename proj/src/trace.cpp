#include "arrp/trace.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "io_util.hpp"

namespace arrp {

std::string_view to_string(EventType t) {
  switch (t) {
    case EventType::request_placed: return "request_placed";
    case EventType::request_visible: return "request_visible";
    case EventType::assigned: return "assigned";
    case EventType::rejected: return "rejected";
    case EventType::picked_up: return "picked_up";
    case EventType::dropped_off: return "dropped_off";
    case EventType::rebalance_start: return "rebalance_start";
    case EventType::rebalance_end: return "rebalance_end";
    case EventType::vehicle_moved: return "vehicle_moved";
  }
  return "?";
}

std::size_t EventTrace::count(EventType t) const {
  return static_cast<std::size_t>(
      std::count_if(events_.begin(), events_.end(), [t](const Event& e) { return e.type == t; }));
}

void write_ndjson(std::ostream& out, const EventTrace& trace, std::span<const Request> requests) {
  fmt::memory_buffer buf;
  auto it = std::back_inserter(buf);
  auto id_or_null = [&](auto value, auto none) {
    if (value == none)
      fmt::format_to(it, "null");
    else
      fmt::format_to(it, "{}", value);
  };
  for (const Event& e : trace.events()) {
    buf.clear();
    fmt::format_to(it, "{{\"event_type\":\"{}\",\"time_s\":{},\"request_id\":", to_string(e.type), e.time);
    if (e.request == kNoRequest)
      fmt::format_to(it, "null");
    else
      fmt::format_to(it, "{}", requests[static_cast<std::size_t>(e.request)].id);
    fmt::format_to(it, ",\"vehicle_id\":");
    id_or_null(e.vehicle, kNoVehicle);
    fmt::format_to(it, ",\"node\":");
    id_or_null(e.node, kNoNode);
    fmt::format_to(it, ",\"zone\":");
    id_or_null(e.zone, kNoZone);
    fmt::format_to(it, ",\"meters\":");
    if (e.meters)
      fmt::format_to(it, "{}", *e.meters);
    else
      fmt::format_to(it, "null");
    if (e.odometer) fmt::format_to(it, ",\"odometer\":\"{}\"", to_string(*e.odometer));
    fmt::format_to(it, "}}\n");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
}

void write_ndjson_file(const std::filesystem::path& path, const EventTrace& trace,
                       std::span<const Request> requests) {
  io::write_atomically(path, [&](std::ostream& out) { write_ndjson(out, trace, requests); });
}

}  // namespace arrp
