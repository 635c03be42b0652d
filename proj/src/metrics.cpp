#include "arrp/metrics.hpp"

#include <algorithm>
#include <iterator>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

#include "io_util.hpp"

namespace arrp {

MetricsReport compute_metrics(const EventTrace& trace, std::span<const Request> requests, std::size_t fleet_size) {
  MetricsReport rep;
  const std::size_t n = requests.size();
  std::vector<double> pickup(n, 0.0);
  std::vector<char> picked(n, 0), dropped(n, 0), shared(n, 0);
  double wait_sum = 0.0, delay_sum = 0.0;
  long long shared_count = 0;

  std::vector<std::vector<RequestIndex>> onboard(fleet_size);
  std::vector<int> load(fleet_size, 0), peak(fleet_size, 0), served_by(fleet_size, 0);

  for (const Event& e : trace.events()) {
    const auto r = static_cast<std::size_t>(e.request);
    const auto v = static_cast<std::size_t>(e.vehicle);
    switch (e.type) {
      case EventType::request_placed: ++rep.requests_total; break;
      case EventType::rejected: ++rep.requests_rejected; break;
      case EventType::picked_up:
        if (!onboard[v].empty()) {
          shared[r] = 1;
          for (RequestIndex o : onboard[v]) shared[static_cast<std::size_t>(o)] = 1;
        }
        onboard[v].push_back(e.request);
        load[v] += requests[r].party_size;
        peak[v] = std::max(peak[v], load[v]);
        picked[r] = 1;
        pickup[r] = e.time;
        break;
      case EventType::dropped_off: {
        auto it = std::find(onboard[v].begin(), onboard[v].end(), e.request);
        if (it == onboard[v].end())
          throw std::invalid_argument(fmt::format("request {} dropped off before pickup", requests[r].id));
        onboard[v].erase(it);
        load[v] -= requests[r].party_size;
        dropped[r] = 1;
        ++served_by[v];
        ++rep.requests_served;
        wait_sum += pickup[r] - requests[r].earliest_pickup;
        delay_sum += (e.time - pickup[r]) - requests[r].direct_time;
        break;
      }
      case EventType::vehicle_moved: {
        const double m = e.meters.value_or(0.0);
        rep.total_vmt += m;
        if (e.odometer == OdometerClass::occupied)
          rep.service_vmt += m;
        else
          rep.idle_vmt += m;
        break;
      }
      default: break;
    }
  }
  for (std::size_t r = 0; r < n; ++r) {
    if (picked[r] && !dropped[r])
      throw std::invalid_argument(fmt::format("request {} never dropped off", requests[r].id));
    if (dropped[r] && shared[r]) ++shared_count;
  }

  int top = 0;
  for (std::size_t v = 0; v < fleet_size; ++v)
    if (served_by[v] > 0) {
      ++rep.active_vehicles;
      top = std::max(top, peak[v]);
    }
  rep.max_occupancy_hist.assign(static_cast<std::size_t>(top) + 1, 0);
  for (std::size_t v = 0; v < fleet_size; ++v)
    if (served_by[v] > 0) ++rep.max_occupancy_hist[static_cast<std::size_t>(peak[v])];

  if (rep.requests_total > 0)
    rep.pct_served = static_cast<double>(rep.requests_served) / static_cast<double>(rep.requests_total);
  if (rep.requests_served > 0) {
    const auto s = static_cast<double>(rep.requests_served);
    rep.vmr_service = rep.service_vmt / s;
    rep.vmr_idle = rep.idle_vmt / s;
    rep.vmr = *rep.vmr_service + *rep.vmr_idle;
    rep.pct_shared = static_cast<double>(shared_count) / s;
    rep.avg_wait = wait_sum / s;
    rep.avg_delay = delay_sum / s;
  }
  return rep;
}

int occupancy_columns(std::span<const ReportRow> rows) {
  int k = 10;
  for (const ReportRow& r : rows) k = std::max(k, static_cast<int>(r.report.max_occupancy_hist.size()) - 1);
  return k;
}

std::string csv_header(int occ_columns) {
  std::string h =
      "scenario_id,fleet_size,capacity,horizon_s,wsf,arf,los_tier,traffic_tier,seed,vmr_m,vmr_service_m,"
      "vmr_idle_m,pct_shared,pct_served,avg_wait_s,avg_delay_s,active_vehicles,total_vmt_m,requests_total,"
      "requests_served,requests_rejected";
  for (int k = 1; k <= occ_columns; ++k) h += fmt::format(",occ_{}", k);
  h += ",error";
  return h;
}

namespace {

std::string quoted(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

std::string opt(const std::optional<double>& v, int precision) {
  return v ? fmt::format("{:.{}f}", *v, precision) : std::string();
}

}  // namespace

std::string export_report(const ReportRow& row, int occ_columns) {
  const ReportKey& k = row.key;
  const MetricsReport& m = row.report;
  std::string out = fmt::format("{},{},{},{:.0f},{:.4f},{:.4f},{},{},{}", quoted(k.scenario_id), k.fleet_size,
                                k.capacity, k.horizon_s, k.wsf, k.arf, k.los_tier, k.traffic_tier, k.seed);
  auto it = std::back_inserter(out);
  if (!row.error.empty()) {
    fmt::format_to(it, ",,,,,,,,,,,,");
    for (int c = 0; c < occ_columns; ++c) fmt::format_to(it, ",");
    fmt::format_to(it, ",{}", quoted(row.error));
    return out;
  }
  fmt::format_to(it, ",{},{},{},{},{},{},{},{},{:.3f},{},{},{}", opt(m.vmr, 3), opt(m.vmr_service, 3),
                 opt(m.vmr_idle, 3), opt(m.pct_shared, 6), opt(m.pct_served, 6), opt(m.avg_wait, 3),
                 opt(m.avg_delay, 3), m.active_vehicles, m.total_vmt, m.requests_total, m.requests_served,
                 m.requests_rejected);
  for (int c = 1; c <= occ_columns; ++c) {
    const auto uc = static_cast<std::size_t>(c);
    fmt::format_to(it, ",{}", uc < m.max_occupancy_hist.size() ? m.max_occupancy_hist[uc] : 0);
  }
  fmt::format_to(it, ",");
  return out;
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const ReportRow> rows) {
  const int occ = occupancy_columns(rows);
  io::write_atomically(path, [&](std::ostream& out) {
    out << csv_header(occ) << '\n';
    for (const ReportRow& r : rows) out << export_report(r, occ) << '\n';
  });
}

}  // namespace arrp
