#include "arrp/apsp_kernels.hpp"

#include <omp.h>

namespace arrp::kernels {

TravelMatrix seed_matrix(const RoadGraph& graph) {
  const std::size_t n = graph.node_count();
  TravelMatrix m(n);
  auto tau = m.times();
  auto dist = m.distances();
  auto next = m.next_hops();
  for (std::size_t i = 0; i < n; ++i) {
    tau[i * n + i] = 0.0;
    dist[i * n + i] = 0.0;
    next[i * n + i] = static_cast<NodeId>(i);
  }
  for (const Link& l : graph.links()) {
    if (l.from == l.to) continue;
    const std::size_t ij = static_cast<std::size_t>(l.from) * n + static_cast<std::size_t>(l.to);
    const double t = l.free_flow_time();
    if (t < tau[ij] || (t == tau[ij] && l.length_m < dist[ij])) {
      tau[ij] = t;
      dist[ij] = l.length_m;
      next[ij] = l.to;
    }
  }
  return m;
}

namespace {

// Relax row i through pivot k. Lexicographic on (time, distance).
inline void relax_row(double* ti, double* di, NodeId* ni, const double* tk, const double* dk,
                      double tik, double dik, NodeId nik, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    const double c = tik + tk[j];
    const double cd = dik + dk[j];
    const bool better = c < ti[j] || (c == ti[j] && cd < di[j]);
    ti[j] = better ? c : ti[j];
    di[j] = better ? cd : di[j];
    ni[j] = better ? nik : ni[j];
  }
}

}  // namespace

void floyd_warshall_serial(TravelMatrix& m) {
  const std::size_t n = m.size();
  double* tau = m.times().data();
  double* dist = m.distances().data();
  NodeId* next = m.next_hops().data();
  for (std::size_t k = 0; k < n; ++k) {
    const double* tk = tau + k * n;
    const double* dk = dist + k * n;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == k) continue;
      const double tik = tau[i * n + k];
      if (tik == kUnreachable) continue;
      relax_row(tau + i * n, dist + i * n, next + i * n, tk, dk, tik, dist[i * n + k],
                next[i * n + k], n);
    }
  }
}

void floyd_warshall_parallel(TravelMatrix& m, int threads) {
  const std::size_t n = m.size();
  double* tau = m.times().data();
  double* dist = m.distances().data();
  NodeId* next = m.next_hops().data();
  const int team = threads > 0 ? threads : omp_get_max_threads();
  const auto rows = static_cast<std::ptrdiff_t>(n);

#pragma omp parallel num_threads(team)
  for (std::size_t k = 0; k < n; ++k) {
    const double* tk = tau + k * n;
    const double* dk = dist + k * n;
#pragma omp for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      if (i == k) continue;
      const double tik = tau[i * n + k];
      if (tik == kUnreachable) continue;
      relax_row(tau + i * n, dist + i * n, next + i * n, tk, dk, tik, dist[i * n + k],
                next[i * n + k], n);
    }
    // implicit barrier of omp for separates pivots
  }
}

}  // namespace arrp::kernels
