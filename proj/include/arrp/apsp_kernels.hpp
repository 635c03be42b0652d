#pragma once

#include "arrp/network.hpp"

namespace arrp::kernels {

// Travel matrix seeded with direct links only (before any relaxation).
TravelMatrix seed_matrix(const RoadGraph& graph);

// Reference Floyd-Warshall; single thread, straightforward loop nest.
void floyd_warshall_serial(TravelMatrix& m);

// Row-parallel Floyd-Warshall. For a fixed pivot k, row k is never updated,
// so rows i != k relax independently. Produces bit-identical output to the
// serial kernel for any team size.
void floyd_warshall_parallel(TravelMatrix& m, int threads = 0);

}  // namespace arrp::kernels
