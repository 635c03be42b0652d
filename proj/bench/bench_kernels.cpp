// Serial reference kernels against their OpenMP counterparts.

#include <random>

#include <benchmark/benchmark.h>

#include "arrp/apsp_kernels.hpp"
#include "arrp/assignment.hpp"
#include "support/testkit.hpp"

using namespace arrp;

namespace {

void BM_FloydWarshallSerial(benchmark::State& state) {
  const auto side = static_cast<int>(state.range(0));
  const RoadGraph g = make_lattice(side, side, 500.0, 10.0);
  const TravelMatrix seed = kernels::seed_matrix(g);
  for (auto _ : state) {
    TravelMatrix m = seed;
    kernels::floyd_warshall_serial(m);
    benchmark::DoNotOptimize(m);
  }
}

void BM_FloydWarshallParallel(benchmark::State& state) {
  const auto side = static_cast<int>(state.range(0));
  const RoadGraph g = make_lattice(side, side, 500.0, 10.0);
  const TravelMatrix seed = kernels::seed_matrix(g);
  for (auto _ : state) {
    TravelMatrix m = seed;
    kernels::floyd_warshall_parallel(m, static_cast<int>(state.range(1)));
    benchmark::DoNotOptimize(m);
  }
}

// One assignment pass over a loaded fleet; threads = range(0).
void BM_AssignRequests(benchmark::State& state) {
  std::mt19937_64 rng(5);
  const RoadGraph g = make_lattice(20, 20, 500.0, 10.0);
  const TravelMatrix m = all_pairs_shortest(g);
  testkit::InstanceOptions opt;
  opt.vehicles = 600;
  opt.max_prior = 3;
  SystemState base = testkit::random_state(g, m, rng, opt);
  std::vector<RequestIndex> pool;
  for (int i = 0; i < 40; ++i) pool.push_back(testkit::add_random_request(base, g, m, rng, opt));
  const AssignmentOptions options{1000.0, static_cast<int>(state.range(0))};
  for (auto _ : state) {
    state.PauseTiming();
    SystemState s = base;
    state.ResumeTiming();
    benchmark::DoNotOptimize(assign_requests(s, pool, m, options));
  }
}

}  // namespace

BENCHMARK(BM_FloydWarshallSerial)->Arg(21)->Arg(31)->Arg(41)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FloydWarshallParallel)
    ->ArgsProduct({{21, 31, 41}, {1, 2, 4, 8}})
    ->Unit(benchmark::kMillisecond)
    ->UseRealTime();
BENCHMARK(BM_AssignRequests)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
