#include <benchmark/benchmark.h>

#include "reprocs/engine.hpp"
#include "reprocs/eval.hpp"

namespace {

using namespace reprocs;

// Steady-state cost of one frame (detect phase) for the simulated scenarios.
void BM_ProcessFrame(benchmark::State& state) {
  Scenario sc = table1_case(state.range(0), 100.0);
  sc.change_offset = 1000;  // keep the whole run before the change
  sc.post_frames = 200;
  const ScenarioData d = generate_scenario(sc, 1);
  const EngineState init = init_engine(d.training, sc.params);
  EngineState st = init;
  Index c = 0;
  for (auto _ : state) {
    if (c == d.m.cols()) {
      state.PauseTiming();
      st = init;
      c = 0;
      state.ResumeTiming();
    }
    benchmark::DoNotOptimize(process_frame(st, d.m.col(c++)));
  }
}
BENCHMARK(BM_ProcessFrame)->Arg(9)->Arg(27)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
