#include <benchmark/benchmark.h>

#include <vector>

#include "ralp/catalog.hpp"
#include "ralp/parallel.hpp"

namespace {

using namespace ralp;

std::vector<ModelGraph> models(int copies) {
  std::vector<ModelGraph> out;
  for (int k = 0; k < copies; ++k)
    for (const auto& name : catalog_names()) out.push_back(catalog_lookup(name).with_batch_size(16 + k));
  return out;
}

std::vector<SplitProblem> problems(int copies) {
  std::vector<SplitProblem> out;
  for (const auto& m : models(copies)) out.push_back({m.param_bytes_series(), m.output_bytes_series(), m.kinds()});
  return out;
}

std::vector<Scenario> scenarios(int count) {
  const auto names = catalog_names();
  const auto cluster = ClusterSpec::testbed();
  std::vector<Scenario> out;
  for (int i = 0; i < count; ++i) {
    const auto m = catalog_lookup(names[i % names.size()]);
    const int w = 2 + i % 7;
    JobSpec spec{m, Strategy::baseline(), w, w};
    if (i % 3 == 1) spec = {m, Strategy::ralp(planned_split(m).value_or(1)), w, 1};
    if (i % 3 == 2) spec = {m, Strategy::ring(), w, 0};
    out.push_back(make_scenario("b" + std::to_string(i), cluster,
                                {JobRequest{"j", spec, std::nullopt, PlacementPolicy::Spread}}, 3, 1));
  }
  return out;
}

void BM_ProfileSerial(benchmark::State& st) {
  const auto in = models(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(profile_many_serial(in));
}
void BM_ProfileOmp(benchmark::State& st) {
  const auto in = models(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(profile_many(in));
}
void BM_SplitSerial(benchmark::State& st) {
  const auto in = problems(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(find_split_many_serial(in));
}
void BM_SplitOmp(benchmark::State& st) {
  const auto in = problems(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(find_split_many(in));
}
void BM_SimulateSerial(benchmark::State& st) {
  const auto in = scenarios(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(simulate_many_serial(in));
}
void BM_SimulateOmp(benchmark::State& st) {
  const auto in = scenarios(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(simulate_many(in));
}

}  // namespace

BENCHMARK(BM_ProfileSerial)->Arg(4)->Arg(32);
BENCHMARK(BM_ProfileOmp)->Arg(4)->Arg(32);
BENCHMARK(BM_SplitSerial)->Arg(4)->Arg(32);
BENCHMARK(BM_SplitOmp)->Arg(4)->Arg(32);
BENCHMARK(BM_SimulateSerial)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimulateOmp)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
