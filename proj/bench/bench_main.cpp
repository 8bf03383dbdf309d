#include <benchmark/benchmark.h>

#include "aif/env.hpp"
#include "aif/planning.hpp"
#include "oracles.hpp"

using namespace aif;

namespace {

GenerativeModel bench_model(std::size_t n) {
  oracle::Rng rng(7);
  return oracle::random_model(rng, {n, 4}, {n, 3}, {4, 2}, 2.0);
}

template <EFEReport (*Eval)(const GenerativeModel&, const BeliefState&, std::span<const Policy>)>
void BM_EvaluatePolicies(benchmark::State& state) {
  const auto m = bench_model(static_cast<std::size_t>(state.range(0)));
  const auto pols = enumerate_policies(m, 3);
  const auto q = m.prior();
  for (auto _ : state) benchmark::DoNotOptimize(Eval(m, q, pols));
  state.counters["policies"] = static_cast<double>(pols.size());
}

template <PlanResult (*Plan)(const GenerativeModel&, const BeliefState&, const PlannerOptions&)>
void BM_PlanTMaze(benchmark::State& state) {
  const auto m = tmaze::build_model({});
  PlannerOptions opts;
  opts.depth = static_cast<std::size_t>(state.range(0));
  opts.node_budget = 10'000'000;
  std::size_t nodes = 0;
  for (auto _ : state) nodes = Plan(m, m.prior(), opts).nodes;
  state.counters["nodes"] = static_cast<double>(nodes);
}

}  // namespace

BENCHMARK(BM_EvaluatePolicies<serial::evaluate_policies>)->Name("evaluate_policies/serial")->Arg(4)->Arg(16);
BENCHMARK(BM_EvaluatePolicies<evaluate_policies>)->Name("evaluate_policies/omp")->Arg(4)->Arg(16);
BENCHMARK(BM_PlanTMaze<serial::plan_sophisticated>)->Name("plan_sophisticated/serial")->Arg(2)->Arg(3);
BENCHMARK(BM_PlanTMaze<plan_sophisticated>)->Name("plan_sophisticated/omp")->Arg(2)->Arg(3);

BENCHMARK_MAIN();
