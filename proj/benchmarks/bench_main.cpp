#include <benchmark/benchmark.h>

#include "slans/noise.hpp"
#include "slans/operators.hpp"
#include "slans/stepper.hpp"

using namespace slans;

namespace {

std::shared_ptr<const MixedSpace> th(int n) {
  return MixedSpace::taylor_hood(std::make_shared<const Mesh>(triangulate_unit_square(n)));
}

void BM_AssembleStiffness(benchmark::State& state) {
  const auto space = th(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(assemble_stiffness(*space));
  state.counters["cells"] = static_cast<double>(space->mesh().num_cells());
}
BENCHMARK(BM_AssembleStiffness)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_AssembleConvection(benchmark::State& state) {
  const auto space = th(static_cast<int>(state.range(0)));
  const Vector v = interpolate_velocity(*space, vortex_field);
  for (auto _ : state) benchmark::DoNotOptimize(assemble_convection(*space, v, ConvectionForm::kSkew));
}
BENCHMARK(BM_AssembleConvection)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_FilterApply(benchmark::State& state) {
  const auto space = th(static_cast<int>(state.range(0)));
  auto ops = std::make_shared<const DiscreteOperators>(space);
  const FilterContext filter(ops, 0.1);
  const Vector v = ops->l2_project(vortex_field);
  for (auto _ : state) benchmark::DoNotOptimize(filter.apply(v));
}
BENCHMARK(BM_FilterApply)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_LansStep(benchmark::State& state) {
  const auto space = th(static_cast<int>(state.range(0)));
  auto ops = std::make_shared<const DiscreteOperators>(space);
  StepperOptions o;
  o.k = 1e-3;
  o.alpha = 0.05;
  o.solver = state.range(1) ? SolverKind::kIterative : SolverKind::kDirect;
  const LansStepper stepper(ops, o);
  const auto model = DriftDiffusionModel::zero().with_additive_noise(ops, 1.0);
  const NoiseRealizer realizer(space, 10);
  const Vector dW = realizer.realize(sample_increment(NoiseModel(10, 1), 1, o.k));
  const PathState s0 = stepper.initial_state(ops->l2_project(vortex_field));
  for (auto _ : state) benchmark::DoNotOptimize(stepper.step(s0, model, dW));
  state.SetLabel(o.solver == SolverKind::kDirect ? "direct" : "iterative");
}
BENCHMARK(BM_LansStep)->Args({16, 0})->Args({16, 1})->Args({32, 0})->Args({32, 1})->Unit(benchmark::kMillisecond);

void BM_SampleIncrement(benchmark::State& state) {
  const IncrementSampler sampler(NoiseModel(static_cast<int>(state.range(0)), 7), 0);
  int m = 1;
  for (auto _ : state) benchmark::DoNotOptimize(sampler.sample(m++, 1e-3));
}
BENCHMARK(BM_SampleIncrement)->Arg(10)->Arg(20);

void BM_RealizeNoise(benchmark::State& state) {
  const auto space = th(static_cast<int>(state.range(0)));
  const NoiseRealizer realizer(space, 10);
  const WienerIncrement inc = sample_increment(NoiseModel(10, 3), 1, 1e-3);
  for (auto _ : state) benchmark::DoNotOptimize(realizer.realize(inc));
}
BENCHMARK(BM_RealizeNoise)->Arg(16)->Arg(48);

}  // namespace
BENCHMARK_MAIN();
