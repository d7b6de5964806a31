#include <benchmark/benchmark.h>

#include "skelclip/features.hpp"
#include "skelclip/harness.hpp"
#include "skelclip/mtln.hpp"
#include "skelclip/rng.hpp"

using namespace skelclip;

namespace {

SkeletonSequence synthetic_sequence(std::size_t frames) {
  SynthConfig cfg;
  cfg.n_classes = 2;
  cfg.samples_per_class = 1;
  cfg.t_min = cfg.t_max = frames;
  return generate_synthetic(cfg).samples[0][0];
}

void BM_GenerateClips(benchmark::State& state) {
  const auto seq = synthetic_sequence(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(generate_clips(seq));
}
BENCHMARK(BM_GenerateClips)->Arg(20)->Arg(60)->Arg(300)->Unit(benchmark::kMillisecond);

void BM_ExtractFrame(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  const auto cs = generate_clips(synthetic_sequence(40), {CoordinateSystem::cylindrical, ScaleScope::per_frame, size});
  const FrozenExtractor extractor(default_extractor_spec(64));
  for (auto _ : state) benchmark::DoNotOptimize(extractor.extract(cs.frame(Channel::radius, 0)));
}
BENCHMARK(BM_ExtractFrame)->Arg(64)->Arg(224)->Unit(benchmark::kMillisecond);

void BM_TimeStepFeatures(benchmark::State& state) {
  const auto cs = generate_clips(synthetic_sequence(40));
  const FrozenExtractor extractor(default_extractor_spec(64));
  for (auto _ : state) benchmark::DoNotOptimize(build_time_step_features(cs, extractor));
}
BENCHMARK(BM_TimeStepFeatures)->Unit(benchmark::kMillisecond);

void BM_MtlnBackward(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const auto p = init_params(d, 512, 5, 1, 1.0);
  SplitMix64 rng(2);
  TaskInputs tasks(4, FeatureVector(d));
  for (auto& t : tasks)
    for (auto& v : t) v = rng.uniform() < 0.2 ? 0.0 : rng.uniform(0.0, 100.0);
  for (auto _ : state) benchmark::DoNotOptimize(backward(p, tasks, 3));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 4);
}
BENCHMARK(BM_MtlnBackward)->Arg(2688)->Arg(21504)->Unit(benchmark::kMillisecond);

void BM_TrainEpoch(benchmark::State& state) {
  SplitMix64 rng(3);
  std::vector<TrainSample> data;
  for (std::size_t i = 0; i < 100; ++i) {
    TaskInputs tasks(4, FeatureVector(2688));
    for (auto& t : tasks)
      for (auto& v : t) v = rng.uniform(0.0, 100.0);
    data.push_back({std::move(tasks), i % 5});
  }
  TrainConfig cfg;
  cfg.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train(data, 5, cfg));
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
