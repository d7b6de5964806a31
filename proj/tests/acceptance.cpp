// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "skelclip/harness.hpp"
#include "test_support.hpp"

using namespace skelclip;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// ---- synthetic benchmark ----

struct BenchRun {
  FoldResult mtln;
  FoldResult frame;
  double data_seconds = 0.0;
  double feature_seconds = 0.0;
  double mtln_seconds = 0.0;
};

// 5 classes, 40 train and 20 test records per class, default pipeline.
BenchRun run_benchmark(std::uint64_t seed) {
  BenchRun run;
  auto t0 = Clock::now();
  SynthConfig sc;
  sc.seed = seed;
  const Dataset data = generate_synthetic(sc);
  run.data_seconds = seconds_since(t0);

  PipelineConfig pc;
  pc.train.seed = seed;
  t0 = Clock::now();
  const auto features = extract_dataset_features(data, pc);
  run.feature_seconds = seconds_since(t0);

  std::vector<int> labels;
  Split split;
  for (std::size_t i = 0; i < data.manifest.records.size(); ++i) {
    labels.push_back(data.manifest.records[i].label);
    (i % sc.samples_per_class < 40 ? split.train : split.test).push_back(i);
  }
  const auto classes = static_cast<std::size_t>(sc.n_classes);
  t0 = Clock::now();
  run.mtln = evaluate_split(features, labels, classes, split, Mode::mtln, pc.train);
  run.mtln_seconds = seconds_since(t0);
  run.frame = evaluate_split(features, labels, classes, split, Mode::single_frame, pc.train);
  std::fprintf(stderr, "  seed %llu: mtln %.4f frame %.4f (features %.1fs, mtln %.1fs)\n",
               static_cast<unsigned long long>(seed), run.mtln.accuracy, run.frame.accuracy, run.feature_seconds,
               run.mtln_seconds);
  return run;
}

std::map<std::uint64_t, BenchRun> bench_cache;

const BenchRun& benchmark(std::uint64_t seed) {
  auto it = bench_cache.find(seed);
  if (it == bench_cache.end()) it = bench_cache.emplace(seed, run_benchmark(seed)).first;
  return it->second;
}

// ---- criteria ----

Outcome shapes() {
  const auto t0 = Clock::now();
  SplitMix64 rng(1);
  const auto layout = builtin_layout("ntu-25");
  std::ostringstream bad;
  for (std::size_t t : {1u, 2u, 17u, 60u, 300u}) {
    const auto seq = testkit::random_sequence(rng, layout, t);
    for (std::size_t r = 0; r < 4; ++r) {
      const auto g = relative_positions(seq, layout.reference_joints[r]);
      if (g.rows != 24 || g.cols != t) bad << " relative " << g.rows << "x" << g.cols;
    }
    const auto cs = generate_clips(seq);
    if (cs.size != 224) bad << " clip size " << cs.size;
    for (const auto& clip : cs.clips)
      for (const auto& f : clip)
        if (f.height() != 224 || f.width() != 224) bad << " frame " << f.height() << "x" << f.width();
    const auto tensor = clipset_to_tensor(cs);
    if (tensor.shape != std::vector<std::uint32_t>{3, 4, 224, 224}) bad << " tensor shape";
  }

  const FrozenExtractor wide(default_extractor_spec(512));
  GrayFrame frame = testkit::random_frame(rng, 224, 224);
  const auto fm = wide.extract(frame);
  if (fm.height != 14 || fm.width != 14 || fm.channels != 512) bad << " maps";
  const auto pooled = temporal_mean_pool(fm);
  if (pooled.values.size() != 7168) bad << " pooled " << pooled.values.size();

  ClipFeatureMaps maps;
  for (auto& c : maps)
    for (auto& m : c) m = fm;
  const auto steps = build_time_step_features(maps);
  for (const auto& s : steps)
    if (s.values.size() != 21504) bad << " step " << s.values.size();
  const double secs = seconds_since(t0);
  if (secs >= 1.0) bad << " took " << secs << " s";
  return {bad.str().empty(), bad.str().empty() ? fmt("24 x t, 7168, 21504, 3x4x224x224 in %.3f s", secs) : bad.str()};
}

Outcome pooling() {
  SplitMix64 rng(2);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    FeatureMaps fm(1 + rng.below(14), 1 + rng.below(14), 1 + rng.below(32));
    for (auto& v : fm.values) v = rng.uniform(-3.0, 3.0);
    const auto got = temporal_mean_pool(fm).values;
    const auto want = oracle::pool(fm);
    for (std::size_t i = 0; i < want.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
  }
  return {worst <= 1e-12, fmt("max abs error %.3g over 1000 tensors", worst)};
}

Outcome gradients() {
  SplitMix64 rng(3);
  double worst = 0.0;
  int checked = 0, skipped = 0;
  while (checked < 100) {
    const std::size_t d = 1 + rng.below(16), h = 1 + rng.below(8), n = 2 + rng.below(4);
    const auto p = oracle::random_params(rng, d, h, n);
    TaskInputs tasks;
    for (int k = 0; k < 4; ++k) tasks.push_back(testkit::random_vector(rng, d));
    if (oracle::kink_margin(p, tasks) < 1e-3) {
      ++skipped;
      continue;
    }
    worst = std::max(worst, oracle::gradient_check(p, tasks, rng.below(n), 1e-5));
    ++checked;
  }
  return {worst <= 1e-6, fmt("max relative error %.3g over 100 instances (%g redrawn near a ReLU kink)", worst, skipped)};
}

Outcome loss_anchors() {
  double worst = 0.0;
  for (std::size_t n = 2; n <= 60; ++n) {
    const MtlnParams p = zero_params(3, 2, n);
    const auto scores = forward(p, TaskInputs(4, FeatureVector{1.0, -2.0, 0.5}));
    const double ln = std::log(static_cast<double>(n));
    for (std::size_t k = 0; k < 4; ++k) worst = std::max(worst, std::abs(task_loss(scores.z(k), n - 1) - ln));
    worst = std::max(worst, std::abs(total_loss(scores, 0) - 4 * ln));
  }
  const auto& run = benchmark(0);
  const double target = 4 * std::log(5.0);
  const double rel = std::abs(run.mtln.initial_loss - target) / target;
  return {worst <= 1e-12 && rel <= 0.02,
          fmt("zero-logit error %.3g; initial loss %.4f vs %.4f", worst, run.mtln.initial_loss, target) +
              fmt(" (%.2f%% off)", 100 * rel)};
}

Outcome geometry() {
  SplitMix64 rng(5);
  double worst = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double scale = std::pow(10.0, rng.uniform(-3.0, 3.0));
    const Vec3 v{scale * rng.uniform(-1, 1), scale * rng.uniform(-1, 1), scale * rng.uniform(-1, 1)};
    const Vec3 back = cylindrical_to_cartesian(cartesian_to_cylindrical(v));
    const double norm = std::max(1.0, std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z));
    worst = std::max({worst, std::abs(back.x - v.x) / norm, std::abs(back.y - v.y) / norm, std::abs(back.z - v.z) / norm});
  }
  int moved_equal = 0;
  const int trials = 50;
  for (int trial = 0; trial < trials; ++trial) {
    const auto seq = testkit::random_sequence(rng, builtin_layout(trial % 2 ? "ntu-25" : "figure2-16"), 2 + rng.below(60));
    auto moved = seq;
    const Vec3 offset{rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10)};
    for (auto& p : moved.positions) p = p + offset;
    moved_equal += generate_clips(seq) == generate_clips(moved);
  }
  return {worst <= 1e-12 && moved_equal == trials,
          fmt("round-trip error %.3g over 1e5 vectors; %g/%g translated sequences give identical clips", worst,
              moved_equal, trials)};
}

Outcome benchmark_accuracy() {
  const auto& run = benchmark(0);
  const double total = run.data_seconds + run.feature_seconds + run.mtln_seconds;
  return {run.mtln.accuracy >= 0.95 && total <= 600.0 && run.mtln.loss_curve.size() <= 35,
          fmt("MTLN accuracy %.2f%% after 35 epochs, %.1f s", 100 * run.mtln.accuracy, total)};
}

Outcome ablation() {
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto& run = benchmark(seed);
    wins += run.mtln.accuracy >= run.frame.accuracy;
    detail += fmt(" %.3f/%.3f", run.mtln.accuracy, run.frame.accuracy);
  }
  return {wins >= 4, fmt("MTLN >= single-frame in %g of 5 seeds (mtln/frame:", wins) + detail + ")"};
}

std::map<std::string, std::string> read_tree(const std::filesystem::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    files[std::filesystem::relative(entry.path(), root).string()] = std::string(std::istreambuf_iterator<char>(in), {});
  }
  return files;
}

Outcome determinism() {
  SynthConfig sc;
  sc.samples_per_class = 6;
  sc.t_min = 10;
  sc.t_max = 30;
  sc.seed = 8;
  PipelineConfig pc;
  pc.clips.size = 64;
  pc.extractor.stage_widths = {8, 16, 32, 32};
  pc.train.hidden = 64;
  pc.train.epochs = 5;
  pc.train.batch_size = 8;
  pc.augment_crops = 2;
  pc.protocol.fold_count = 3;
  const std::vector<Mode> modes{Mode::mtln, Mode::single_frame, Mode::concat, Mode::max_pool};

  testkit::TempDir a("accept_a"), b("accept_b");
  pc.threads = 0;
  const auto ra = write_results(run_experiment(generate_synthetic(sc), pc, modes, {a.path(), false}));
  pc.threads = 1;
  const auto rb = write_results(run_experiment(generate_synthetic(sc), pc, modes, {b.path(), false}));
  const auto fa = read_tree(a.path()), fb = read_tree(b.path());
  std::size_t features = 0, checkpoints = 0;
  for (const auto& [name, _] : fa) {
    features += name.rfind("features", 0) == 0;
    checkpoints += name.rfind("models", 0) == 0;
  }
  const bool same = ra == rb && fa == fb && features > 0 && checkpoints > 0;
  return {same, fmt("%g feature files, %g checkpoints and the report ", features, checkpoints) +
                    (same ? "byte-identical" : "differ")};
}

}  // namespace

int main() {
  report(1, "shape bookkeeping", shapes);
  report(2, "pooling oracle", pooling);
  report(3, "gradient check", gradients);
  report(4, "loss anchors", loss_anchors);
  report(5, "geometry", geometry);
  report(6, "synthetic benchmark", benchmark_accuracy);
  report(7, "ablation ordering", ablation);
  report(8, "determinism", determinism);
  return failures == 0 ? 0 : 1;
}
