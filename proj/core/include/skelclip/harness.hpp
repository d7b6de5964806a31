#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "skelclip/clipgen.hpp"
#include "skelclip/features.hpp"
#include "skelclip/mtln.hpp"
#include "skelclip/skeleton_io.hpp"

namespace skelclip {

// ---- splits ----

enum class ProtocolKind { cross_subject, cross_view, k_fold, train_on_test };

ProtocolKind parse_protocol(std::string_view s);  // cross-subject | cross-view | k-fold | train-on-test
std::string_view to_string(ProtocolKind k);

struct SplitProtocol {
  ProtocolKind kind = ProtocolKind::k_fold;
  std::vector<int> train_ids;  // subject or camera ids used for training
  std::size_t fold_count = 5;
};

/// Record indices of one train/test partition.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// One split for cross-subject/cross-view/train-on-test, `fold_count` splits
/// for k-fold. k-fold uses the records' fold ids when every record has one,
/// otherwise a seeded shuffle cut into contiguous folds.
std::vector<Split> make_splits(const DatasetManifest& manifest, const SplitProtocol& protocol, std::uint64_t seed);

DatasetManifest subset(const DatasetManifest& manifest, std::span<const std::size_t> indices);

// ---- synthetic data ----

struct SynthConfig {
  int n_classes = 5;
  JointLayout layout = builtin_layout("figure2-16");
  std::size_t t_min = 20;
  std::size_t t_max = 60;
  double sigma = 0.05;
  std::size_t samples_per_class = 60;
  std::uint64_t seed = 0;
};

void validate(const SynthConfig& cfg);
SynthConfig parse_synth_config(std::string_view text);

/// A manifest together with the samples of each record (records can hold
/// several samples, e.g. the bodies of a two-person sequence).
struct Dataset {
  DatasetManifest manifest;
  std::vector<std::vector<SkeletonSequence>> samples;
};

/// Every joint follows base_j + A[c][j] * sin(2 pi f_c tau + phi[c][j]) per
/// axis, tau in [0, 1] across the sequence, plus Gaussian noise. Each class
/// moves a random half of the non-reference joints with large amplitude and
/// the rest with small amplitude; reference joints barely move. Records are
/// class-major.
Dataset generate_synthetic(const SynthConfig& cfg);

Dataset load_dataset(const DatasetManifest& manifest, const std::filesystem::path& base_dir);

// ---- pipeline ----

struct PipelineConfig {
  ClipOptions clips;
  ExtractorSpec extractor = default_extractor_spec();
  bool color_clip = false;
  std::size_t augment_crops = 0;  // 0 disables augmentation
  bool test_crop_average = false;  // average test scores over crops instead of the centre crop
  std::uint64_t augment_seed = 0;
  TrainConfig train;
  SplitProtocol protocol;
  std::uint64_t split_seed = 0;
  std::size_t threads = 0;  // 0 = hardware concurrency
};

PipelineConfig parse_pipeline_config(std::string_view text);
std::string write_pipeline_config(const PipelineConfig& cfg);

/// Features of one record: training views (every sample, every crop) and
/// test views (every sample at the centre crop, or every crop when
/// averaging).
struct RecordFeatures {
  std::vector<SampleFeatures> train_views;
  std::vector<SampleFeatures> test_views;
};

std::vector<RecordFeatures> extract_dataset_features(const Dataset& data, const PipelineConfig& cfg);

// ---- evaluation ----

struct FoldResult {
  double accuracy = 0.0;
  std::vector<std::vector<long long>> confusion;  // [true][predicted]
  double initial_loss = 0.0;
  std::vector<double> loss_curve;
  std::vector<double> head_accuracies;  // single-frame mode: one per time-step
};

struct ModeResult {
  Mode mode = Mode::mtln;
  double accuracy = 0.0;  // mean over folds
  std::vector<FoldResult> folds;
};

struct EvalReport {
  std::size_t classes = 0;
  ProtocolKind protocol = ProtocolKind::k_fold;
  std::vector<ModeResult> modes;
};

struct ExperimentOptions {
  std::filesystem::path artifact_dir;  // when set, features and checkpoints are written here
  bool verbose = false;
};

/// Clips -> features -> training -> evaluation on held-out records for each
/// mode. Errors are rethrown prefixed with the failing stage.
EvalReport run_experiment(const Dataset& data, const PipelineConfig& cfg, std::span<const Mode> modes,
                          const ExperimentOptions& options = {});

/// Train on the given records and score the test records; exposed for reuse
/// with precomputed features.
FoldResult evaluate_split(std::span<const RecordFeatures> features, std::span<const int> labels,
                          std::size_t classes, const Split& split, Mode mode, const TrainConfig& train,
                          std::vector<Model>* models = nullptr);

std::string format_percent(double fraction);  // 0.5 -> "50.00%"
std::string render_table(const EvalReport& report);
std::string write_results(const EvalReport& report);
EvalReport parse_results(std::string_view text);

/// Runs `fn(i)` for i in [0, n) on up to `threads` workers. Each index is
/// handled exactly once, so results stored by index are deterministic.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace skelclip
