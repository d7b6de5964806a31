#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "skelclip/features.hpp"

namespace skelclip {

using FeatureVector = std::vector<double>;
/// One input vector per task. MTLN has four tasks; the baselines have one.
using TaskInputs = std::vector<FeatureVector>;

/// Classifier variants: the multi-task network and the three single-task
/// baselines (one time-step, concatenation, element-wise max).
enum class Mode { mtln, single_frame, concat, max_pool };

Mode parse_mode(std::string_view s);  // mtln | frame | concat | maxpool
std::string_view to_string(Mode m);

/// Shared FC-ReLU-FC weights. w1 is d x h and w2 is h x n, both row-major.
struct MtlnParams {
  std::size_t input_dim = 0;
  std::size_t hidden = 0;
  std::size_t classes = 0;
  std::vector<double> w1, b1, w2, b2;

  friend bool operator==(const MtlnParams&, const MtlnParams&) = default;
};

void validate(const MtlnParams& p);
MtlnParams zero_params(std::size_t input_dim, std::size_t hidden, std::size_t classes);
/// Default scale of the output layer relative to the Glorot bound.
inline constexpr double kDefaultOutputGain = 0.01;

/// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero. The
/// output layer bound is multiplied by `output_gain`.
MtlnParams init_params(std::size_t input_dim, std::size_t hidden, std::size_t classes, std::uint64_t seed,
                       double output_gain = kDefaultOutputGain);

struct TaskScores {
  std::size_t tasks = 0;
  std::size_t classes = 0;
  std::vector<double> logits;
  std::vector<double> probabilities;

  std::span<const double> z(std::size_t k) const { return {logits.data() + k * classes, classes}; }
  std::span<const double> prob(std::size_t k) const { return {probabilities.data() + k * classes, classes}; }
};

double log_sum_exp(std::span<const double> z);
std::vector<double> softmax(std::span<const double> z);

/// z_k = W2^T relu(W1^T f_k + b1) + b2 for every task, with shared weights.
TaskScores forward(const MtlnParams& p, std::span<const FeatureVector> tasks);
TaskScores forward(const MtlnParams& p, const SampleFeatures& features);

/// Cross-entropy of one task: sum_i y_i (log sum_j exp z_j - z_i).
double task_loss(std::span<const double> z, std::span<const double> y_onehot);
double task_loss(std::span<const double> z, std::size_t label);
/// Sum of the per-task losses.
double total_loss(const TaskScores& scores, std::span<const double> y_onehot);
double total_loss(const TaskScores& scores, std::size_t label);

struct LossAndGradient {
  double loss = 0.0;
  MtlnParams gradient;  // same shapes as the parameters
};

/// Exact gradient of the summed task loss. The ReLU derivative at 0 is 0.
LossAndGradient backward(const MtlnParams& p, std::span<const FeatureVector> tasks, std::size_t label);
LossAndGradient backward(const MtlnParams& p, std::span<const FeatureVector> tasks,
                         std::span<const double> y_onehot);

struct Prediction {
  std::size_t label = 0;
  std::vector<double> probabilities;  // averaged over tasks (and samples)
};

/// Mean of the task softmax rows; argmax with the lowest index winning ties.
Prediction predict(const MtlnParams& p, std::span<const FeatureVector> tasks);
/// Averages over all samples and tasks. Throws on an empty list.
Prediction predict_multi_sample(const MtlnParams& p, std::span<const TaskInputs> samples);

std::size_t argmax(std::span<const double> v);

/// Builds the task inputs a mode consumes from the four time-step vectors.
/// `frame_index` selects the time-step for single_frame.
TaskInputs make_task_inputs(Mode mode, std::span<const FeatureVector> steps, std::size_t frame_index = 0);
TaskInputs make_task_inputs(Mode mode, const SampleFeatures& features, std::size_t frame_index = 0);
std::size_t mode_input_dim(Mode mode, std::size_t step_dim);

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 100;
  std::size_t epochs = 35;
  std::size_t hidden = 512;
  double output_gain = kDefaultOutputGain;
  std::uint64_t seed = 0;
  Mode mode = Mode::mtln;
};

void validate(const TrainConfig& cfg);

struct TrainSample {
  TaskInputs tasks;
  std::size_t label = 0;
};

struct TrainResult {
  MtlnParams params;
  double initial_loss = 0.0;        // mean total loss before the first update
  std::vector<double> epoch_losses;  // mean total loss seen during each epoch
};

/// Mini-batch SGD on the batch mean of the summed task loss, shuffling the
/// data each epoch. Throws DivergenceError on a non-finite loss.
TrainResult train(std::span<const TrainSample> data, std::size_t classes, const TrainConfig& cfg);

/// Trained classifier(s) for one mode. single_frame holds one head per
/// time-step; the other modes hold one.
struct Model {
  Mode mode = Mode::mtln;
  std::uint64_t seed = 0;
  std::vector<MtlnParams> heads;

  friend bool operator==(const Model&, const Model&) = default;
};

// Checkpoint: "SKTC", u8 version, u32 LE header length, header text
// (mode, d, h, n_classes, seed, heads), then per head the tensors W1, b1,
// W2, b2, each as u16 LE name length, name, SKTF tensor (f64).
std::string encode_model(const Model& model);
Model decode_model(std::string_view bytes);
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace skelclip
