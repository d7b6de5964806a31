#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "skelclip/clipgen.hpp"
#include "skelclip/tensor_io.hpp"

namespace skelclip {

/// H x W x C activations, stored map-major: values[(k * H + i) * W + j].
struct FeatureMaps {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> values;

  FeatureMaps() = default;
  FeatureMaps(std::size_t h, std::size_t w, std::size_t c) : height(h), width(w), channels(c), values(h * w * c, 0.0) {}

  double& at(std::size_t i, std::size_t j, std::size_t k) { return values[(k * height + i) * width + j]; }
  double at(std::size_t i, std::size_t j, std::size_t k) const { return values[(k * height + i) * width + j]; }

  friend bool operator==(const FeatureMaps&, const FeatureMaps&) = default;
};

void validate(const FeatureMaps& fm);

/// Row-pooled features, map-major: values[k * width + j].
struct PooledFeature {
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> values;
};

/// Concatenated (radius, azimuth, height) pooled features of one reference
/// joint; length 3 * W * C.
struct TimeStepFeature {
  std::size_t time_step = 0;
  std::vector<double> values;
};

using SampleFeatures = std::array<TimeStepFeature, kReferenceJointCount>;

enum class ExtractorKind { builtin, precomputed };

ExtractorKind parse_extractor_kind(std::string_view s);

struct ExtractorSpec {
  ExtractorKind kind = ExtractorKind::builtin;
  std::size_t input_channels = 1;
  std::vector<std::size_t> stage_widths = {8, 16, 32, 64};
  std::uint64_t seed = 0;

  std::size_t channels() const { return stage_widths.empty() ? 0 : stage_widths.back(); }
};

/// Four stages (8, 16, 32, C).
ExtractorSpec default_extractor_spec(std::size_t channels = 64, std::uint64_t seed = 0, std::size_t input_channels = 1);

/// Frozen convolutional feature extractor. Each stage is a 3x3 convolution
/// (zero padding 1, stride 1), ReLU and 2x2/2 max pooling. Weights are drawn
/// once from SplitMix64(seed) normals scaled by sqrt(2 / fan_in), in
/// (stage, out, in, ky, kx) order; biases are zero. Each output pixel is
/// accumulated over (in, ky, kx) in ascending order, so results are
/// bit-reproducible.
class FrozenExtractor {
 public:
  struct Stage {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::vector<double> weights;  // [out][in][3][3]
    std::vector<double> bias;     // [out]
  };

  explicit FrozenExtractor(ExtractorSpec spec);

  const ExtractorSpec& spec() const { return spec_; }
  const std::vector<Stage>& stages() const { return stages_; }

  /// Single-channel frame; pixels are divided by 255.
  FeatureMaps extract(const GrayFrame& frame) const;
  /// One frame per input channel, all the same size.
  FeatureMaps extract(std::span<const GrayFrame* const> planes) const;
  /// Raw planes [in][h][w] in any real range.
  FeatureMaps extract_planes(std::size_t h, std::size_t w, std::span<const double> planes) const;

 private:
  ExtractorSpec spec_;
  std::vector<Stage> stages_;
};

FeatureMaps builtin_extract(const GrayFrame& frame, const ExtractorSpec& spec);

/// y[k][j] = mean over rows i of max(0, x[i][j][k]).
PooledFeature temporal_mean_pool(const FeatureMaps& fm);

using ClipFeatureMaps = std::array<std::array<FeatureMaps, kReferenceJointCount>, kChannelCount>;

/// Pools every map and concatenates the three channels per reference joint.
SampleFeatures build_time_step_features(const ClipFeatureMaps& maps);
SampleFeatures build_time_step_features(const ClipSet& cs, const FrozenExtractor& extractor);

/// Variant that stacks the three channels of each time-step as one
/// three-channel image; requires an extractor with three input channels.
std::array<PooledFeature, kReferenceJointCount> build_color_clip_features(const ClipSet& cs,
                                                                          const FrozenExtractor& extractor);

/// Feature maps on disk: tensor of shape (H, W, C). Stored as f64 so a
/// round trip is exact; f32 files are accepted on load.
Tensor feature_maps_to_tensor(const FeatureMaps& fm, DType dtype = DType::f64);
FeatureMaps feature_maps_from_tensor(const Tensor& t);
void store_feature_maps(const FeatureMaps& fm, const std::filesystem::path& path);
FeatureMaps load_feature_maps(const std::filesystem::path& path);

/// Time-step features of one sample: tensor of shape (4, D), f64.
Tensor sample_features_to_tensor(const SampleFeatures& f);
SampleFeatures sample_features_from_tensor(const Tensor& t);

}  // namespace skelclip
