#include "skelclip/features.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "skelclip/error.hpp"
#include "skelclip/rng.hpp"

namespace skelclip {
namespace {

// 3x3 convolution (zero pad 1) + ReLU + 2x2 max pool for one stage.
// `in` is [in_channels][h][w]; returns [out_channels][h/2][w/2].
std::vector<double> run_stage(const FrozenExtractor::Stage& stage, std::size_t h, std::size_t w,
                              std::span<const double> in) {
  const std::size_t oh = h / 2;
  const std::size_t ow = w / 2;
  std::vector<double> out(stage.out_channels * oh * ow);
  std::vector<double> rows(2 * w);

  for (std::size_t o = 0; o < stage.out_channels; ++o) {
    const double* wo = stage.weights.data() + o * stage.in_channels * 9;
    for (std::size_t py = 0; py < oh; ++py) {
      for (std::size_t half = 0; half < 2; ++half) {
        const std::size_t y = 2 * py + half;
        double* acc = rows.data() + half * w;
        std::fill_n(acc, w, stage.bias[o]);
        for (std::size_t c = 0; c < stage.in_channels; ++c) {
          const double* plane = in.data() + c * h * w;
          const double* wc = wo + c * 9;
          for (std::size_t ky = 0; ky < 3; ++ky) {
            if (y + ky < 1 || y + ky > h) continue;
            const double* src = plane + (y + ky - 1) * w;
            for (std::size_t kx = 0; kx < 3; ++kx) {
              const double wt = wc[ky * 3 + kx];
              // out x reads src x + kx - 1.
              const std::size_t x_begin = kx == 0 ? 1 : 0;
              const std::size_t x_end = kx == 2 ? w - 1 : w;
              const double* s = src + kx;
              for (std::size_t x = x_begin; x < x_end; ++x) acc[x] += wt * s[x - 1];
            }
          }
        }
      }
      double* dst = out.data() + (o * oh + py) * ow;
      const double* r0 = rows.data();
      const double* r1 = rows.data() + w;
      for (std::size_t px = 0; px < ow; ++px) {
        const double m = std::max(std::max(r0[2 * px], r0[2 * px + 1]), std::max(r1[2 * px], r1[2 * px + 1]));
        dst[px] = m > 0.0 ? m : 0.0;
      }
    }
  }
  return out;
}

std::size_t temporal_width(const FeatureMaps& fm) { return fm.width * fm.channels; }

}  // namespace

void validate(const FeatureMaps& fm) {
  if (fm.height < 1 || fm.width < 1 || fm.channels < 1) throw DimensionError("feature maps need H, W, C >= 1");
  if (fm.values.size() != fm.height * fm.width * fm.channels) throw DimensionError("feature map size mismatch");
  for (double v : fm.values)
    if (!std::isfinite(v)) throw DimensionError("non-finite feature map value");
}

ExtractorKind parse_extractor_kind(std::string_view s) {
  if (s == "builtin") return ExtractorKind::builtin;
  if (s == "precomputed") return ExtractorKind::precomputed;
  throw ConfigError("unknown extractor '" + std::string(s) + "'");
}

ExtractorSpec default_extractor_spec(std::size_t channels, std::uint64_t seed, std::size_t input_channels) {
  ExtractorSpec spec;
  spec.stage_widths = {8, 16, 32, channels};
  spec.seed = seed;
  spec.input_channels = input_channels;
  return spec;
}

FrozenExtractor::FrozenExtractor(ExtractorSpec spec) : spec_(std::move(spec)) {
  if (spec_.kind != ExtractorKind::builtin) throw ConfigError("only the builtin extractor has weights");
  if (spec_.input_channels < 1) throw ConfigError("extractor needs at least one input channel");
  if (spec_.stage_widths.empty()) throw ConfigError("extractor needs at least one stage");
  SplitMix64 rng(spec_.seed);
  std::size_t in = spec_.input_channels;
  for (std::size_t width : spec_.stage_widths) {
    if (width < 1) throw ConfigError("stage width must be >= 1");
    Stage stage;
    stage.in_channels = in;
    stage.out_channels = width;
    stage.weights.resize(width * in * 9);
    stage.bias.assign(width, 0.0);
    const double scale = std::sqrt(2.0 / static_cast<double>(in * 9));
    for (auto& wt : stage.weights) wt = rng.normal() * scale;
    stages_.push_back(std::move(stage));
    in = width;
  }
}

FeatureMaps FrozenExtractor::extract_planes(std::size_t h, std::size_t w, std::span<const double> planes) const {
  if (planes.size() != spec_.input_channels * h * w)
    throw DimensionError("extractor expects " + std::to_string(spec_.input_channels) + " input planes");
  const std::size_t factor = std::size_t{1} << stages_.size();
  if (h < factor || w < factor || h % factor != 0 || w % factor != 0)
    throw DimensionError("input " + std::to_string(h) + "x" + std::to_string(w) + " cannot be halved " +
                         std::to_string(stages_.size()) + " times");
  std::vector<double> current(planes.begin(), planes.end());
  for (const auto& stage : stages_) {
    current = run_stage(stage, h, w, current);
    h /= 2;
    w /= 2;
  }
  FeatureMaps fm;
  fm.height = h;
  fm.width = w;
  fm.channels = stages_.back().out_channels;
  fm.values = std::move(current);
  return fm;
}

FeatureMaps FrozenExtractor::extract(std::span<const GrayFrame* const> planes) const {
  if (planes.empty()) throw DimensionError("no input planes");
  const std::size_t h = planes[0]->height();
  const std::size_t w = planes[0]->width();
  std::vector<double> data;
  data.reserve(planes.size() * h * w);
  for (const GrayFrame* p : planes) {
    if (p->height() != h || p->width() != w) throw DimensionError("input planes differ in size");
    for (auto px : p->pixels.data) data.push_back(static_cast<double>(px) / 255.0);
  }
  return extract_planes(h, w, data);
}

FeatureMaps FrozenExtractor::extract(const GrayFrame& frame) const {
  const GrayFrame* planes[] = {&frame};
  return extract(planes);
}

FeatureMaps builtin_extract(const GrayFrame& frame, const ExtractorSpec& spec) {
  return FrozenExtractor(spec).extract(frame);
}

PooledFeature temporal_mean_pool(const FeatureMaps& fm) {
  validate(fm);
  PooledFeature out;
  out.width = fm.width;
  out.channels = fm.channels;
  out.values.assign(fm.width * fm.channels, 0.0);
  const double rows = static_cast<double>(fm.height);
  for (std::size_t k = 0; k < fm.channels; ++k) {
    double* y = out.values.data() + k * fm.width;
    for (std::size_t i = 0; i < fm.height; ++i)
      for (std::size_t j = 0; j < fm.width; ++j) y[j] += std::max(0.0, fm.at(i, j, k));
    for (std::size_t j = 0; j < fm.width; ++j) y[j] /= rows;
  }
  return out;
}

SampleFeatures build_time_step_features(const ClipFeatureMaps& maps) {
  SampleFeatures out;
  for (std::size_t r = 0; r < kReferenceJointCount; ++r) {
    out[r].time_step = r;
    for (std::size_t c = 0; c < kChannelCount; ++c) {
      const auto pooled = temporal_mean_pool(maps[c][r]);
      if (pooled.values.size() != temporal_width(maps[0][0]))
        throw DimensionError("feature maps of one sample differ in shape");
      out[r].values.insert(out[r].values.end(), pooled.values.begin(), pooled.values.end());
    }
  }
  return out;
}

SampleFeatures build_time_step_features(const ClipSet& cs, const FrozenExtractor& extractor) {
  ClipFeatureMaps maps;
  for (std::size_t c = 0; c < kChannelCount; ++c)
    for (std::size_t r = 0; r < kReferenceJointCount; ++r) maps[c][r] = extractor.extract(cs.clips[c][r]);
  return build_time_step_features(maps);
}

std::array<PooledFeature, kReferenceJointCount> build_color_clip_features(const ClipSet& cs,
                                                                          const FrozenExtractor& extractor) {
  if (extractor.spec().input_channels != kChannelCount)
    throw ConfigError("colour-clip features need an extractor with 3 input channels");
  std::array<PooledFeature, kReferenceJointCount> out;
  for (std::size_t r = 0; r < kReferenceJointCount; ++r) {
    const GrayFrame* planes[] = {&cs.clips[0][r], &cs.clips[1][r], &cs.clips[2][r]};
    out[r] = temporal_mean_pool(extractor.extract(planes));
  }
  return out;
}

Tensor feature_maps_to_tensor(const FeatureMaps& fm, DType dtype) {
  validate(fm);
  if (dtype == DType::u8) throw FormatError("feature maps must be stored as floats");
  Tensor t;
  t.dtype = dtype;
  t.shape = {static_cast<std::uint32_t>(fm.height), static_cast<std::uint32_t>(fm.width),
             static_cast<std::uint32_t>(fm.channels)};
  t.values.reserve(fm.values.size());
  for (std::size_t i = 0; i < fm.height; ++i)
    for (std::size_t j = 0; j < fm.width; ++j)
      for (std::size_t k = 0; k < fm.channels; ++k) t.values.push_back(fm.at(i, j, k));
  return t;
}

FeatureMaps feature_maps_from_tensor(const Tensor& t) {
  if (t.dtype == DType::u8) throw FormatError("feature maps must be f32 or f64");
  if (t.shape.size() != 3) throw FormatError("feature maps need a rank-3 (H, W, C) tensor");
  if (t.values.size() != t.element_count()) throw FormatError("feature map payload size mismatch");
  FeatureMaps fm(t.shape[0], t.shape[1], t.shape[2]);
  std::size_t n = 0;
  for (std::size_t i = 0; i < fm.height; ++i)
    for (std::size_t j = 0; j < fm.width; ++j)
      for (std::size_t k = 0; k < fm.channels; ++k) fm.at(i, j, k) = t.values[n++];
  validate(fm);
  return fm;
}

void store_feature_maps(const FeatureMaps& fm, const std::filesystem::path& path) {
  save_tensor(path, feature_maps_to_tensor(fm));
}

FeatureMaps load_feature_maps(const std::filesystem::path& path) {
  return feature_maps_from_tensor(load_tensor(path));
}

Tensor sample_features_to_tensor(const SampleFeatures& f) {
  const std::size_t d = f[0].values.size();
  Tensor t;
  t.dtype = DType::f64;
  t.shape = {static_cast<std::uint32_t>(kReferenceJointCount), static_cast<std::uint32_t>(d)};
  for (const auto& step : f) {
    if (step.values.size() != d) throw DimensionError("time-step features differ in length");
    t.values.insert(t.values.end(), step.values.begin(), step.values.end());
  }
  return t;
}

SampleFeatures sample_features_from_tensor(const Tensor& t) {
  if (t.dtype == DType::u8 || t.shape.size() != 2 || t.shape[0] != kReferenceJointCount)
    throw FormatError("sample features need a float tensor of shape (4, D)");
  SampleFeatures f;
  const std::size_t d = t.shape[1];
  for (std::size_t r = 0; r < kReferenceJointCount; ++r) {
    f[r].time_step = r;
    f[r].values.assign(t.values.begin() + static_cast<std::ptrdiff_t>(r * d),
                       t.values.begin() + static_cast<std::ptrdiff_t>((r + 1) * d));
  }
  return f;
}

}  // namespace skelclip
