#include "skelclip/clipgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "skelclip/error.hpp"
#include "skelclip/rng.hpp"

namespace skelclip {
namespace {

double channel_value(const Vec3& v, Channel c, CoordinateSystem coords) {
  if (coords == CoordinateSystem::cartesian) {
    switch (c) {
      case Channel::radius: return v.x;
      case Channel::azimuth: return v.y;
      case Channel::height: return v.z;
    }
  }
  const Cylindrical cyl = cartesian_to_cylindrical(v);
  switch (c) {
    case Channel::radius: return cyl.radius;
    case Channel::azimuth: return cyl.azimuth;
    case Channel::height: return cyl.height;
  }
  return 0.0;
}

Grid<double> transpose(const Grid<double>& g) {
  Grid<double> out(g.cols, g.rows);
  for (std::size_t r = 0; r < g.rows; ++r)
    for (std::size_t c = 0; c < g.cols; ++c) out(c, r) = g(r, c);
  return out;
}

std::uint8_t to_pixel(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
}

}  // namespace

CoordinateSystem parse_coordinate_system(std::string_view s) {
  if (s == "cylindrical") return CoordinateSystem::cylindrical;
  if (s == "cartesian") return CoordinateSystem::cartesian;
  throw ConfigError("unknown coordinate system '" + std::string(s) + "'");
}

ScaleScope parse_scale_scope(std::string_view s) {
  if (s == "frame") return ScaleScope::per_frame;
  if (s == "clip") return ScaleScope::per_channel_clip;
  throw ConfigError("unknown scaling scope '" + std::string(s) + "' (expected frame or clip)");
}

std::string_view to_string(CoordinateSystem c) { return c == CoordinateSystem::cylindrical ? "cylindrical" : "cartesian"; }
std::string_view to_string(ScaleScope s) { return s == ScaleScope::per_frame ? "frame" : "clip"; }
std::string_view to_string(Channel c) {
  switch (c) {
    case Channel::radius: return "radius";
    case Channel::azimuth: return "azimuth";
    case Channel::height: return "height";
  }
  return "?";
}

Cylindrical cartesian_to_cylindrical(const Vec3& v) {
  Cylindrical c;
  c.radius = std::hypot(v.x, v.y);
  c.height = v.z;
  if (c.radius > 0.0) {
    c.azimuth = std::atan2(v.y, v.x);
    if (c.azimuth <= -std::numbers::pi) c.azimuth = std::numbers::pi;
  }
  return c;
}

Vec3 cylindrical_to_cartesian(const Cylindrical& c) {
  return {c.radius * std::cos(c.azimuth), c.radius * std::sin(c.azimuth), c.height};
}

Grid<Vec3> relative_positions(const SkeletonSequence& seq, std::size_t ref) {
  const std::size_t m = seq.joint_count();
  if (ref >= m) throw DimensionError("reference joint " + std::to_string(ref) + " not in layout '" + seq.layout.name + "'");
  Grid<Vec3> out(m - 1, seq.frame_count);
  std::size_t row = 0;
  for (std::size_t joint : seq.layout.chain_order) {
    if (joint == ref) continue;
    for (std::size_t f = 0; f < seq.frame_count; ++f) out(row, f) = seq.at(f, joint) - seq.at(f, ref);
    ++row;
  }
  return out;
}

std::array<RelativeArray, kChannelCount> split_channels(const Grid<Vec3>& relative, std::size_t reference_index,
                                                        CoordinateSystem coords) {
  std::array<RelativeArray, kChannelCount> out;
  for (std::size_t c = 0; c < kChannelCount; ++c) {
    out[c].reference_index = reference_index;
    out[c].channel = static_cast<Channel>(c);
    out[c].values = Grid<double>(relative.rows, relative.cols);
  }
  for (std::size_t i = 0; i < relative.data.size(); ++i) {
    const Vec3& v = relative.data[i];
    if (coords == CoordinateSystem::cylindrical) {
      const Cylindrical cyl = cartesian_to_cylindrical(v);
      out[0].values.data[i] = cyl.radius;
      out[1].values.data[i] = cyl.azimuth;
      out[2].values.data[i] = cyl.height;
    } else {
      for (std::size_t c = 0; c < kChannelCount; ++c)
        out[c].values.data[i] = channel_value(v, static_cast<Channel>(c), coords);
    }
  }
  return out;
}

ValueRange value_range(const Grid<double>& values) {
  if (values.data.empty()) return {};
  const auto [lo, hi] = std::minmax_element(values.data.begin(), values.data.end());
  return {*lo, *hi};
}

GrayFrame scale_to_gray(const RelativeArray& arr, ValueRange range) {
  GrayFrame img;
  img.reference_index = arr.reference_index;
  img.channel = arr.channel;
  img.pixels = Grid<std::uint8_t>(arr.values.rows, arr.values.cols, 0);
  const double span = range.max - range.min;
  if (!(span > 0.0)) return img;
  for (std::size_t i = 0; i < arr.values.data.size(); ++i)
    img.pixels.data[i] = to_pixel(255.0 * (arr.values.data[i] - range.min) / span);
  return img;
}

GrayFrame scale_to_gray(const RelativeArray& arr) { return scale_to_gray(arr, value_range(arr.values)); }

std::array<GrayFrame, kReferenceJointCount> scale_clip_to_gray(
    std::span<const RelativeArray, kReferenceJointCount> arrays, ScaleScope scope) {
  std::array<GrayFrame, kReferenceJointCount> out;
  if (scope == ScaleScope::per_frame) {
    for (std::size_t r = 0; r < kReferenceJointCount; ++r) out[r] = scale_to_gray(arrays[r]);
    return out;
  }
  ValueRange common = value_range(arrays[0].values);
  for (const auto& a : arrays) {
    const auto range = value_range(a.values);
    common.min = std::min(common.min, range.min);
    common.max = std::max(common.max, range.max);
  }
  for (std::size_t r = 0; r < kReferenceJointCount; ++r) out[r] = scale_to_gray(arrays[r], common);
  return out;
}

GrayFrame resize_bilinear(const GrayFrame& img, std::size_t out_h, std::size_t out_w) {
  if (out_h < 1 || out_w < 1) throw DimensionError("resize target must be at least 1x1");
  const std::size_t in_h = img.height();
  const std::size_t in_w = img.width();
  if (in_h < 1 || in_w < 1) throw DimensionError("cannot resize an empty image");

  struct Tap {
    std::size_t lo, hi;
    double w;
  };
  auto taps = [](std::size_t src, std::size_t dst) {
    std::vector<Tap> out(dst);
    const double scale = static_cast<double>(src) / static_cast<double>(dst);
    const double max_coord = static_cast<double>(src - 1);
    for (std::size_t d = 0; d < dst; ++d) {
      const double s = std::clamp((static_cast<double>(d) + 0.5) * scale - 0.5, 0.0, max_coord);
      const auto lo = static_cast<std::size_t>(std::floor(s));
      out[d] = {lo, std::min(lo + 1, src - 1), s - static_cast<double>(lo)};
    }
    return out;
  };
  const auto ys = taps(in_h, out_h);
  const auto xs = taps(in_w, out_w);

  GrayFrame out;
  out.reference_index = img.reference_index;
  out.channel = img.channel;
  out.pixels = Grid<std::uint8_t>(out_h, out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    const auto [y0, y1, wy] = ys[y];
    for (std::size_t x = 0; x < out_w; ++x) {
      const auto [x0, x1, wx] = xs[x];
      const double top = (1.0 - wx) * img.pixels(y0, x0) + wx * img.pixels(y0, x1);
      const double bottom = (1.0 - wx) * img.pixels(y1, x0) + wx * img.pixels(y1, x1);
      out.pixels(y, x) = to_pixel((1.0 - wy) * top + wy * bottom);
    }
  }
  return out;
}

std::array<std::array<GrayFrame, kReferenceJointCount>, kChannelCount> clip_frames_unresized(
    const SkeletonSequence& seq, const ClipOptions& options) {
  validate(seq);
  // arrays[c][r]: channel c relative to reference r, transposed to t x (m-1).
  std::array<std::array<RelativeArray, kReferenceJointCount>, kChannelCount> arrays;
  for (std::size_t r = 0; r < kReferenceJointCount; ++r) {
    const auto rel = relative_positions(seq, seq.layout.reference_joints[r]);
    auto channels = split_channels(rel, r, options.coords);
    for (std::size_t c = 0; c < kChannelCount; ++c) {
      channels[c].values = transpose(channels[c].values);
      arrays[c][r] = std::move(channels[c]);
    }
  }
  std::array<std::array<GrayFrame, kReferenceJointCount>, kChannelCount> frames;
  for (std::size_t c = 0; c < kChannelCount; ++c)
    frames[c] = scale_clip_to_gray(std::span<const RelativeArray, kReferenceJointCount>(arrays[c]), options.scope);
  return frames;
}

ClipSet generate_clips(const SkeletonSequence& seq, const ClipOptions& options) {
  if (options.size < 1) throw DimensionError("clip size must be >= 1");
  const auto frames = clip_frames_unresized(seq, options);
  ClipSet cs;
  cs.size = options.size;
  for (std::size_t c = 0; c < kChannelCount; ++c)
    for (std::size_t r = 0; r < kReferenceJointCount; ++r)
      cs.clips[c][r] = resize_bilinear(frames[c][r], options.size, options.size);
  return cs;
}

GrayFrame crop(const GrayFrame& img, std::size_t dy, std::size_t dx, std::size_t h, std::size_t w) {
  if (dy + h > img.height() || dx + w > img.width()) throw DimensionError("crop window outside image");
  GrayFrame out;
  out.reference_index = img.reference_index;
  out.channel = img.channel;
  out.pixels = Grid<std::uint8_t>(h, w);
  for (std::size_t y = 0; y < h; ++y)
    std::copy_n(&img.pixels(dy + y, dx), w, &out.pixels(y, 0));
  return out;
}

namespace {

ClipSet resized(const ClipSet& cs, std::size_t padded) {
  if (padded < cs.size) throw DimensionError("augmentation resize smaller than the clip size");
  ClipSet big;
  big.size = padded;
  for (std::size_t c = 0; c < kChannelCount; ++c)
    for (std::size_t r = 0; r < kReferenceJointCount; ++r) big.clips[c][r] = resize_bilinear(cs.clips[c][r], padded, padded);
  return big;
}

ClipSet window(const ClipSet& big, std::size_t dy, std::size_t dx, std::size_t size) {
  ClipSet out;
  out.size = size;
  for (std::size_t c = 0; c < kChannelCount; ++c)
    for (std::size_t r = 0; r < kReferenceJointCount; ++r) out.clips[c][r] = crop(big.clips[c][r], dy, dx, size, size);
  return out;
}

}  // namespace

std::vector<ClipSet> augment_crops(const ClipSet& cs, std::size_t n, std::uint64_t seed, std::size_t padded) {
  if (n < 1) throw ConfigError("augment_crops needs n >= 1");
  const ClipSet big = resized(cs, padded);
  const std::uint64_t offsets = padded - cs.size + 1;
  SplitMix64 rng(seed);
  std::vector<ClipSet> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto dx = static_cast<std::size_t>(rng.below(offsets));
    const auto dy = static_cast<std::size_t>(rng.below(offsets));
    out.push_back(window(big, dy, dx, cs.size));
  }
  return out;
}

ClipSet center_crop(const ClipSet& cs, std::size_t padded) {
  const ClipSet big = resized(cs, padded);
  const std::size_t offset = (padded - cs.size) / 2;
  return window(big, offset, offset, cs.size);
}

std::string encode_pgm(const GrayFrame& img) {
  std::string out = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.pixels.data.data()), img.pixels.data.size());
  return out;
}

Tensor clipset_to_tensor(const ClipSet& cs) {
  Tensor t;
  t.dtype = DType::u8;
  const auto s = static_cast<std::uint32_t>(cs.size);
  t.shape = {static_cast<std::uint32_t>(kChannelCount), static_cast<std::uint32_t>(kReferenceJointCount), s, s};
  t.values.reserve(t.element_count());
  for (const auto& clip : cs.clips)
    for (const auto& frame : clip)
      for (auto p : frame.pixels.data) t.values.push_back(p);
  return t;
}

ClipSet clipset_from_tensor(const Tensor& t) {
  if (t.dtype != DType::u8 || t.shape.size() != 4 || t.shape[0] != kChannelCount ||
      t.shape[1] != kReferenceJointCount || t.shape[2] != t.shape[3])
    throw FormatError("clip tensor must be u8 with shape (3, 4, S, S)");
  ClipSet cs;
  cs.size = t.shape[2];
  std::size_t i = 0;
  for (std::size_t c = 0; c < kChannelCount; ++c)
    for (std::size_t r = 0; r < kReferenceJointCount; ++r) {
      GrayFrame& f = cs.clips[c][r];
      f.reference_index = r;
      f.channel = static_cast<Channel>(c);
      f.pixels = Grid<std::uint8_t>(cs.size, cs.size);
      for (auto& p : f.pixels.data) p = static_cast<std::uint8_t>(t.values[i++]);
    }
  return cs;
}

}  // namespace skelclip
