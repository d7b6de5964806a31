#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "skelclip/skeleton_io.hpp"
#include "skelclip/tensor_io.hpp"

namespace skelclip {

/// Dense row-major 2D grid.
template <typename T>
struct Grid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), data(r * c, fill) {}

  T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  friend bool operator==(const Grid&, const Grid&) = default;
};

/// The three coordinate channels. In Cartesian mode the slots hold x, y, z.
enum class Channel : std::uint8_t { radius = 0, azimuth = 1, height = 2 };
inline constexpr std::size_t kChannelCount = 3;

enum class CoordinateSystem { cylindrical, cartesian };
enum class ScaleScope { per_frame, per_channel_clip };

CoordinateSystem parse_coordinate_system(std::string_view s);
ScaleScope parse_scale_scope(std::string_view s);
std::string_view to_string(CoordinateSystem c);
std::string_view to_string(ScaleScope s);
std::string_view to_string(Channel c);

struct Cylindrical {
  double radius = 0.0;
  double azimuth = 0.0;  // (-pi, pi]; 0 when radius == 0
  double height = 0.0;
};

Cylindrical cartesian_to_cylindrical(const Vec3& v);
Vec3 cylindrical_to_cartesian(const Cylindrical& c);

/// Positions of all non-reference joints relative to joint `ref`, one row per
/// joint in chain order (reference removed) and one column per frame.
Grid<Vec3> relative_positions(const SkeletonSequence& seq, std::size_t ref);

/// One coordinate channel of a relative-position grid: (m-1) x t.
struct RelativeArray {
  std::size_t reference_index = 0;  // 0..3, position in the layout's reference list
  Channel channel = Channel::radius;
  Grid<double> values;
};

std::array<RelativeArray, kChannelCount> split_channels(const Grid<Vec3>& relative, std::size_t reference_index,
                                                        CoordinateSystem coords);

struct GrayFrame {
  Grid<std::uint8_t> pixels;
  std::size_t reference_index = 0;
  Channel channel = Channel::radius;

  std::size_t height() const { return pixels.rows; }
  std::size_t width() const { return pixels.cols; }

  friend bool operator==(const GrayFrame&, const GrayFrame&) = default;
};

struct ValueRange {
  double min = 0.0;
  double max = 0.0;
};

ValueRange value_range(const Grid<double>& values);

/// Linear map of [range.min, range.max] onto [0, 255], rounded half away from
/// zero. A degenerate range yields an all-zero image. Orientation is kept.
GrayFrame scale_to_gray(const RelativeArray& arr, ValueRange range);
GrayFrame scale_to_gray(const RelativeArray& arr);  // per-frame scope

/// Scales the four arrays of one channel, either each on its own range or all
/// on their common range.
std::array<GrayFrame, kReferenceJointCount> scale_clip_to_gray(
    std::span<const RelativeArray, kReferenceJointCount> arrays, ScaleScope scope);

/// Bilinear resize with half-pixel centres, clamped at the borders.
GrayFrame resize_bilinear(const GrayFrame& img, std::size_t out_h, std::size_t out_w);

/// Three clips (radius, azimuth, height), each of four frames indexed by
/// reference joint, all size x size.
struct ClipSet {
  std::size_t size = 0;
  std::array<std::array<GrayFrame, kReferenceJointCount>, kChannelCount> clips;

  const GrayFrame& frame(Channel c, std::size_t ref) const { return clips[static_cast<std::size_t>(c)][ref]; }

  friend bool operator==(const ClipSet&, const ClipSet&) = default;
};

struct ClipOptions {
  CoordinateSystem coords = CoordinateSystem::cylindrical;
  ScaleScope scope = ScaleScope::per_frame;
  std::size_t size = 224;
};

/// Gray frames before resizing: rows = time (t), columns = joints (m-1).
std::array<std::array<GrayFrame, kReferenceJointCount>, kChannelCount> clip_frames_unresized(
    const SkeletonSequence& seq, const ClipOptions& options);

ClipSet generate_clips(const SkeletonSequence& seq, const ClipOptions& options = {});

inline constexpr std::size_t kAugmentResize = 250;

/// Resizes every frame to `padded` x `padded` and cuts `n` random windows of
/// the original size, one shared offset per ClipSet.
std::vector<ClipSet> augment_crops(const ClipSet& cs, std::size_t n, std::uint64_t seed,
                                   std::size_t padded = kAugmentResize);

/// The deterministic centre window of the same resize.
ClipSet center_crop(const ClipSet& cs, std::size_t padded = kAugmentResize);

/// Window of `img` at (dy, dx) with the given size.
GrayFrame crop(const GrayFrame& img, std::size_t dy, std::size_t dx, std::size_t h, std::size_t w);

/// Binary PGM (P5, maxval 255).
std::string encode_pgm(const GrayFrame& img);

/// Tensor of shape (3, 4, S, S), dtype u8.
Tensor clipset_to_tensor(const ClipSet& cs);
ClipSet clipset_from_tensor(const Tensor& t);

}  // namespace skelclip
