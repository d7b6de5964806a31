#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace skelclip {

/// Element type codes of the SKTF tensor format.
enum class DType : std::uint8_t { f32 = 0, u8 = 1, f64 = 2 };

/// A dense row-major tensor as stored in an SKTF file. Values are widened to
/// double in memory; `dtype` records the on-disk element type.
struct Tensor {
  DType dtype = DType::f32;
  std::vector<std::uint32_t> shape;
  std::vector<double> values;

  std::size_t element_count() const;
};

// SKTF layout: "SKTF", u8 version (1), u8 dtype, u8 rank, rank x u32 LE dims,
// row-major little-endian payload. Every dim must be >= 1.
inline constexpr std::uint8_t kTensorFormatVersion = 1;

void write_tensor(std::ostream& out, const Tensor& tensor);
Tensor read_tensor(std::istream& in);

std::string encode_tensor(const Tensor& tensor);
Tensor decode_tensor(std::string_view bytes);  // rejects trailing bytes

void save_tensor(const std::filesystem::path& path, const Tensor& tensor);
Tensor load_tensor(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace skelclip
