#include "skelclip/tensor_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "skelclip/error.hpp"

namespace skelclip {
namespace {

constexpr char kMagic[4] = {'S', 'K', 'T', 'F'};

template <typename U>
void put_le(std::ostream& out, U value) {
  unsigned char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<unsigned char>(value >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <typename U>
U get_le(std::istream& in, const char* what) {
  unsigned char bytes[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U)))
    throw FormatError(std::string("truncated tensor: ") + what);
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

std::size_t element_size(DType dtype) {
  switch (dtype) {
    case DType::f32: return 4;
    case DType::u8: return 1;
    case DType::f64: return 8;
  }
  throw FormatError("unknown dtype");
}

}  // namespace

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

void write_tensor(std::ostream& out, const Tensor& tensor) {
  if (tensor.shape.empty() || tensor.shape.size() > 255) throw FormatError("tensor rank must be in [1, 255]");
  for (auto d : tensor.shape)
    if (d == 0) throw FormatError("tensor dims must be >= 1");
  if (tensor.element_count() != tensor.values.size())
    throw FormatError("tensor shape does not match value count");

  out.write(kMagic, 4);
  put_le<std::uint8_t>(out, kTensorFormatVersion);
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(tensor.dtype));
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(tensor.shape.size()));
  for (auto d : tensor.shape) put_le<std::uint32_t>(out, d);

  switch (tensor.dtype) {
    case DType::u8:
      for (double v : tensor.values) {
        if (!(v >= 0.0 && v <= 255.0) || v != std::floor(v))
          throw FormatError("u8 tensor value out of range");
        put_le<std::uint8_t>(out, static_cast<std::uint8_t>(v));
      }
      break;
    case DType::f32:
      for (double v : tensor.values) {
        if (!std::isfinite(v)) throw FormatError("non-finite tensor value");
        put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      }
      break;
    case DType::f64:
      for (double v : tensor.values) {
        if (!std::isfinite(v)) throw FormatError("non-finite tensor value");
        put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
      }
      break;
  }
  if (!out) throw FormatError("failed writing tensor");
}

Tensor read_tensor(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4)) throw FormatError("truncated tensor: magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad tensor magic");
  const auto version = get_le<std::uint8_t>(in, "version");
  if (version != kTensorFormatVersion) throw FormatError("unsupported tensor version " + std::to_string(version));
  const auto code = get_le<std::uint8_t>(in, "dtype");
  if (code > 2) throw FormatError("unknown dtype code " + std::to_string(code));
  Tensor t;
  t.dtype = static_cast<DType>(code);
  const auto rank = get_le<std::uint8_t>(in, "rank");
  if (rank == 0) throw FormatError("tensor rank must be >= 1");
  std::size_t count = 1;
  for (unsigned i = 0; i < rank; ++i) {
    const auto d = get_le<std::uint32_t>(in, "shape");
    if (d == 0) throw FormatError("tensor dims must be >= 1");
    if (count > std::numeric_limits<std::size_t>::max() / 8 / d) throw FormatError("tensor too large");
    count *= d;
    t.shape.push_back(d);
  }

  const std::size_t bytes = count * element_size(t.dtype);
  std::string payload(bytes, '\0');
  if (!in.read(payload.data(), static_cast<std::streamsize>(bytes)))
    throw FormatError("truncated tensor payload");
  const auto* p = reinterpret_cast<const unsigned char*>(payload.data());
  t.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    switch (t.dtype) {
      case DType::u8: t.values[i] = p[i]; break;
      case DType::f32: {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= std::uint32_t{p[4 * i + b]} << (8 * b);
        t.values[i] = std::bit_cast<float>(bits);
        break;
      }
      case DType::f64: {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= std::uint64_t{p[8 * i + b]} << (8 * b);
        t.values[i] = std::bit_cast<double>(bits);
        break;
      }
    }
    if (!std::isfinite(t.values[i])) throw FormatError("non-finite tensor payload");
  }
  return t;
}

std::string encode_tensor(const Tensor& tensor) {
  std::ostringstream out(std::ios::binary);
  write_tensor(out, tensor);
  return std::move(out).str();
}

Tensor decode_tensor(std::string_view bytes) {
  std::istringstream in(std::string(bytes), std::ios::binary);
  Tensor t = read_tensor(in);
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after tensor");
  return t;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot create " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

void save_tensor(const std::filesystem::path& path, const Tensor& tensor) {
  write_file(path, encode_tensor(tensor));
}

Tensor load_tensor(const std::filesystem::path& path) {
  try {
    return decode_tensor(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace skelclip
