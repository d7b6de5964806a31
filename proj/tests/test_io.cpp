#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "skelclip/error.hpp"
#include "skelclip/keyvalue.hpp"
#include "skelclip/tensor_io.hpp"
#include "test_support.hpp"

using namespace skelclip;

TEST(KeyValue, ParsesCommentsAndWhitespace) {
  const auto doc = KeyValueDoc::parse("# header\n\n  lr = 0.001 \nmode=mtln\n");
  EXPECT_EQ(doc.get("mode"), "mtln");
  EXPECT_DOUBLE_EQ(doc.get_double("lr"), 0.001);
  EXPECT_EQ(doc.line_of("lr"), 3u);
  EXPECT_EQ(doc.get_int("missing", 7), 7);
}

TEST(KeyValue, RejectsDuplicateAndMalformedLines) {
  EXPECT_THROW(KeyValueDoc::parse("a = 1\na = 2\n"), ParseError);
  try {
    KeyValueDoc::parse("a = 1\nno separator\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(KeyValue, TypedGettersRejectJunk) {
  const auto doc = KeyValueDoc::parse("n = 12x\nx = nan\nb = maybe\n");
  EXPECT_THROW(doc.get_int("n"), Error);
  EXPECT_THROW(doc.get_double("x"), Error);
  EXPECT_THROW(doc.get_bool("b", false), Error);
  EXPECT_THROW(doc.get("absent"), Error);
}

TEST(KeyValue, RenderRoundTrip) {
  KeyValueDoc doc;
  doc.set("b", "2");
  doc.set("a", "x, y");
  const auto again = KeyValueDoc::parse(doc.render());
  EXPECT_EQ(again.keys(), (std::vector<std::string>{"b", "a"}));
  EXPECT_EQ(again.get("a"), "x, y");
}

TEST(KeyValue, FormatDoubleRoundTrips) {
  SplitMix64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::ldexp(rng.uniform(-1.0, 1.0), static_cast<int>(rng.below(200)) - 100);
    EXPECT_EQ(parse_double(format_double(v)), v);
  }
}

TEST(KeyValue, IndexList) {
  EXPECT_EQ(parse_index_list("1, 2,3"), (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_TRUE(parse_index_list("").empty());
  EXPECT_THROW(parse_index_list("1,-2"), Error);
}

namespace {

Tensor random_tensor(SplitMix64& rng, DType dtype) {
  Tensor t;
  t.dtype = dtype;
  const std::size_t rank = 1 + rng.below(4);
  for (std::size_t i = 0; i < rank; ++i) t.shape.push_back(static_cast<std::uint32_t>(1 + rng.below(5)));
  t.values.resize(t.element_count());
  for (auto& v : t.values) {
    if (dtype == DType::u8) v = static_cast<double>(rng.below(256));
    else if (dtype == DType::f32) v = static_cast<double>(static_cast<float>(rng.uniform(-100.0, 100.0)));
    else v = rng.uniform(-1e6, 1e6);
  }
  return t;
}

}  // namespace

TEST(TensorIo, HeaderLayoutIsLittleEndian) {
  Tensor t;
  t.dtype = DType::u8;
  t.shape = {2, 258};
  t.values.assign(516, 7.0);
  const std::string bytes = encode_tensor(t);
  ASSERT_EQ(bytes.size(), 4u + 3u + 8u + 516u);
  EXPECT_EQ(bytes.substr(0, 4), "SKTF");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[5]), 1u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[6]), 2u);
  const unsigned char dim1[4] = {2, 1, 0, 0};  // 258
  EXPECT_EQ(std::memcmp(bytes.data() + 11, dim1, 4), 0);
}

TEST(TensorIo, F32PayloadBitPattern) {
  Tensor t;
  t.dtype = DType::f32;
  t.shape = {1};
  t.values = {1.0};
  const std::string bytes = encode_tensor(t);
  const unsigned char one[4] = {0x00, 0x00, 0x80, 0x3f};
  EXPECT_EQ(std::memcmp(bytes.data() + bytes.size() - 4, one, 4), 0);
}

TEST(TensorIo, RoundTripAllTypes) {
  SplitMix64 rng(11);
  for (DType dtype : {DType::f32, DType::u8, DType::f64}) {
    for (int i = 0; i < 50; ++i) {
      const Tensor t = random_tensor(rng, dtype);
      const Tensor back = decode_tensor(encode_tensor(t));
      EXPECT_EQ(back.dtype, t.dtype);
      EXPECT_EQ(back.shape, t.shape);
      EXPECT_EQ(back.values, t.values);
    }
  }
}

TEST(TensorIo, FileRoundTrip) {
  testkit::TempDir dir("tensor");
  SplitMix64 rng(3);
  const Tensor t = random_tensor(rng, DType::f64);
  save_tensor(dir.path() / "t.sktf", t);
  EXPECT_EQ(load_tensor(dir.path() / "t.sktf").values, t.values);
  EXPECT_THROW(load_tensor(dir.path() / "missing.sktf"), Error);
}

TEST(TensorIo, RejectsCorruptInput) {
  Tensor t;
  t.dtype = DType::f32;
  t.shape = {2, 2};
  t.values = {1, 2, 3, 4};
  const std::string good = encode_tensor(t);

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_tensor(bad_magic), FormatError);

  std::string bad_version = good;
  bad_version[4] = 9;
  EXPECT_THROW(decode_tensor(bad_version), FormatError);

  std::string bad_dtype = good;
  bad_dtype[5] = 7;
  EXPECT_THROW(decode_tensor(bad_dtype), FormatError);

  std::string zero_dim = good;
  zero_dim[7] = 0;
  EXPECT_THROW(decode_tensor(zero_dim), FormatError);

  EXPECT_THROW(decode_tensor(good.substr(0, good.size() - 1)), FormatError);
  EXPECT_THROW(decode_tensor(good + "x"), FormatError);
  for (std::size_t cut = 0; cut < good.size(); ++cut) EXPECT_THROW(decode_tensor(good.substr(0, cut)), FormatError);

  Tensor nan = t;
  nan.values[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(encode_tensor(nan), FormatError);
  std::string nan_bytes = good;
  const unsigned char qnan[4] = {0x00, 0x00, 0xc0, 0x7f};
  std::memcpy(nan_bytes.data() + nan_bytes.size() - 4, qnan, 4);
  EXPECT_THROW(decode_tensor(nan_bytes), FormatError);
}

TEST(TensorIo, RejectsShapeMismatchOnWrite) {
  Tensor t;
  t.dtype = DType::u8;
  t.shape = {3};
  t.values = {1, 2};
  EXPECT_THROW(encode_tensor(t), Error);
  t.values = {1, 2, 300};
  EXPECT_THROW(encode_tensor(t), Error);
  t.shape = {};
  EXPECT_THROW(encode_tensor(t), Error);
}
