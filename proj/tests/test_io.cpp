#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "nlspn/io.hpp"
#include "test_util.hpp"

using namespace nlspn;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "nlspn_io_test";
  fs::create_directories(dir);
  return dir / name;
}

ChannelStack float_exact_stack(int h, int w, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ChannelStack s = nlspn::testing::random_stack(h, w, c, rng, -100, 100);
  for (double& v : s.values()) v = static_cast<float>(v);
  return s;
}

IoErrc decode_error(const std::vector<std::uint8_t>& bytes) {
  try {
    decode_map(bytes);
  } catch (const IoError& e) {
    return e.code();
  }
  ADD_FAILURE() << "decode succeeded";
  return IoErrc::Open;
}

}  // namespace

TEST(Nlfm, HeaderLayout) {
  const auto bytes = encode_map(ChannelStack(2, 3, 1, 1.0));
  ASSERT_EQ(bytes.size(), kMapHeaderBytes + 6 * 4);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "NLFM");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[5], 0);
  EXPECT_EQ(bytes[6], 2);
  EXPECT_EQ(bytes[10], 3);
  EXPECT_EQ(bytes[14], 1);
  // 1.0f = 0x3f800000, little-endian
  EXPECT_EQ(bytes[18], 0x00);
  EXPECT_EQ(bytes[21], 0x3f);
}

TEST(Nlfm, FieldRoundTripIsBitExact) {
  const Field2D f(2, 2, std::vector<double>{1.5, -0.25, 3.0e-7f, 1e30f});
  const fs::path p = temp_path("f.nlfm");
  write_map(p, f);
  const Field2D g = read_field(p);
  ASSERT_TRUE(g.same_shape(f));
  for (std::size_t i = 0; i < f.size(); ++i) {
    EXPECT_EQ(std::bit_cast<std::uint64_t>(g[i]), std::bit_cast<std::uint64_t>(f[i]));
  }
}

TEST(Nlfm, StackRoundTripIsBitExact) {
  const ChannelStack s = float_exact_stack(7, 5, 8, 3);
  const fs::path p = temp_path("s.nlfm");
  write_map(p, s);
  const ChannelStack t = read_map(p);
  ASSERT_EQ(t.channels(), 8);
  for (std::size_t i = 0; i < s.size(); ++i) ASSERT_EQ(s[i], t[i]);
}

TEST(Nlfm, ErrorCodes) {
  auto bytes = encode_map(ChannelStack(2, 2, 1, 1.0));
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_EQ(decode_error(truncated), IoErrc::Truncated);
  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_EQ(decode_error(magic), IoErrc::BadMagic);
  auto version = bytes;
  version[4] = 2;
  EXPECT_EQ(decode_error(version), IoErrc::UnsupportedVersion);
  auto zero = bytes;
  zero[6] = 0;
  EXPECT_EQ(decode_error(zero), IoErrc::InvalidDims);
  auto huge = bytes;
  for (int i = 6; i < 18; ++i) huge[i] = 0xff;
  EXPECT_EQ(decode_error(huge), IoErrc::DimOverflow);
  EXPECT_EQ(decode_error({'N', 'L', 'F', 'M', 1}), IoErrc::Truncated);
  EXPECT_THROW(read_map(temp_path("missing.nlfm")), IoError);
}

TEST(Nlfm, ReadFieldRejectsMultiChannel) {
  const fs::path p = temp_path("multi.nlfm");
  write_map(p, ChannelStack(2, 2, 3));
  try {
    read_field(p);
    FAIL();
  } catch (const IoError& e) {
    EXPECT_EQ(e.code(), IoErrc::InvalidDims);
  }
}

TEST(Nlfm, OffsetsRoundTrip) {
  std::mt19937_64 rng(5);
  NeighborField nf = nlspn::testing::random_offsets(4, 3, 5, rng, 3);
  for (Offset& o : nf.offsets()) o = {static_cast<float>(o.row), static_cast<float>(o.col)};
  const NeighborField back = stack_to_offsets(decode_map(encode_map(offsets_to_stack(nf))));
  ASSERT_EQ(back.k(), 5);
  for (std::size_t i = 0; i < nf.offsets().size(); ++i) {
    EXPECT_EQ(back.offsets()[i].row, nf.offsets()[i].row);
    EXPECT_EQ(back.offsets()[i].col, nf.offsets()[i].col);
  }
}

TEST(Png16, ScaleConvention) {
  const fs::path p = temp_path("one.png");
  Field2D d(1, 2, std::vector<double>{1.0, 0.0});
  write_depth_png16(p, d);
  const DepthImage img = read_depth_png16(p);
  EXPECT_EQ(img.depth(0, 0), 1.0);
  EXPECT_TRUE(img.valid(0, 0));
  EXPECT_FALSE(img.valid(0, 1));
}

TEST(Png16, RoundTripQuantizationBound) {
  std::mt19937_64 rng(7);
  const Field2D d = nlspn::testing::random_field(31, 17, rng, 0.01, 65535.0 / 256.0);
  const fs::path p = temp_path("rt.png");
  write_depth_png16(p, d);
  const DepthImage img = read_depth_png16(p);
  double worst = 0;
  for (std::size_t i = 0; i < d.size(); ++i) worst = std::max(worst, std::abs(img.depth[i] - d[i]));
  EXPECT_LE(worst, 1.0 / 512.0);
}

TEST(Png16, MaskedPixelsAreZero) {
  Mask m(2, 2);
  m.set(1, 1, true);
  const fs::path p = temp_path("masked.png");
  write_depth_png16(p, Field2D(2, 2, 5.0), &m);
  const DepthImage img = read_depth_png16(p);
  EXPECT_EQ(img.valid.count(), 1u);
  EXPECT_EQ(img.depth(1, 1), 5.0);
}

TEST(Png16, Errors) {
  try {
    write_depth_png16(temp_path("bad.png"), Field2D(1, 1, 300.0));
    FAIL();
  } catch (const IoError& e) {
    EXPECT_EQ(e.code(), IoErrc::OutOfRange);
  }
  std::ofstream(temp_path("fake.png")) << "not a png";
  try {
    read_depth_png16(temp_path("fake.png"));
    FAIL();
  } catch (const IoError& e) {
    EXPECT_EQ(e.code(), IoErrc::BadMagic);
  }
}
