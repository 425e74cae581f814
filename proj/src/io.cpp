#include "nlspn/io.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <memory>

namespace nlspn {

const char* to_string(IoErrc code) {
  switch (code) {
    case IoErrc::Open: return "cannot open file";
    case IoErrc::Write: return "write failed";
    case IoErrc::BadMagic: return "bad magic";
    case IoErrc::UnsupportedVersion: return "unsupported version";
    case IoErrc::InvalidDims: return "invalid dimensions";
    case IoErrc::DimOverflow: return "dimension overflow";
    case IoErrc::Truncated: return "truncated payload";
    case IoErrc::PngFormat: return "png format error";
    case IoErrc::OutOfRange: return "value out of range";
  }
  return "io error";
}

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

// Element cap keeps H*W*C*4 well inside size_t and the int-based grid types.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 31;

}  // namespace

std::vector<std::uint8_t> encode_map(const ChannelStack& stack) {
  std::vector<std::uint8_t> out;
  out.reserve(kMapHeaderBytes + stack.size() * 4);
  out.insert(out.end(), std::begin(kMapMagic), std::end(kMapMagic));
  put_u16(out, kMapVersion);
  put_u32(out, static_cast<std::uint32_t>(stack.height()));
  put_u32(out, static_cast<std::uint32_t>(stack.width()));
  put_u32(out, static_cast<std::uint32_t>(stack.channels()));
  for (double v : stack.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

ChannelStack decode_map(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMapMagic, 4) != 0) {
    throw IoError(IoErrc::BadMagic, "expected NLFM header");
  }
  if (bytes.size() < kMapHeaderBytes) throw IoError(IoErrc::Truncated, "header is incomplete");
  const std::uint16_t version = static_cast<std::uint16_t>(bytes[4] | (bytes[5] << 8));
  if (version != kMapVersion) {
    throw IoError(IoErrc::UnsupportedVersion, "version " + std::to_string(version));
  }
  const std::uint32_t h = get_u32(bytes.data() + 6);
  const std::uint32_t w = get_u32(bytes.data() + 10);
  const std::uint32_t c = get_u32(bytes.data() + 14);
  if (h == 0 || w == 0 || c == 0) throw IoError(IoErrc::InvalidDims, "dimensions must be >= 1");
  const std::uint64_t hw = std::uint64_t{h} * w;
  if (hw > kMaxElements || hw * c > kMaxElements) {
    throw IoError(IoErrc::DimOverflow, std::to_string(h) + "x" + std::to_string(w) + "x" +
                                           std::to_string(c) + " exceeds the element limit");
  }
  const std::uint64_t n = hw * c;
  if (bytes.size() - kMapHeaderBytes < n * 4) {
    throw IoError(IoErrc::Truncated, "expected " + std::to_string(n * 4) + " payload bytes, got " +
                                         std::to_string(bytes.size() - kMapHeaderBytes));
  }
  std::vector<double> values(n);
  const std::uint8_t* p = bytes.data() + kMapHeaderBytes;
  for (std::uint64_t i = 0; i < n; ++i) {
    values[i] = std::bit_cast<float>(get_u32(p + 4 * i));
  }
  return ChannelStack(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c),
                      std::move(values));
}

void write_map(const std::filesystem::path& path, const ChannelStack& stack) {
  const std::vector<std::uint8_t> bytes = encode_map(stack);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(IoErrc::Open, path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(IoErrc::Write, path.string());
}

void write_map(const std::filesystem::path& path, const Field2D& field) {
  write_map(path, ChannelStack(field.height(), field.width(), 1,
                               std::vector<double>(field.values().begin(), field.values().end())));
}

ChannelStack read_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoErrc::Open, path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_map(bytes);
}

Field2D read_field(const std::filesystem::path& path) {
  const ChannelStack s = read_map(path);
  if (s.channels() != 1) {
    throw IoError(IoErrc::InvalidDims, path.string() + " has " + std::to_string(s.channels()) +
                                           " channels, expected 1");
  }
  return s.channel(0);
}

ChannelStack offsets_to_stack(const NeighborField& neighbors) {
  ChannelStack out(neighbors.height(), neighbors.width(), 2 * neighbors.k());
  const auto offs = neighbors.offsets();
  for (std::size_t j = 0; j < offs.size(); ++j) {
    out[2 * j] = offs[j].row;
    out[2 * j + 1] = offs[j].col;
  }
  return out;
}

NeighborField stack_to_offsets(const ChannelStack& stack) {
  if (stack.channels() % 2 != 0) {
    throw IoError(IoErrc::InvalidDims, "offset map needs an even channel count");
  }
  NeighborField out(stack.height(), stack.width(), stack.channels() / 2);
  auto offs = out.offsets();
  for (std::size_t j = 0; j < offs.size(); ++j) offs[j] = {stack[2 * j], stack[2 * j + 1]};
  return out;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_depth_png16(const std::filesystem::path& path, const Field2D& depth, const Mask* valid,
                       double scale) {
  const int h = depth.height();
  const int w = depth.width();
  if (valid && !valid->same_shape(depth)) throw ShapeError("png: mask shape mismatch");
  std::vector<png_uint_16> pixels(depth.size());
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (valid && !(*valid)[i]) continue;
    const double q = std::round(depth[i] * scale);
    if (!(q >= 0.0 && q <= 65535.0)) {
      throw IoError(IoErrc::OutOfRange, "depth " + std::to_string(depth[i]) + " m at index " +
                                            std::to_string(i));
    }
    pixels[i] = static_cast<png_uint_16>(q);
  }

  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw IoError(IoErrc::Open, path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError(IoErrc::PngFormat, "cannot create png writer");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError(IoErrc::Write, path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 16,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if constexpr (std::endian::native == std::endian::little) png_set_swap(png);
  for (int r = 0; r < h; ++r) {
    png_write_row(png, reinterpret_cast<png_const_bytep>(pixels.data() + static_cast<std::size_t>(r) * w));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

DepthImage read_depth_png16(const std::filesystem::path& path, double scale) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw IoError(IoErrc::Open, path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError(IoErrc::BadMagic, path.string() + " is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(IoErrc::PngFormat, "cannot create png reader");
  }
  std::vector<png_uint_16> pixels;
  png_uint_32 w = 0;
  png_uint_32 h = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(IoErrc::Truncated, path.string());
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  w = png_get_image_width(png, info);
  h = png_get_image_height(png, info);
  const int depth_bits = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (depth_bits != 16 || color != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(IoErrc::PngFormat, "expected 16-bit grayscale");
  }
  if constexpr (std::endian::native == std::endian::little) png_set_swap(png);
  png_read_update_info(png, info);
  pixels.resize(static_cast<std::size_t>(w) * h);
  for (png_uint_32 r = 0; r < h; ++r) {
    png_read_row(png, reinterpret_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(r) * w),
                 nullptr);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  DepthImage out{Field2D(static_cast<int>(h), static_cast<int>(w)),
                 Mask(static_cast<int>(h), static_cast<int>(w))};
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    if (pixels[i] == 0) continue;
    out.depth[i] = pixels[i] / scale;
    out.valid.set(i, true);
  }
  return out;
}

}  // namespace nlspn
