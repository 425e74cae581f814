#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "nlspn/grid.hpp"

namespace nlspn {

enum class IoErrc {
  Open,
  Write,
  BadMagic,
  UnsupportedVersion,
  InvalidDims,
  DimOverflow,
  Truncated,
  PngFormat,
  OutOfRange,
};

const char* to_string(IoErrc code);

class IoError : public std::runtime_error {
 public:
  IoError(IoErrc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  IoErrc code() const { return code_; }

 private:
  IoErrc code_;
};

inline constexpr char kMapMagic[4] = {'N', 'L', 'F', 'M'};
inline constexpr std::uint16_t kMapVersion = 1;
/// magic + version + H, W, C.
inline constexpr std::size_t kMapHeaderBytes = 4 + 2 + 3 * 4;

/// NLFM float map: little-endian header then H*W*C float32 values,
/// row-major, channel fastest. Values are narrowed to 32 bits.
std::vector<std::uint8_t> encode_map(const ChannelStack& stack);
ChannelStack decode_map(const std::vector<std::uint8_t>& bytes);

void write_map(const std::filesystem::path& path, const ChannelStack& stack);
void write_map(const std::filesystem::path& path, const Field2D& field);
ChannelStack read_map(const std::filesystem::path& path);
/// Reads a single-channel map.
Field2D read_field(const std::filesystem::path& path);

/// Neighbor offsets as a 2K-channel map (row, col interleaved).
ChannelStack offsets_to_stack(const NeighborField& neighbors);
NeighborField stack_to_offsets(const ChannelStack& stack);

struct DepthImage {
  Field2D depth;
  Mask valid;
};

inline constexpr double kPngDepthScale = 256.0;

/// 16-bit grayscale PNG, pixel = round(depth * scale), 0 = invalid. Pixels
/// outside `valid` (when given) are written as 0.
void write_depth_png16(const std::filesystem::path& path, const Field2D& depth,
                       const Mask* valid = nullptr, double scale = kPngDepthScale);
DepthImage read_depth_png16(const std::filesystem::path& path, double scale = kPngDepthScale);

}  // namespace nlspn
