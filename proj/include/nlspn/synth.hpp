#pragma once

#include <cstdint>
#include <string_view>

#include "nlspn/grid.hpp"

namespace nlspn {

/// Depth jump (m) above which neighboring pixels count as a discontinuity.
inline constexpr double kDiscontinuityThreshold = 0.1;

enum class SceneKind { TwoPlaneStep, SlantedPlanes, BoxesOnGround, Staircase };

std::string_view to_string(SceneKind kind);
SceneKind parse_scene_kind(std::string_view name);

struct SceneSpec {
  SceneKind kind = SceneKind::TwoPlaneStep;
  /// Planes for SlantedPlanes, boxes for BoxesOnGround, steps for Staircase.
  int count = 3;
  int height = 64;
  int width = 64;
  double depth_min = 1.0;
  double depth_max = 10.0;
  std::uint64_t seed = 0;

  void check() const;
};

struct Scene {
  Field2D gt;
  Mask discontinuity;
};

/// Pixels whose 4-neighborhood (including itself) spans more than
/// kDiscontinuityThreshold.
Mask discontinuity_mask(const Field2D& gt);

Scene generate(const SceneSpec& spec);

enum class SamplingProtocol { UniformRandom, Scanline };
enum class NoiseKind { None, Gaussian, BoundaryMixing };

struct SamplingSpec {
  SamplingProtocol protocol = SamplingProtocol::UniformRandom;
  int count = 500;
  int rows = 16;
  int phase = 0;
  NoiseKind noise = NoiseKind::None;
  double sigma = 0.0;
  int radius = 1;
  double rate = 0.0;
  std::uint64_t seed = 0;

  void check() const;
};

SamplingProtocol parse_sampling_protocol(std::string_view name);
NoiseKind parse_noise_kind(std::string_view name);

/// Sparse observation of `gt`. Boundary mixing replaces a sample that has a
/// different-depth pixel within `radius` (Chebyshev) by the most distant such
/// depth with probability `rate`; Gaussian noise is added afterwards.
SparseDepth sample(const Field2D& gt, const SamplingSpec& spec);

}  // namespace nlspn
