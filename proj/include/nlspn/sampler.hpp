#pragma once

#include <array>
#include <cstddef>

#include "nlspn/grid.hpp"

namespace nlspn {

/// Continuous pixel coordinate; integer values coincide with pixel centers.
struct SamplePoint {
  double row = 0.0;
  double col = 0.0;
};

/// Partial derivatives of one bilinear sample.
struct SampleGrad {
  /// Flat indices of the four corners (r0c0, r0c1, r1c0, r1c1). Corners may
  /// repeat at the image border.
  std::array<std::size_t, 4> corner{};
  /// Bilinear coefficients; they sum to 1.
  std::array<double, 4> weight{};
  double d_row = 0.0;
  double d_col = 0.0;
};

/// Bilinear interpolation with clamp-to-edge boundary handling.
double sample(const Field2D& field, SamplePoint point);

/// Corner weights and coordinate partials of sample(). Along an axis where
/// the coordinate lies strictly outside the image the partial is 0; on the
/// border itself the one-sided inward difference is used.
SampleGrad sample_grad(const Field2D& field, SamplePoint point);

/// Entry (m, n, k) = sample(field, (m + p_k, n + q_k)).
ChannelStack gather(const Field2D& field, const NeighborField& neighbors);

}  // namespace nlspn
