#pragma once

#include <array>
#include <cstddef>
#include <string>

#include "nlspn/grid.hpp"

namespace nlspn {

/// Thresholds 1.25, 1.25^2 and 1.25^3.
inline constexpr std::array<double, 3> kDeltaThresholds = {1.25, 1.25 * 1.25, 1.25 * 1.25 * 1.25};

struct MetricReport {
  double rmse = 0.0;   // mm
  double mae = 0.0;    // mm
  double irmse = 0.0;  // 1/km
  double imae = 0.0;   // 1/km
  double rel = 0.0;
  std::array<double, 3> delta{};  // percent, strict "< tau"
  std::size_t count = 0;
  /// False when some valid pixel has pred <= 0; irmse/imae are then NaN.
  bool inverse_defined = true;
};

/// Metrics over `valid`. Throws if a valid pixel has gt <= 0 or the valid set
/// is empty.
MetricReport evaluate(const Field2D& pred, const Field2D& gt, const Mask& valid);

/// Same metrics restricted to band & valid.
MetricReport evaluate_banded(const Field2D& pred, const Field2D& gt, const Mask& valid,
                             const Mask& band);

/// "rmse,mae,irmse,imae,rel,d1,d2,d3,count"
std::string metric_csv_header();
std::string to_csv_row(const MetricReport& report);

}  // namespace nlspn
