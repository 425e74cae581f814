#include "nlspn/sampler.hpp"

#include <algorithm>
#include <cmath>

namespace nlspn {

namespace {

// Bracketing cell along one axis of length `n`, after clamping `x` into
// [0, n-1]. The upper cell index is pulled back by one at the far border so
// that the fraction reaches 1 instead of wrapping to a degenerate cell.
struct AxisCell {
  int lo = 0;
  int hi = 0;
  double frac = 0.0;
  bool clamped = false;
};

AxisCell axis_cell(double x, int n) {
  AxisCell cell;
  if (n == 1) {
    cell.clamped = true;
    return cell;
  }
  const double hi_edge = static_cast<double>(n - 1);
  if (x < 0.0) {
    x = 0.0;
    cell.clamped = true;
  } else if (x > hi_edge) {
    x = hi_edge;
    cell.clamped = true;
  }
  cell.lo = std::min(static_cast<int>(std::floor(x)), n - 2);
  cell.hi = cell.lo + 1;
  cell.frac = x - cell.lo;
  return cell;
}

}  // namespace

double sample(const Field2D& field, SamplePoint point) {
  const AxisCell rc = axis_cell(point.row, field.height());
  const AxisCell cc = axis_cell(point.col, field.width());
  const double v00 = field(rc.lo, cc.lo);
  const double v01 = field(rc.lo, cc.hi);
  const double v10 = field(rc.hi, cc.lo);
  const double v11 = field(rc.hi, cc.hi);
  const double a = rc.frac;
  const double b = cc.frac;
  // std::lerp is exact at both ends and on constant inputs.
  return std::lerp(std::lerp(v00, v01, b), std::lerp(v10, v11, b), a);
}

SampleGrad sample_grad(const Field2D& field, SamplePoint point) {
  const AxisCell rc = axis_cell(point.row, field.height());
  const AxisCell cc = axis_cell(point.col, field.width());
  const double a = rc.frac;
  const double b = cc.frac;

  SampleGrad g;
  g.corner = {field.index(rc.lo, cc.lo), field.index(rc.lo, cc.hi), field.index(rc.hi, cc.lo),
              field.index(rc.hi, cc.hi)};
  g.weight = {(1.0 - a) * (1.0 - b), (1.0 - a) * b, a * (1.0 - b), a * b};

  const double v00 = field[g.corner[0]];
  const double v01 = field[g.corner[1]];
  const double v10 = field[g.corner[2]];
  const double v11 = field[g.corner[3]];
  g.d_row = rc.clamped ? 0.0 : (1.0 - b) * (v10 - v00) + b * (v11 - v01);
  g.d_col = cc.clamped ? 0.0 : (1.0 - a) * (v01 - v00) + a * (v11 - v10);
  return g;
}

ChannelStack gather(const Field2D& field, const NeighborField& neighbors) {
  if (!neighbors.matches(field)) throw ShapeError("gather: neighbor field shape mismatch");
  ChannelStack out(field.height(), field.width(), neighbors.k());
  for (int m = 0; m < field.height(); ++m) {
    for (int n = 0; n < field.width(); ++n) {
      for (int k = 0; k < neighbors.k(); ++k) {
        const Offset& o = neighbors.at(m, n, k);
        out(m, n, k) = sample(field, {m + o.row, n + o.col});
      }
    }
  }
  return out;
}

}  // namespace nlspn
