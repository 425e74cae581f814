#include "nlspn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "nlspn/csv.hpp"

namespace nlspn {

MetricReport evaluate(const Field2D& pred, const Field2D& gt, const Mask& valid) {
  if (!pred.same_shape(gt) || !valid.same_shape(gt)) {
    throw ShapeError("evaluate: prediction, ground truth and mask shapes differ");
  }
  MetricReport r;
  double se = 0.0;
  double ae = 0.0;
  double ise = 0.0;
  double iae = 0.0;
  double rel = 0.0;
  std::array<std::size_t, 3> hits{};
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!valid[i]) continue;
    const double g = gt[i];
    const double p = pred[i];
    if (!(g > 0.0)) throw std::domain_error("evaluate: non-positive ground truth on a valid pixel");
    const double d = g - p;
    se += d * d;
    ae += std::abs(d);
    rel += std::abs(d / g);
    if (p > 0.0) {
      const double id = 1.0 / g - 1.0 / p;
      ise += id * id;
      iae += std::abs(id);
      const double ratio = std::max(g / p, p / g);
      for (std::size_t t = 0; t < kDeltaThresholds.size(); ++t) {
        if (ratio < kDeltaThresholds[t]) ++hits[t];
      }
    } else {
      r.inverse_defined = false;
    }
    ++r.count;
  }
  if (r.count == 0) throw std::invalid_argument("evaluate: empty valid set");

  const double n = static_cast<double>(r.count);
  r.rmse = std::sqrt(se / n) * 1000.0;
  r.mae = ae / n * 1000.0;
  r.rel = rel / n;
  if (r.inverse_defined) {
    r.irmse = std::sqrt(ise / n) * 1000.0;
    r.imae = iae / n * 1000.0;
  } else {
    r.irmse = std::numeric_limits<double>::quiet_NaN();
    r.imae = std::numeric_limits<double>::quiet_NaN();
  }
  for (std::size_t t = 0; t < hits.size(); ++t) r.delta[t] = 100.0 * hits[t] / n;
  return r;
}

MetricReport evaluate_banded(const Field2D& pred, const Field2D& gt, const Mask& valid,
                             const Mask& band) {
  const Mask both = valid & band;
  if (both.count() == 0) throw std::invalid_argument("evaluate_banded: band and valid are disjoint");
  return evaluate(pred, gt, both);
}

std::string metric_csv_header() { return "rmse,mae,irmse,imae,rel,d1,d2,d3,count"; }

std::string to_csv_row(const MetricReport& r) {
  std::string out;
  for (double v : {r.rmse, r.mae, r.irmse, r.imae, r.rel, r.delta[0], r.delta[1], r.delta[2]}) {
    out += format_real(v);
    out += ',';
  }
  out += std::to_string(r.count);
  return out;
}

}  // namespace nlspn
