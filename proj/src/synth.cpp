#include "nlspn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "nlspn/affinity_norm.hpp"
#include "nlspn/rng.hpp"

namespace nlspn {

std::string_view to_string(SceneKind kind) {
  switch (kind) {
    case SceneKind::TwoPlaneStep: return "two-plane-step";
    case SceneKind::SlantedPlanes: return "slanted-planes";
    case SceneKind::BoxesOnGround: return "boxes-on-ground";
    case SceneKind::Staircase: return "staircase";
  }
  return "?";
}

SceneKind parse_scene_kind(std::string_view name) {
  if (name == "two-plane-step") return SceneKind::TwoPlaneStep;
  if (name == "slanted-planes") return SceneKind::SlantedPlanes;
  if (name == "boxes-on-ground") return SceneKind::BoxesOnGround;
  if (name == "staircase") return SceneKind::Staircase;
  throw ConfigError("unknown scene kind '" + std::string(name) + "'");
}

SamplingProtocol parse_sampling_protocol(std::string_view name) {
  if (name == "uniform-random") return SamplingProtocol::UniformRandom;
  if (name == "scanline") return SamplingProtocol::Scanline;
  throw ConfigError("unknown sampling protocol '" + std::string(name) + "'");
}

NoiseKind parse_noise_kind(std::string_view name) {
  if (name == "none") return NoiseKind::None;
  if (name == "gaussian") return NoiseKind::Gaussian;
  if (name == "boundary-mixing") return NoiseKind::BoundaryMixing;
  throw ConfigError("unknown noise model '" + std::string(name) + "'");
}

void SceneSpec::check() const {
  if (height < 2 || width < 2) throw ConfigError("scene must be at least 2x2");
  if (!(depth_min > 0.0)) throw ConfigError("depth_min must be positive");
  if (!(depth_max > depth_min)) throw ConfigError("depth_max must exceed depth_min");
  if (kind != SceneKind::TwoPlaneStep && count < 1) throw ConfigError("scene count must be >= 1");
  if (kind == SceneKind::Staircase && count > height) {
    throw ConfigError("staircase needs at most one step per row");
  }
  if (kind == SceneKind::SlantedPlanes && count > width) {
    throw ConfigError("slanted planes need at most one plane per column");
  }
}

void SamplingSpec::check() const {
  if (protocol == SamplingProtocol::UniformRandom && count < 1) {
    throw ConfigError("uniform sampling needs count >= 1");
  }
  if (protocol == SamplingProtocol::Scanline && (rows < 1 || phase < 0)) {
    throw ConfigError("scanline sampling needs rows >= 1 and phase >= 0");
  }
  if (!(sigma >= 0.0)) throw ConfigError("noise sigma must be non-negative");
  if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("mixing rate must lie in [0,1]");
  if (radius < 0) throw ConfigError("mixing radius must be non-negative");
}

Mask discontinuity_mask(const Field2D& gt) {
  const int h = gt.height();
  const int w = gt.width();
  Mask out(h, w);
  for (int m = 0; m < h; ++m) {
    for (int n = 0; n < w; ++n) {
      double lo = gt(m, n);
      double hi = lo;
      const int nb[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
      for (const auto& d : nb) {
        const int r = m + d[0];
        const int c = n + d[1];
        if (r < 0 || r >= h || c < 0 || c >= w) continue;
        lo = std::min(lo, gt(r, c));
        hi = std::max(hi, gt(r, c));
      }
      out.set(m, n, hi - lo > kDiscontinuityThreshold);
    }
  }
  return out;
}

namespace {

Field2D two_plane(const SceneSpec& s) {
  Field2D gt(s.height, s.width);
  for (int m = 0; m < s.height; ++m) {
    for (int n = 0; n < s.width; ++n) gt(m, n) = n < s.width / 2 ? s.depth_min : s.depth_max;
  }
  return gt;
}

Field2D slanted_planes(const SceneSpec& s, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double span = s.depth_max - s.depth_min;
  // Slopes stay well under the discontinuity threshold per pixel.
  const double max_slope = std::min(0.03, 0.25 * span / std::max(s.height, s.width));
  std::vector<double> base(static_cast<std::size_t>(s.count));
  std::vector<double> row_slope(base.size());
  std::vector<double> col_slope(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    double b = 0.0;
    do {
      b = s.depth_min + span * (0.2 + 0.6 * unit(rng));
    } while (i > 0 && std::abs(b - base[i - 1]) < 0.15 * span);
    base[i] = b;
    row_slope[i] = max_slope * (2.0 * unit(rng) - 1.0);
    col_slope[i] = max_slope * (2.0 * unit(rng) - 1.0);
  }
  Field2D gt(s.height, s.width);
  for (int m = 0; m < s.height; ++m) {
    for (int n = 0; n < s.width; ++n) {
      const int strip = n * s.count / s.width;
      const double d = base[strip] + row_slope[strip] * (m - s.height / 2.0) +
                       col_slope[strip] * (n - s.width / 2.0);
      gt(m, n) = std::clamp(d, s.depth_min, s.depth_max);
    }
  }
  return gt;
}

Field2D boxes_on_ground(const SceneSpec& s, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double span = s.depth_max - s.depth_min;
  const double slope = std::min(0.05, 0.5 * span / s.height);
  Field2D gt(s.height, s.width);
  // Ground recedes towards the top of the image.
  for (int m = 0; m < s.height; ++m) {
    for (int n = 0; n < s.width; ++n) gt(m, n) = s.depth_max - slope * m;
  }
  for (int b = 0; b < s.count; ++b) {
    const int bh = std::max(2, static_cast<int>(s.height * (1.0 / 6 + unit(rng) / 6)));
    const int bw = std::max(2, static_cast<int>(s.width * (1.0 / 6 + unit(rng) / 6)));
    const int top = static_cast<int>(unit(rng) * (s.height - bh));
    const int left = static_cast<int>(unit(rng) * (s.width - bw));
    const double ground = s.depth_max - slope * (top + bh - 1);
    const double depth = std::max(s.depth_min, ground - span * (0.1 + 0.3 * unit(rng)));
    for (int m = top; m < top + bh; ++m) {
      for (int n = left; n < left + bw; ++n) gt(m, n) = depth;
    }
  }
  return gt;
}

Field2D staircase(const SceneSpec& s) {
  Field2D gt(s.height, s.width);
  const double step = s.count > 1 ? (s.depth_max - s.depth_min) / (s.count - 1) : 0.0;
  for (int m = 0; m < s.height; ++m) {
    const int band = m * s.count / s.height;
    for (int n = 0; n < s.width; ++n) gt(m, n) = s.depth_min + band * step;
  }
  return gt;
}

}  // namespace

Scene generate(const SceneSpec& spec) {
  spec.check();
  Rng rng = make_rng(spec.seed, 0x7363656e65ULL);
  Field2D gt;
  switch (spec.kind) {
    case SceneKind::TwoPlaneStep: gt = two_plane(spec); break;
    case SceneKind::SlantedPlanes: gt = slanted_planes(spec, rng); break;
    case SceneKind::BoxesOnGround: gt = boxes_on_ground(spec, rng); break;
    case SceneKind::Staircase: gt = staircase(spec); break;
  }
  Mask disc = discontinuity_mask(gt);
  return {std::move(gt), std::move(disc)};
}

SparseDepth sample(const Field2D& gt, const SamplingSpec& spec) {
  spec.check();
  const int h = gt.height();
  const int w = gt.width();
  const std::size_t total = gt.size();
  Mask mask(h, w);

  if (spec.protocol == SamplingProtocol::UniformRandom) {
    if (static_cast<std::size_t>(spec.count) > total) {
      throw ConfigError("sample count " + std::to_string(spec.count) + " exceeds pixel count " +
                        std::to_string(total));
    }
    Rng rng = make_rng(spec.seed, 0);
    std::vector<std::size_t> idx(total);
    std::iota(idx.begin(), idx.end(), 0);
    // Partial Fisher-Yates: the first `count` slots become the sample.
    for (std::size_t i = 0; i < static_cast<std::size_t>(spec.count); ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, total - 1);
      std::swap(idx[i], idx[pick(rng)]);
      mask.set(idx[i], true);
    }
  } else {
    if (spec.rows > h || spec.phase >= h) throw ConfigError("scanline rows/phase exceed height");
    const double spacing = static_cast<double>(h) / spec.rows;
    for (int i = 0; i < spec.rows; ++i) {
      const int r = spec.phase + static_cast<int>(std::floor(i * spacing));
      if (r >= h) break;
      for (int n = 0; n < w; ++n) mask.set(r, n, true);
    }
  }

  Field2D depth(h, w, 0.0);
  for (std::size_t i = 0; i < total; ++i) {
    if (mask[i]) depth[i] = gt[i];
  }

  if (spec.noise == NoiseKind::BoundaryMixing && spec.rate > 0.0) {
    Rng rng = make_rng(spec.seed, 2);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int m = 0; m < h; ++m) {
      for (int n = 0; n < w; ++n) {
        if (!mask(m, n)) continue;
        const double here = gt(m, n);
        double far = here;
        for (int r = std::max(0, m - spec.radius); r <= std::min(h - 1, m + spec.radius); ++r) {
          for (int c = std::max(0, n - spec.radius); c <= std::min(w - 1, n + spec.radius); ++c) {
            if (std::abs(gt(r, c) - here) > std::abs(far - here)) far = gt(r, c);
          }
        }
        if (std::abs(far - here) <= kDiscontinuityThreshold) continue;
        if (unit(rng) < spec.rate) depth(m, n) = far;
      }
    }
  }
  if (spec.noise == NoiseKind::Gaussian && spec.sigma > 0.0) {
    Rng rng = make_rng(spec.seed, 1);
    std::normal_distribution<double> normal(0.0, spec.sigma);
    for (std::size_t i = 0; i < total; ++i) {
      if (mask[i]) depth[i] = std::max(1e-3, depth[i] + normal(rng));
    }
  }
  return SparseDepth(std::move(depth), std::move(mask));
}

}  // namespace nlspn
