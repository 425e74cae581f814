#include "nlspn/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

#include "nlspn/sampler.hpp"

namespace nlspn {

std::vector<Offset> pattern_spn(SpnDirection direction) {
  switch (direction) {
    case SpnDirection::TopDown: return {{-1, -1}, {-1, 0}, {-1, 1}};
    case SpnDirection::BottomUp: return {{1, -1}, {1, 0}, {1, 1}};
    case SpnDirection::LeftRight: return {{-1, -1}, {0, -1}, {1, -1}};
    case SpnDirection::RightLeft: return {{-1, 1}, {0, 1}, {1, 1}};
  }
  return {};
}

std::vector<Offset> pattern_cspn() {
  std::vector<Offset> out;
  for (int p = -1; p <= 1; ++p) {
    for (int q = -1; q <= 1; ++q) {
      if (p != 0 || q != 0) out.push_back({static_cast<double>(p), static_cast<double>(q)});
    }
  }
  return out;
}

int NeighborMode::neighbor_count() const {
  switch (kind) {
    case NeighborKind::SpnThreeWay: return 3;
    case NeighborKind::Cspn3x3: return 8;
    case NeighborKind::NonLocal: return k;
  }
  return k;
}

std::string_view to_string(NeighborKind kind) {
  switch (kind) {
    case NeighborKind::SpnThreeWay: return "spn";
    case NeighborKind::Cspn3x3: return "cspn";
    case NeighborKind::NonLocal: return "nonlocal";
  }
  return "?";
}

std::string_view to_string(SpnDirection direction) {
  switch (direction) {
    case SpnDirection::TopDown: return "top-down";
    case SpnDirection::BottomUp: return "bottom-up";
    case SpnDirection::LeftRight: return "left-right";
    case SpnDirection::RightLeft: return "right-left";
  }
  return "?";
}

NeighborMode parse_neighbor_mode(std::string_view name) {
  NeighborMode mode;
  if (name == "cspn") {
    mode.kind = NeighborKind::Cspn3x3;
  } else if (name == "nonlocal") {
    mode.kind = NeighborKind::NonLocal;
  } else if (name.starts_with("spn-")) {
    mode.kind = NeighborKind::SpnThreeWay;
    const std::string_view dir = name.substr(4);
    if (dir == "top-down") mode.direction = SpnDirection::TopDown;
    else if (dir == "bottom-up") mode.direction = SpnDirection::BottomUp;
    else if (dir == "left-right") mode.direction = SpnDirection::LeftRight;
    else if (dir == "right-left") mode.direction = SpnDirection::RightLeft;
    else throw ConfigError("unknown SPN direction '" + std::string(dir) + "'");
  } else {
    throw ConfigError("unknown neighbor mode '" + std::string(name) + "'");
  }
  return mode;
}

std::vector<Offset> base_pattern(const NeighborMode& mode) {
  if (mode.kind == NeighborKind::SpnThreeWay) return pattern_spn(mode.direction);
  return pattern_cspn();
}

void PropagationConfig::check() const {
  if (steps < 1) throw ConfigError("propagation needs at least one step");
  if (workers < 1) throw ConfigError("workers must be at least 1");
  scheme.check(neighbor_mode.neighbor_count());
}

namespace {

void check_shapes(const Field2D& x, const NeighborField& neighbors, const ChannelStack& raw) {
  if (!neighbors.matches(x)) throw ShapeError("neighbor field does not match depth shape");
  if (raw.height() != x.height() || raw.width() != x.width() || raw.channels() != neighbors.k()) {
    throw ShapeError("affinity field does not match neighbor field shape");
  }
}

template <typename RowFn>
void for_rows(int height, int workers, RowFn&& fn) {
  if (workers <= 1 || height < 2) {
    for (int m = 0; m < height; ++m) fn(m);
    return;
  }
  std::vector<std::jthread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int m = w; m < height; m += workers) fn(m);
    });
  }
}

}  // namespace

NormalizedField normalize_affinities(const AffinityField& raw, const NeighborField& neighbors,
                                     const ConfidenceMap* conf, const NormScheme& scheme) {
  const int h = raw.height();
  const int w = raw.width();
  const int k = raw.channels();
  if (neighbors.height() != h || neighbors.width() != w || neighbors.k() != k) {
    throw ShapeError("affinity field does not match neighbor field shape");
  }
  if (conf && (conf->height() != h || conf->width() != w)) {
    throw ShapeError("confidence map shape mismatch");
  }
  scheme.check(k);

  NormalizedField out{{ChannelStack(h, w, k), Field2D(h, w)}, {}};
  std::vector<double> nconf(conf ? static_cast<std::size_t>(k) : 0);
  for (int m = 0; m < h; ++m) {
    for (int n = 0; n < w; ++n) {
      if (conf) {
        for (int i = 0; i < k; ++i) {
          const Offset& o = neighbors.at(m, n, i);
          nconf[i] = sample(conf->field(), {m + o.row, n + o.col});
        }
      }
      const PixelWeights pw = normalize_pixel(raw.pixel(m, n), nconf, scheme);
      std::copy(pw.weights.begin(), pw.weights.end(), out.affinity.weights.pixel(m, n).begin());
      out.affinity.reference(m, n) = reference_weight(pw.weights);
      if (pw.fallback_fired) ++out.stats.fallback_pixels;
      if (pw.degenerate) ++out.stats.degenerate_pixels;
    }
  }
  return out;
}

Field2D apply_step(const Field2D& x, const NeighborField& neighbors,
                   const NormalizedAffinity& affinity, int workers) {
  check_shapes(x, neighbors, affinity.weights);
  Field2D out(x.height(), x.width());
  const int k = neighbors.k();
  for_rows(x.height(), workers, [&](int m) {
    for (int n = 0; n < x.width(); ++n) {
      // x + sum w_k (x_k - x): equal to w^c x + sum w_k x_k, exact on constant fields.
      const double center = x(m, n);
      double acc = 0.0;
      for (int i = 0; i < k; ++i) {
        const Offset& o = neighbors.at(m, n, i);
        acc += affinity.weights(m, n, i) * (sample(x, {m + o.row, n + o.col}) - center);
      }
      out(m, n) = center + acc;
    }
  });
  return out;
}

Field2D propagate_step(const Field2D& x, const NeighborField& neighbors,
                       const AffinityField& raw, const ConfidenceMap* conf,
                       const NormScheme& scheme, NormStats* stats) {
  check_shapes(x, neighbors, raw);
  NormalizedField nf = normalize_affinities(raw, neighbors, conf, scheme);
  if (stats) *stats = nf.stats;
  return apply_step(x, neighbors, nf.affinity);
}

PropagationResult propagate(const Field2D& x0, const PropagationConfig& config,
                            const NeighborField& neighbors, const AffinityField& raw,
                            const ConfidenceMap* conf, const SparseDepth* seeds) {
  config.check();
  check_shapes(x0, neighbors, raw);
  if (config.replace_seeds && (!seeds || seeds->height() != x0.height() ||
                               seeds->width() != x0.width())) {
    throw ShapeError("replace_seeds requires sparse depth of the same shape");
  }
  const NormalizedField nf =
      normalize_affinities(raw, neighbors, config.use_confidence ? conf : nullptr, config.scheme);

  PropagationResult result{x0, {}, nf.stats};
  if (config.keep_trace) result.trace.push_back(x0);
  for (int t = 0; t < config.steps; ++t) {
    result.output = apply_step(result.output, neighbors, nf.affinity, config.workers);
    if (config.replace_seeds) {
      for (std::size_t i = 0; i < result.output.size(); ++i) {
        if (seeds->mask()[i]) result.output[i] = seeds->depth()[i];
      }
    }
    if (config.keep_trace) result.trace.push_back(result.output);
  }
  return result;
}

Field2D propagate_fixed_local(const Field2D& x0, std::span<const Offset> pattern,
                              const NormalizedAffinity& affinity, int steps) {
  const int h = x0.height();
  const int w = x0.width();
  const int k = static_cast<int>(pattern.size());
  if (affinity.weights.channels() != k || affinity.weights.height() != h ||
      affinity.weights.width() != w) {
    throw ShapeError("weights do not match pattern/field shape");
  }
  std::vector<int> dr(k);
  std::vector<int> dc(k);
  for (int i = 0; i < k; ++i) {
    dr[i] = static_cast<int>(pattern[i].row);
    dc[i] = static_cast<int>(pattern[i].col);
    if (dr[i] != pattern[i].row || dc[i] != pattern[i].col) {
      throw std::invalid_argument("fixed-local path needs integer offsets");
    }
  }

  Field2D cur = x0;
  Field2D next(h, w);
  for (int t = 0; t < steps; ++t) {
    for (int m = 0; m < h; ++m) {
      for (int n = 0; n < w; ++n) {
        const double center = cur(m, n);
        double acc = 0.0;
        for (int i = 0; i < k; ++i) {
          const int r = std::clamp(m + dr[i], 0, h - 1);
          const int c = std::clamp(n + dc[i], 0, w - 1);
          acc += affinity.weights(m, n, i) * (cur(r, c) - center);
        }
        next(m, n) = center + acc;
      }
    }
    std::swap(cur, next);
  }
  return cur;
}

double neighbor_depth_variance(const Field2D& gt, const NeighborField& neighbors) {
  const ChannelStack g = gather(gt, neighbors);
  const int k = g.channels();
  double total = 0.0;
  for (int m = 0; m < g.height(); ++m) {
    for (int n = 0; n < g.width(); ++n) {
      const auto v = g.pixel(m, n);
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= k;
      double var = 0.0;
      for (double x : v) var += (x - mean) * (x - mean);
      total += var / k;
    }
  }
  return total / static_cast<double>(g.height() * g.width());
}

}  // namespace nlspn
