#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "nlspn/grid.hpp"

namespace nlspn::testing {

inline Field2D random_field(int h, int w, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Field2D f(h, w);
  for (double& v : f.values()) v = u(rng);
  return f;
}

inline ChannelStack random_stack(int h, int w, int c, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  ChannelStack s(h, w, c);
  for (double& v : s.values()) v = u(rng);
  return s;
}

inline NeighborField random_offsets(int h, int w, int k, std::mt19937_64& rng, double span) {
  std::uniform_real_distribution<double> u(-span, span);
  NeighborField nf(h, w, k);
  for (Offset& o : nf.offsets()) o = {u(rng), u(rng)};
  return nf;
}

/// Clamp-to-edge bilinear lookup written out longhand.
inline double bilinear_oracle(const Field2D& f, double r, double c) {
  const double rr = std::min(std::max(r, 0.0), f.height() - 1.0);
  const double cc = std::min(std::max(c, 0.0), f.width() - 1.0);
  const int r0 = static_cast<int>(std::floor(rr));
  const int c0 = static_cast<int>(std::floor(cc));
  const int r1 = std::min(r0 + 1, f.height() - 1);
  const int c1 = std::min(c0 + 1, f.width() - 1);
  const double a = rr - r0;
  const double b = cc - c0;
  return (1 - a) * (1 - b) * f(r0, c0) + (1 - a) * b * f(r0, c1) + a * (1 - b) * f(r1, c0) +
         a * b * f(r1, c1);
}

}  // namespace nlspn::testing
