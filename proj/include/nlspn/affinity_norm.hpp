#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nlspn/grid.hpp"

namespace nlspn {

/// Abs-Sum was asked to normalize an all-zero vector.
class ZeroAffinityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

enum class NormKind { AbsSum, AbsSumStar, TanhC, TanhGammaAbsSumStar };

/// Affinity normalization scheme and its parameters. `c` is only read by
/// TanhC; the gamma fields only by TanhGammaAbsSumStar.
struct NormScheme {
  NormKind kind = NormKind::TanhGammaAbsSumStar;
  double c = 8.0;
  double gamma = 8.0;
  double gamma_min = 1.0;
  double gamma_max = 16.0;

  static NormScheme abs_sum() { return {NormKind::AbsSum}; }
  static NormScheme abs_sum_star() { return {NormKind::AbsSumStar}; }
  static NormScheme tanh_c(double c) { return {NormKind::TanhC, c}; }
  /// gamma = K with bounds [1, 2K].
  static NormScheme tanh_gamma_for(int k);
  static NormScheme tanh_gamma(double gamma, double gamma_min, double gamma_max) {
    return {NormKind::TanhGammaAbsSumStar, 8.0, gamma, gamma_min, gamma_max};
  }

  /// Throws ConfigError when the scheme cannot guarantee stability for K
  /// neighbors.
  void check(int k) const;
  /// True for the schemes with a conditional Abs-Sum fallback.
  bool has_fallback() const {
    return kind == NormKind::AbsSumStar || kind == NormKind::TanhGammaAbsSumStar;
  }
};

std::string_view to_string(NormKind kind);
/// Accepts "abs-sum", "abs-sum-star", "tanh-c", "tanh-gamma-abs-sum-star".
NormKind parse_norm_kind(std::string_view name);

std::vector<double> abs_sum(std::span<const double> raw);
std::vector<double> abs_sum_star(std::span<const double> raw);
std::vector<double> tanh_c(std::span<const double> raw, double c);
/// Unchecked against the scheme's bounds; callers go through NormScheme::check.
std::vector<double> tanh_gamma_abs_sum_star(std::span<const double> raw, double gamma);
std::vector<double> confidence_scale(std::span<const double> weights,
                                     std::span<const double> neighbor_conf);
double reference_weight(std::span<const double> weights);
/// 1 - sum |w|; non-negative iff the per-pixel stability condition holds.
double stability_margin(std::span<const double> weights);

/// Outcome of normalizing one pixel's raw affinities.
struct PixelWeights {
  std::vector<double> weights;
  bool fallback_fired = false;
  /// Abs-Sum met an all-zero vector; weights are zero (identity propagation).
  bool degenerate = false;
};

/// Full per-pixel normalization used by propagation: element-wise
/// pre-transform (identity, tanh/C or tanh/gamma), then neighbor confidence
/// when non-empty, then the scheme's L1 step (always for Abs-Sum, only when
/// the L1 norm exceeds 1 for the starred schemes, never for Tanh-C).
PixelWeights normalize_pixel(std::span<const double> raw, std::span<const double> neighbor_conf,
                             const NormScheme& scheme);

/// Probability that a scheme's renormalization branch fires for N(0,1) raw
/// affinities.
struct NormProbability {
  double probability = 0.0;
  double standard_error = 0.0;
  std::uint64_t fired = 0;
  std::uint64_t samples = 0;
};

/// Draws are split into a fixed number of shards whose seeds derive from
/// (seed, shard), so the estimate does not depend on `workers`.
NormProbability mc_normalization_probability(int k, const NormScheme& scheme,
                                             std::uint64_t samples, std::uint64_t seed,
                                             int workers = 1);

/// Normalized 2-neighbor pairs from N(0,1) raw affinities.
std::vector<std::array<double, 2>> sample_normalized_pairs(const NormScheme& scheme,
                                                           std::uint64_t samples,
                                                           std::uint64_t seed);

}  // namespace nlspn
