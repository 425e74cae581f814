#include "nlspn/affinity_norm.hpp"

#include <cmath>
#include <thread>

#include "nlspn/rng.hpp"

namespace nlspn {

namespace {

double l1(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

void scale_in_place(std::vector<double>& v, double inv) {
  for (double& x : v) x *= inv;
}

constexpr int kMonteCarloShards = 16;

}  // namespace

NormScheme NormScheme::tanh_gamma_for(int k) {
  return tanh_gamma(static_cast<double>(k), 1.0, 2.0 * k);
}

void NormScheme::check(int k) const {
  if (k < 1) throw ConfigError("neighbor count must be at least 1");
  switch (kind) {
    case NormKind::AbsSum:
    case NormKind::AbsSumStar:
      return;
    case NormKind::TanhC:
      if (!(c >= k)) {
        throw ConfigError("tanh-c requires C >= K (C=" + std::to_string(c) +
                          ", K=" + std::to_string(k) + ")");
      }
      return;
    case NormKind::TanhGammaAbsSumStar:
      if (!(gamma_min > 0.0) || !(gamma_min <= gamma_max)) {
        throw ConfigError("gamma bounds must satisfy 0 < gamma_min <= gamma_max");
      }
      if (!(gamma >= gamma_min && gamma <= gamma_max)) {
        throw ConfigError("gamma " + std::to_string(gamma) + " outside [" +
                          std::to_string(gamma_min) + ", " + std::to_string(gamma_max) + "]");
      }
      return;
  }
}

std::string_view to_string(NormKind kind) {
  switch (kind) {
    case NormKind::AbsSum: return "abs-sum";
    case NormKind::AbsSumStar: return "abs-sum-star";
    case NormKind::TanhC: return "tanh-c";
    case NormKind::TanhGammaAbsSumStar: return "tanh-gamma-abs-sum-star";
  }
  return "?";
}

NormKind parse_norm_kind(std::string_view name) {
  if (name == "abs-sum") return NormKind::AbsSum;
  if (name == "abs-sum-star") return NormKind::AbsSumStar;
  if (name == "tanh-c") return NormKind::TanhC;
  if (name == "tanh-gamma-abs-sum-star" || name == "tanh-gamma") {
    return NormKind::TanhGammaAbsSumStar;
  }
  throw ConfigError("unknown normalization scheme '" + std::string(name) + "'");
}

std::vector<double> abs_sum(std::span<const double> raw) {
  const double s = l1(raw);
  if (s == 0.0) throw ZeroAffinityError("abs-sum of an all-zero affinity vector");
  std::vector<double> out(raw.begin(), raw.end());
  scale_in_place(out, 1.0 / s);
  return out;
}

std::vector<double> abs_sum_star(std::span<const double> raw) {
  if (l1(raw) <= 1.0) return {raw.begin(), raw.end()};
  return abs_sum(raw);
}

std::vector<double> tanh_c(std::span<const double> raw, double c) {
  if (!(c >= static_cast<double>(raw.size()))) {
    throw ConfigError("tanh-c requires C >= K");
  }
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = std::tanh(raw[i]) / c;
  return out;
}

std::vector<double> tanh_gamma_abs_sum_star(std::span<const double> raw, double gamma) {
  if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
  std::vector<double> u(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) u[i] = std::tanh(raw[i]) / gamma;
  return abs_sum_star(u);
}

std::vector<double> confidence_scale(std::span<const double> weights,
                                     std::span<const double> neighbor_conf) {
  if (weights.size() != neighbor_conf.size()) {
    throw std::invalid_argument("confidence_scale: length mismatch");
  }
  std::vector<double> out(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) out[i] = neighbor_conf[i] * weights[i];
  return out;
}

double reference_weight(std::span<const double> weights) {
  double s = 0.0;
  for (double w : weights) s += w;
  return 1.0 - s;
}

double stability_margin(std::span<const double> weights) { return 1.0 - l1(weights); }

PixelWeights normalize_pixel(std::span<const double> raw, std::span<const double> neighbor_conf,
                             const NormScheme& scheme) {
  const std::size_t k = raw.size();
  const bool with_conf = !neighbor_conf.empty();
  if (with_conf && neighbor_conf.size() != k) {
    throw std::invalid_argument("normalize_pixel: confidence length mismatch");
  }
  PixelWeights out;
  out.weights.resize(k);

  // Element-wise pre-transform, then confidence, then the L1 step.
  for (std::size_t i = 0; i < k; ++i) {
    switch (scheme.kind) {
      case NormKind::AbsSum:
      case NormKind::AbsSumStar: out.weights[i] = raw[i]; break;
      case NormKind::TanhC: out.weights[i] = std::tanh(raw[i]) / scheme.c; break;
      case NormKind::TanhGammaAbsSumStar: out.weights[i] = std::tanh(raw[i]) / scheme.gamma; break;
    }
    if (with_conf) out.weights[i] *= neighbor_conf[i];
  }

  const double s = l1(out.weights);
  switch (scheme.kind) {
    case NormKind::AbsSum:
      if (s == 0.0) {
        out.degenerate = true;
        return out;
      }
      scale_in_place(out.weights, 1.0 / s);
      out.fallback_fired = true;
      break;
    case NormKind::AbsSumStar:
    case NormKind::TanhGammaAbsSumStar:
      if (s > 1.0) {
        scale_in_place(out.weights, 1.0 / s);
        out.fallback_fired = true;
      }
      break;
    case NormKind::TanhC:
      break;
  }
  return out;
}

NormProbability mc_normalization_probability(int k, const NormScheme& scheme,
                                             std::uint64_t samples, std::uint64_t seed,
                                             int workers) {
  if (samples < 1) throw std::invalid_argument("mc_normalization_probability: samples < 1");
  scheme.check(k);

  std::vector<std::uint64_t> fired(kMonteCarloShards, 0);
  auto run_shard = [&](int shard) {
    const std::uint64_t begin = samples * shard / kMonteCarloShards;
    const std::uint64_t end = samples * (shard + 1) / kMonteCarloShards;
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(shard));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> raw(static_cast<std::size_t>(k));
    std::uint64_t count = 0;
    for (std::uint64_t i = begin; i < end; ++i) {
      for (double& r : raw) r = normal(rng);
      if (normalize_pixel(raw, {}, scheme).fallback_fired) ++count;
    }
    fired[shard] = count;
  };

  if (workers <= 1) {
    for (int s = 0; s < kMonteCarloShards; ++s) run_shard(s);
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (int s = w; s < kMonteCarloShards; s += workers) run_shard(s);
      });
    }
  }

  NormProbability out;
  out.samples = samples;
  for (std::uint64_t f : fired) out.fired += f;
  const double n = static_cast<double>(samples);
  out.probability = static_cast<double>(out.fired) / n;
  out.standard_error = std::sqrt(out.probability * (1.0 - out.probability) / n);
  return out;
}

std::vector<std::array<double, 2>> sample_normalized_pairs(const NormScheme& scheme,
                                                           std::uint64_t samples,
                                                           std::uint64_t seed) {
  scheme.check(2);
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::array<double, 2>> out;
  out.reserve(samples);
  std::array<double, 2> raw{};
  for (std::uint64_t i = 0; i < samples; ++i) {
    raw = {normal(rng), normal(rng)};
    const PixelWeights w = normalize_pixel(raw, {}, scheme);
    out.push_back({w.weights[0], w.weights[1]});
  }
  return out;
}

}  // namespace nlspn
