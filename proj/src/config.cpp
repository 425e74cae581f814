#include "nlspn/config.hpp"

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include "json.hpp"

namespace nlspn {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::string& section,
                    std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError("section '" + section + "' must be an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!keys.contains(key)) throw ConfigError("unknown key '" + section + "." + key + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

SceneSpec parse_scene(const json& j) {
  reject_unknown(j, "scene", {"kind", "count", "height", "width", "depth_min", "depth_max", "seed"});
  SceneSpec s;
  std::string kind = std::string(to_string(s.kind));
  read(j, "kind", kind);
  s.kind = parse_scene_kind(kind);
  read(j, "count", s.count);
  read(j, "height", s.height);
  read(j, "width", s.width);
  read(j, "depth_min", s.depth_min);
  read(j, "depth_max", s.depth_max);
  read(j, "seed", s.seed);
  s.check();
  return s;
}

SamplingSpec parse_sampling(const json& j) {
  reject_unknown(j, "sampling",
                 {"protocol", "count", "rows", "phase", "noise", "sigma", "radius", "rate", "seed"});
  SamplingSpec s;
  std::string protocol = "uniform-random";
  std::string noise = "none";
  read(j, "protocol", protocol);
  read(j, "noise", noise);
  s.protocol = parse_sampling_protocol(protocol);
  s.noise = parse_noise_kind(noise);
  read(j, "count", s.count);
  read(j, "rows", s.rows);
  read(j, "phase", s.phase);
  read(j, "sigma", s.sigma);
  read(j, "radius", s.radius);
  read(j, "rate", s.rate);
  read(j, "seed", s.seed);
  s.check();
  return s;
}

PropagationConfig parse_propagation(const json& j) {
  reject_unknown(j, "propagation",
                 {"steps", "scheme", "c", "gamma", "gamma_min", "gamma_max", "use_confidence",
                  "neighbors", "k", "replace_seeds", "workers"});
  PropagationConfig p;
  std::string neighbors = "nonlocal";
  read(j, "neighbors", neighbors);
  p.neighbor_mode = parse_neighbor_mode(neighbors);
  read(j, "k", p.neighbor_mode.k);
  const int k = p.neighbor_mode.neighbor_count();

  std::string scheme = "tanh-gamma-abs-sum-star";
  read(j, "scheme", scheme);
  p.scheme = default_scheme(parse_norm_kind(scheme), k);
  read(j, "c", p.scheme.c);
  read(j, "gamma_min", p.scheme.gamma_min);
  read(j, "gamma_max", p.scheme.gamma_max);
  read(j, "gamma", p.scheme.gamma);

  read(j, "steps", p.steps);
  read(j, "use_confidence", p.use_confidence);
  read(j, "replace_seeds", p.replace_seeds);
  read(j, "workers", p.workers);
  p.check();
  return p;
}

FitConfig parse_fit(const json& j) {
  reject_unknown(j, "fit",
                 {"iterations", "step_size", "optimizer", "momentum", "beta1", "beta2", "epsilon",
                  "learn", "jitter_offsets", "jitter_sigma", "raw_init", "raw_init_sigma", "rho",
                  "idw_power", "conf_lambda", "band_radius", "seed"});
  FitConfig f;
  std::string optimizer = "adam";
  read(j, "optimizer", optimizer);
  f.optimizer = parse_optimizer(optimizer);
  read(j, "iterations", f.iterations);
  read(j, "step_size", f.step_size);
  read(j, "momentum", f.momentum);
  read(j, "beta1", f.beta1);
  read(j, "beta2", f.beta2);
  read(j, "epsilon", f.epsilon);
  if (j.contains("learn")) {
    const json& l = j.at("learn");
    reject_unknown(l, "fit.learn", {"x0", "offsets", "affinities", "confidence", "gamma"});
    read(l, "x0", f.learn.x0);
    read(l, "offsets", f.learn.offsets);
    read(l, "affinities", f.learn.affinities);
    read(l, "confidence", f.learn.confidence);
    read(l, "gamma", f.learn.gamma);
  }
  read(j, "jitter_offsets", f.jitter_offsets);
  read(j, "jitter_sigma", f.jitter_sigma);
  read(j, "raw_init", f.raw_init);
  read(j, "raw_init_sigma", f.raw_init_sigma);
  read(j, "rho", f.rho);
  read(j, "idw_power", f.idw_power);
  read(j, "conf_lambda", f.conf_lambda);
  read(j, "band_radius", f.band_radius);
  read(j, "seed", f.seed);
  f.check();
  return f;
}

void parse_ablation(const json& j, RunConfig& cfg) {
  reject_unknown(j, "ablation", {"neighbors", "schemes", "confidence", "suite", "workers"});
  AblationAxes axes;
  std::vector<std::string> neighbors = {"cspn", "nonlocal"};
  std::vector<std::string> schemes = {"abs-sum", "tanh-gamma-abs-sum-star"};
  std::vector<bool> confidence = {true, false};
  read(j, "neighbors", neighbors);
  read(j, "schemes", schemes);
  read(j, "confidence", confidence);
  read(j, "workers", cfg.ablation_workers);
  for (const std::string& n : neighbors) {
    NeighborMode mode = parse_neighbor_mode(n);
    mode.k = cfg.propagation.neighbor_mode.k;
    axes.neighbor_modes.push_back(mode);
  }
  for (const std::string& s : schemes) {
    // Schemes are instantiated per neighbor count when the grid runs; K = 8
    // covers every mode except SPN, whose rows re-derive it.
    axes.schemes.push_back(default_scheme(parse_norm_kind(s), 8));
  }
  axes.confidence = confidence;
  if (axes.neighbor_modes.empty() || axes.schemes.empty() || axes.confidence.empty()) {
    throw ConfigError("ablation axes must be non-empty");
  }
  if (j.contains("suite")) {
    const json& s = j.at("suite");
    reject_unknown(s, "ablation.suite", {"size", "seed", "mixing_rate"});
    SuiteSpec suite;
    read(s, "size", suite.size);
    read(s, "seed", suite.seed);
    read(s, "mixing_rate", suite.mixing_rate);
    if (suite.size < 4) throw ConfigError("suite size must be at least 4");
    if (!(suite.mixing_rate >= 0.0 && suite.mixing_rate <= 1.0)) {
      throw ConfigError("suite mixing_rate must lie in [0,1]");
    }
    cfg.suite = suite;
  }
  if (cfg.ablation_workers < 1) throw ConfigError("ablation workers must be >= 1");
  cfg.ablation = std::move(axes);
}

}  // namespace

NormScheme default_scheme(NormKind kind, int k) {
  switch (kind) {
    case NormKind::AbsSum: return NormScheme::abs_sum();
    case NormKind::AbsSumStar: return NormScheme::abs_sum_star();
    case NormKind::TanhC: return NormScheme::tanh_c(static_cast<double>(k));
    case NormKind::TanhGammaAbsSumStar: return NormScheme::tanh_gamma_for(k);
  }
  return NormScheme::tanh_gamma_for(k);
}

RunConfig parse_run_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(root, "<root>", {"scene", "sampling", "propagation", "fit", "ablation"});
  RunConfig cfg;
  if (root.contains("scene")) cfg.scene = parse_scene(root.at("scene"));
  if (root.contains("sampling")) cfg.sampling = parse_sampling(root.at("sampling"));
  if (root.contains("propagation")) cfg.propagation = parse_propagation(root.at("propagation"));
  if (root.contains("fit")) cfg.fit = parse_fit(root.at("fit"));
  if (root.contains("ablation")) parse_ablation(root.at("ablation"), cfg);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

}  // namespace nlspn
