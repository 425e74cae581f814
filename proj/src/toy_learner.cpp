#include "nlspn/toy_learner.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <random>

#include "nlspn/csv.hpp"
#include "nlspn/rng.hpp"

namespace nlspn {

InitialDepth init_depth_idw(const SparseDepth& sparse, double power, double lambda) {
  if (!(lambda > 0.0)) throw ConfigError("confidence length scale must be positive");
  const int h = sparse.height();
  const int w = sparse.width();
  struct Sample {
    int row;
    int col;
    double value;
  };
  std::vector<Sample> samples;
  for (int m = 0; m < h; ++m) {
    for (int n = 0; n < w; ++n) {
      if (sparse.mask()(m, n)) samples.push_back({m, n, sparse.depth()(m, n)});
    }
  }
  if (samples.empty()) throw std::invalid_argument("init_depth_idw: no samples");

  constexpr std::size_t kNearest = 8;
  const std::size_t take = std::min(kNearest, samples.size());
  Field2D depth(h, w);
  Field2D conf(h, w);
  std::vector<std::pair<double, std::size_t>> dist(samples.size());
  for (int m = 0; m < h; ++m) {
    for (int n = 0; n < w; ++n) {
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const double dr = samples[i].row - m;
        const double dc = samples[i].col - n;
        dist[i] = {std::sqrt(dr * dr + dc * dc), i};
      }
      std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(take), dist.end());
      const double nearest = dist[0].first;
      conf(m, n) = std::exp(-nearest / lambda);
      if (nearest == 0.0) {
        depth(m, n) = samples[dist[0].second].value;
        continue;
      }
      double num = 0.0;
      double den = 0.0;
      for (std::size_t j = 0; j < take; ++j) {
        const double wt = 1.0 / std::pow(dist[j].first, power);
        num += wt * samples[dist[j].second].value;
        den += wt;
      }
      depth(m, n) = num / den;
    }
  }
  return {std::move(depth), ConfidenceMap(std::move(conf))};
}

void FitConfig::check() const {
  if (iterations < 1) throw ConfigError("fit needs at least one iteration");
  if (!(step_size > 0.0)) throw ConfigError("step size must be positive");
  if (rho != 1 && rho != 2) throw ConfigError("rho must be 1 or 2");
  if (!(jitter_sigma >= 0.0)) throw ConfigError("jitter sigma must be non-negative");
  if (band_radius < 0) throw ConfigError("band radius must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0,1)");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0,1)");
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "plain") return OptimizerKind::Plain;
  if (name == "momentum") return OptimizerKind::Momentum;
  if (name == "adam") return OptimizerKind::Adam;
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

FitScene make_fit_scene(const SceneSpec& scene, const SamplingSpec& sampling, int band_radius) {
  Scene s = generate(scene);
  SparseDepth sparse = sample(s.gt, sampling);
  return {std::move(s.gt), std::move(sparse), s.discontinuity.dilated(band_radius)};
}

namespace {

// First/second moment buffers for one parameter group.
class GroupOptimizer {
 public:
  GroupOptimizer(const FitConfig& cfg, std::size_t n) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

  // Returns the step to add to parameter i.
  double step(std::size_t i, double grad) {
    switch (cfg_.optimizer) {
      case OptimizerKind::Plain:
        return -cfg_.step_size * grad;
      case OptimizerKind::Momentum:
        m_[i] = cfg_.momentum * m_[i] + grad;
        return -cfg_.step_size * m_[i];
      case OptimizerKind::Adam: {
        m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad;
        v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad * grad;
        const double mh = m_[i] / (1.0 - pow1_);
        const double vh = v_[i] / (1.0 - pow2_);
        return -cfg_.step_size * mh / (std::sqrt(vh) + cfg_.epsilon);
      }
    }
    return 0.0;
  }

  void next_iteration() {
    pow1_ *= cfg_.beta1;
    pow2_ *= cfg_.beta2;
  }

 private:
  const FitConfig& cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  double pow1_ = 1.0;  // beta1^t
  double pow2_ = 1.0;  // beta2^t
};

}  // namespace

PropagationInputs initial_parameters(const FitScene& scene, const FitConfig& config,
                                     const PropagationConfig& prop) {
  const int h = scene.gt.height();
  const int w = scene.gt.width();
  const int k = prop.neighbor_mode.neighbor_count();
  Rng rng = make_rng(config.seed, 0x666974ULL);
  std::normal_distribution<double> normal(0.0, 1.0);

  InitialDepth init = init_depth_idw(scene.sparse, config.idw_power, config.conf_lambda);
  PropagationInputs in;
  in.x0 = std::move(init.depth);
  in.conf = std::move(init.confidence);
  in.seeds = scene.sparse;

  const std::vector<Offset> pattern = base_pattern(prop.neighbor_mode);
  in.neighbors = NeighborField::uniform(h, w, pattern);
  if (!prop.neighbor_mode.fixed() && static_cast<int>(pattern.size()) != k) {
    // Non-local with K != 8: start from a ring of radius 1.
    in.neighbors = NeighborField(h, w, k);
    for (std::size_t j = 0; j < in.neighbors.offsets().size(); ++j) {
      const double angle = 2.0 * 3.14159265358979323846 * static_cast<double>(j % k) / k;
      in.neighbors.offsets()[j] = {std::sin(angle), std::cos(angle)};
    }
  }
  if (!prop.neighbor_mode.fixed() && config.jitter_offsets) {
    for (Offset& o : in.neighbors.offsets()) {
      o.row += config.jitter_sigma * normal(rng);
      o.col += config.jitter_sigma * normal(rng);
    }
  }
  in.raw = AffinityField(h, w, k);
  for (double& r : in.raw.values()) r = config.raw_init + config.raw_init_sigma * normal(rng);
  return in;
}

FitResult fit(const FitScene& scene, const FitConfig& config, const PropagationConfig& prop_in) {
  config.check();
  PropagationConfig prop = prop_in;
  prop.check();

  PropagationInputs params = initial_parameters(scene, config, prop);
  LossSpec spec{config.rho, Mask(scene.gt.height(), scene.gt.width(), true)};

  const bool learn_offsets = config.learn.offsets && !prop.neighbor_mode.fixed();
  const bool learn_conf = config.learn.confidence && prop.use_confidence;
  const bool learn_gamma =
      config.learn.gamma && prop.scheme.kind == NormKind::TanhGammaAbsSumStar;

  GroupOptimizer opt_x0(config, params.x0.size());
  GroupOptimizer opt_raw(config, params.raw.size());
  GroupOptimizer opt_off(config, params.neighbors.offsets().size() * 2);
  GroupOptimizer opt_conf(config, params.x0.size());
  GroupOptimizer opt_gamma(config, 1);

  FitResult result;
  result.best_loss = std::numeric_limits<double>::infinity();
  auto record = [&](double l, int it) {
    if (!std::isfinite(l)) {
      throw FitDivergence("loss became non-finite at iteration " + std::to_string(it));
    }
    result.loss_trace.push_back(l);
    result.gamma_trace.push_back(prop.scheme.gamma);
    if (l < result.best_loss) {
      result.best_loss = l;
      result.best_iteration = it;
      result.params = params;
      result.prop = prop;
    }
    result.best_trace.push_back(result.best_loss);
  };

  for (int it = 0; it < config.iterations; ++it) {
    const BackwardResult br = backward(params, prop, scene.gt, spec);
    record(br.loss, it);
    const GradientBundle& g = br.grads;

    for (GroupOptimizer* o : {&opt_x0, &opt_raw, &opt_off, &opt_conf, &opt_gamma}) {
      o->next_iteration();
    }
    if (config.learn.x0) {
      for (std::size_t i = 0; i < params.x0.size(); ++i) params.x0[i] += opt_x0.step(i, g.d_x0[i]);
    }
    if (config.learn.affinities) {
      for (std::size_t i = 0; i < params.raw.size(); ++i) {
        params.raw[i] += opt_raw.step(i, g.d_raw_aff[i]);
      }
    }
    if (learn_offsets) {
      auto offs = params.neighbors.offsets();
      for (std::size_t j = 0; j < offs.size(); ++j) {
        offs[j].row += opt_off.step(2 * j, g.d_offsets[2 * j]);
        offs[j].col += opt_off.step(2 * j + 1, g.d_offsets[2 * j + 1]);
      }
    }
    if (learn_conf) {
      Field2D c = params.conf->field();
      for (std::size_t i = 0; i < c.size(); ++i) c[i] += opt_conf.step(i, g.d_conf[i]);
      params.conf = ConfidenceMap(std::move(c));
    }
    if (learn_gamma) {
      NormScheme& s = prop.scheme;
      s.gamma = std::clamp(s.gamma + opt_gamma.step(0, g.d_gamma), s.gamma_min, s.gamma_max);
    }
  }
  // Score the parameters produced by the last update as well.
  record(evaluate_loss(params, prop, scene.gt, spec), config.iterations);
  result.final_loss = result.loss_trace.back();

  ForwardTape tape = forward(result.params, result.prop);
  result.prediction = tape.states.back();
  const Mask valid(scene.gt.height(), scene.gt.width(), true);
  result.metrics = evaluate(result.prediction, scene.gt, valid);
  if ((scene.band & valid).count() > 0) {
    result.band_metrics = evaluate_banded(result.prediction, scene.gt, valid, scene.band);
  }
  return result;
}

namespace {

MetricReport mean_report(const std::vector<MetricReport>& reports) {
  MetricReport out;
  const double n = static_cast<double>(reports.size());
  for (const MetricReport& r : reports) {
    out.rmse += r.rmse / n;
    out.mae += r.mae / n;
    out.irmse += r.irmse / n;
    out.imae += r.imae / n;
    out.rel += r.rel / n;
    for (std::size_t t = 0; t < 3; ++t) out.delta[t] += r.delta[t] / n;
    out.count += r.count;
    out.inverse_defined = out.inverse_defined && r.inverse_defined;
  }
  return out;
}

std::string mode_label(const NeighborMode& mode) {
  if (mode.kind == NeighborKind::SpnThreeWay) {
    return "spn-" + std::string(to_string(mode.direction));
  }
  return std::string(to_string(mode.kind));
}

}  // namespace

std::vector<AblationRow> ablation_grid(const std::vector<FitScene>& scenes, const AblationAxes& axes,
                                       const FitConfig& fit_config,
                                       const PropagationConfig& base_prop, int workers) {
  if (scenes.empty()) throw std::invalid_argument("ablation_grid: no scenes");
  std::vector<AblationRow> rows;
  for (const NeighborMode& mode : axes.neighbor_modes) {
    for (const NormScheme& scheme : axes.schemes) {
      for (bool conf : axes.confidence) {
        AblationRow row;
        row.neighbor_mode = mode;
        row.scheme = scheme;
        row.confidence = conf;
        rows.push_back(row);
      }
    }
  }

  auto run_row = [&](AblationRow& row) {
    PropagationConfig prop = base_prop;
    prop.neighbor_mode = row.neighbor_mode;
    prop.scheme = row.scheme;
    prop.use_confidence = row.confidence;
    prop.keep_trace = false;
    std::vector<MetricReport> full;
    std::vector<MetricReport> band;
    double loss_sum = 0.0;
    for (const FitScene& scene : scenes) {
      const FitResult r = fit(scene, fit_config, prop);
      full.push_back(r.metrics);
      band.push_back(r.band_metrics);
      loss_sum += r.best_loss;
    }
    row.metrics = mean_report(full);
    row.band_metrics = mean_report(band);
    row.loss = loss_sum / static_cast<double>(scenes.size());
  };

  if (workers <= 1) {
    for (AblationRow& row : rows) run_row(row);
  } else {
    for (std::size_t start = 0; start < rows.size(); start += static_cast<std::size_t>(workers)) {
      std::vector<std::future<void>> batch;
      for (std::size_t i = start; i < std::min(rows.size(), start + workers); ++i) {
        batch.push_back(std::async(std::launch::async, [&, i] { run_row(rows[i]); }));
      }
      for (auto& f : batch) f.get();
    }
  }
  return rows;
}

std::string ablation_csv_header() {
  return "neighbors,scheme,confidence,loss,rmse,mae,irmse,imae,rel,d1,d2,d3,band_rmse,band_mae";
}

std::string to_csv_row(const AblationRow& row) {
  std::string out = mode_label(row.neighbor_mode) + "," + std::string(to_string(row.scheme.kind)) +
                    "," + (row.confidence ? "on" : "off") + "," + format_real(row.loss);
  const MetricReport& m = row.metrics;
  for (double v : {m.rmse, m.mae, m.irmse, m.imae, m.rel, m.delta[0], m.delta[1], m.delta[2],
                   row.band_metrics.rmse, row.band_metrics.mae}) {
    out += "," + format_real(v);
  }
  return out;
}

std::vector<std::pair<SceneSpec, SamplingSpec>> standard_suite(int size, std::uint64_t seed,
                                                                double mixing_rate) {
  std::vector<std::pair<SceneSpec, SamplingSpec>> suite;
  const std::pair<SceneKind, int> kinds[] = {{SceneKind::TwoPlaneStep, 0},
                                             {SceneKind::SlantedPlanes, 3},
                                             {SceneKind::BoxesOnGround, 3},
                                             {SceneKind::Staircase, 4}};
  std::uint64_t stream = 0;
  for (const auto& [kind, count] : kinds) {
    SceneSpec scene;
    scene.kind = kind;
    scene.count = count;
    scene.height = size;
    scene.width = size;
    scene.depth_min = 1.0;
    scene.depth_max = kind == SceneKind::TwoPlaneStep ? 2.0 : 10.0;
    scene.seed = derive_seed(seed, stream++);
    SamplingSpec sampling;
    sampling.protocol = SamplingProtocol::UniformRandom;
    sampling.count = std::max(1, size * size / 20);
    sampling.noise = mixing_rate > 0.0 ? NoiseKind::BoundaryMixing : NoiseKind::None;
    sampling.radius = 1;
    sampling.rate = mixing_rate;
    sampling.seed = derive_seed(seed, stream++);
    suite.emplace_back(scene, sampling);
  }
  return suite;
}

}  // namespace nlspn
