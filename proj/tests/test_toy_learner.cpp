#include <gtest/gtest.h>

#include <cmath>

#include "nlspn/toy_learner.hpp"
#include "test_util.hpp"

using namespace nlspn;

namespace {

SparseDepth sparse_from(int h, int w, const std::vector<std::tuple<int, int, double>>& pts) {
  Field2D d(h, w);
  Mask m(h, w);
  for (const auto& [r, c, v] : pts) {
    d(r, c) = v;
    m.set(r, c, true);
  }
  return SparseDepth(d, m);
}

FitScene small_scene(std::uint64_t seed) {
  SceneSpec s;
  s.kind = SceneKind::TwoPlaneStep;
  s.height = 12;
  s.width = 12;
  s.depth_min = 1.0;
  s.depth_max = 2.0;
  s.seed = seed;
  SamplingSpec sp;
  sp.count = 14;
  sp.seed = seed;
  return make_fit_scene(s, sp, 2);
}

PropagationConfig small_prop() {
  PropagationConfig p;
  p.steps = 4;
  p.scheme = NormScheme::tanh_gamma_for(8);
  return p;
}

}  // namespace

TEST(Idw, SampleSiteIsExactWithFullConfidence) {
  const InitialDepth init = init_depth_idw(sparse_from(5, 5, {{2, 2, 3.5}}));
  EXPECT_EQ(init.depth(2, 2), 3.5);
  EXPECT_EQ(init.confidence(2, 2), 1.0);
  EXPECT_EQ(init.depth(0, 4), 3.5);
  EXPECT_NEAR(init.confidence(0, 4), std::exp(-std::sqrt(8.0) / 4.0), 1e-15);
}

TEST(Idw, EquidistantPairAverages) {
  const InitialDepth init = init_depth_idw(sparse_from(3, 5, {{1, 0, 1.0}, {1, 4, 3.0}}), 1.0);
  EXPECT_DOUBLE_EQ(init.depth(1, 2), 2.0);
}

TEST(Idw, MatchesScalarFormula) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> ui(0, 9);
  std::uniform_real_distribution<double> uv(1, 5);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::tuple<int, int, double>> pts;
    Mask used(10, 10);
    while (pts.size() < 5) {
      const int r = ui(rng), c = ui(rng);
      if (used(r, c)) continue;
      used.set(r, c, true);
      pts.emplace_back(r, c, uv(rng));
    }
    const double power = 1.5;
    const InitialDepth init = init_depth_idw(sparse_from(10, 10, pts), power, 3.0);
    for (int m = 0; m < 10; ++m) {
      for (int n = 0; n < 10; ++n) {
        if (used(m, n)) continue;
        double num = 0, den = 0, dmin = 1e9;
        for (const auto& [r, c, v] : pts) {
          const double d = std::hypot(r - m, c - n);
          num += v / std::pow(d, power);
          den += 1 / std::pow(d, power);
          dmin = std::min(dmin, d);
        }
        EXPECT_NEAR(init.depth(m, n), num / den, 1e-12);
        EXPECT_NEAR(init.confidence(m, n), std::exp(-dmin / 3.0), 1e-14);
      }
    }
  }
}

TEST(FitConfig, Validation) {
  FitConfig c;
  c.iterations = 0;
  EXPECT_THROW(c.check(), ConfigError);
  c = FitConfig{};
  c.step_size = -1;
  EXPECT_THROW(c.check(), ConfigError);
  EXPECT_THROW(parse_optimizer("rmsprop"), ConfigError);
}

TEST(Fit, NothingLearnedGivesConstantTrace) {
  FitConfig c;
  c.iterations = 15;
  c.learn = {false, false, false, false, false};
  const FitResult r = fit(small_scene(1), c, small_prop());
  for (double l : r.loss_trace) EXPECT_EQ(l, r.loss_trace.front());
}

TEST(Fit, X0OnlyRegressionConverges) {
  FitConfig c;
  c.iterations = 200;
  c.optimizer = OptimizerKind::Plain;
  c.step_size = 12.0 * 12.0 / 4.0;  // halves the residual every iteration
  c.learn = {true, false, false, false, false};
  c.raw_init = 0;
  c.raw_init_sigma = 0;
  PropagationConfig p = small_prop();
  p.scheme = NormScheme::tanh_c(8);
  p.use_confidence = false;
  const FitResult r = fit(small_scene(2), c, p);
  EXPECT_LT(r.best_loss, 1e-6);
}

TEST(Fit, BestLossIsMonotoneAndGammaFeasible) {
  FitConfig c;
  c.iterations = 40;
  c.step_size = 0.05;
  const FitResult r = fit(small_scene(3), c, small_prop());
  ASSERT_EQ(r.best_trace.size(), r.loss_trace.size());
  for (std::size_t i = 1; i < r.best_trace.size(); ++i) EXPECT_LE(r.best_trace[i], r.best_trace[i - 1]);
  for (double g : r.gamma_trace) {
    EXPECT_GE(g, r.prop.scheme.gamma_min);
    EXPECT_LE(g, r.prop.scheme.gamma_max);
  }
  ASSERT_TRUE(r.params.conf);
  EXPECT_GE(r.params.conf->field().min(), 0.0);
  EXPECT_LE(r.params.conf->field().max(), 1.0);
  EXPECT_LT(r.best_loss, r.loss_trace.front());
}

TEST(Fit, SeedDeterminism) {
  FitConfig c;
  c.iterations = 10;
  c.seed = 77;
  const FitResult a = fit(small_scene(4), c, small_prop());
  const FitResult b = fit(small_scene(4), c, small_prop());
  EXPECT_EQ(a.loss_trace, b.loss_trace);
  for (std::size_t i = 0; i < a.prediction.size(); ++i) ASSERT_EQ(a.prediction[i], b.prediction[i]);
}

TEST(Fit, FixedModesKeepTheirOffsets) {
  FitConfig c;
  c.iterations = 10;
  PropagationConfig p = small_prop();
  p.neighbor_mode = parse_neighbor_mode("cspn");
  const FitResult r = fit(small_scene(5), c, p);
  const auto pattern = pattern_cspn();
  for (int m = 0; m < 12; ++m) {
    for (int n = 0; n < 12; ++n) {
      for (int k = 0; k < 8; ++k) {
        EXPECT_EQ(r.params.neighbors.at(m, n, k).row, pattern[k].row);
        EXPECT_EQ(r.params.neighbors.at(m, n, k).col, pattern[k].col);
      }
    }
  }
}

TEST(Ablation, CartesianProductAndDeterminism) {
  AblationAxes axes;
  axes.neighbor_modes = {parse_neighbor_mode("cspn"), parse_neighbor_mode("nonlocal")};
  axes.schemes = {NormScheme::abs_sum(), NormScheme::tanh_gamma_for(8)};
  axes.confidence = {true, false};
  FitConfig c;
  c.iterations = 5;
  const std::vector<FitScene> scenes = {small_scene(6), small_scene(7)};
  const auto a = ablation_grid(scenes, axes, c, small_prop(), 3);
  const auto b = ablation_grid(scenes, axes, c, small_prop(), 1);
  ASSERT_EQ(a.size(), 8u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(to_csv_row(a[i]), to_csv_row(b[i]));
}

TEST(StandardSuite, OneScenePerKind) {
  const auto suite = standard_suite(16, 1, 0.3);
  ASSERT_EQ(suite.size(), 4u);
  for (const auto& [scene, sampling] : suite) {
    EXPECT_EQ(sampling.count, 16 * 16 / 20);
    EXPECT_NO_THROW(make_fit_scene(scene, sampling));
  }
}
