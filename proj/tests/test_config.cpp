#include <gtest/gtest.h>

#include "nlspn/config.hpp"

using namespace nlspn;

TEST(RunConfig, ParsesAllSections) {
  const RunConfig c = parse_run_config(R"({
    "scene": {"kind": "staircase", "count": 5, "height": 20, "width": 30, "seed": 3},
    "sampling": {"protocol": "scanline", "rows": 4, "noise": "gaussian", "sigma": 0.01},
    "propagation": {"steps": 6, "scheme": "tanh-c", "neighbors": "cspn", "use_confidence": false},
    "fit": {"iterations": 12, "optimizer": "momentum", "learn": {"gamma": false}},
    "ablation": {"neighbors": ["cspn"], "schemes": ["abs-sum"], "confidence": [true],
                 "suite": {"size": 16, "seed": 2}, "workers": 2}
  })");
  ASSERT_TRUE(c.scene);
  EXPECT_EQ(c.scene->kind, SceneKind::Staircase);
  EXPECT_EQ(c.scene->count, 5);
  EXPECT_EQ(c.scene->width, 30);
  ASSERT_TRUE(c.sampling);
  EXPECT_EQ(c.sampling->protocol, SamplingProtocol::Scanline);
  EXPECT_EQ(c.sampling->noise, NoiseKind::Gaussian);
  EXPECT_EQ(c.propagation.steps, 6);
  EXPECT_EQ(c.propagation.scheme.kind, NormKind::TanhC);
  EXPECT_EQ(c.propagation.scheme.c, 8.0);
  EXPECT_FALSE(c.propagation.use_confidence);
  EXPECT_EQ(c.fit.iterations, 12);
  EXPECT_EQ(c.fit.optimizer, OptimizerKind::Momentum);
  EXPECT_FALSE(c.fit.learn.gamma);
  EXPECT_TRUE(c.fit.learn.offsets);
  ASSERT_TRUE(c.ablation);
  EXPECT_EQ(c.ablation->neighbor_modes.size(), 1u);
  ASSERT_TRUE(c.suite);
  EXPECT_EQ(c.suite->size, 16);
  EXPECT_EQ(c.ablation_workers, 2);
}

TEST(RunConfig, DefaultsWhenEmpty) {
  const RunConfig c = parse_run_config("{}");
  EXPECT_FALSE(c.scene);
  EXPECT_EQ(c.propagation.steps, 18);
  EXPECT_EQ(c.propagation.scheme.kind, NormKind::TanhGammaAbsSumStar);
  EXPECT_EQ(c.propagation.scheme.gamma, 8.0);
}

TEST(RunConfig, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_run_config(R"({"scenery": {}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"scene": {"kind": "two-plane-step", "colour": 1}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"fit": {"learn": {"everything": true}}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"scene": {"kind": "torus"}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"propagation": {"steps": 0}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"propagation": {"steps": "many"}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"propagation": {"scheme": "tanh-c", "c": 2}})"), ConfigError);
  EXPECT_THROW(parse_run_config("{not json"), ConfigError);
  EXPECT_THROW(load_run_config("/nonexistent/config.json"), ConfigError);
}
