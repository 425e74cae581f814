#include <gtest/gtest.h>

#include <cmath>

#include "nlspn/backprop.hpp"
#include "test_util.hpp"

using namespace nlspn;

namespace {

Mask all_valid(int h, int w) { return Mask(h, w, true); }

GradcheckProblem problem(NormKind kind, bool conf, int rho, int steps, std::uint64_t seed) {
  GradcheckInstance inst;
  inst.scheme = kind;
  inst.use_confidence = conf;
  inst.rho = rho;
  inst.steps = steps;
  inst.seed = seed;
  return make_gradcheck_problem(inst);
}

}  // namespace

TEST(Loss, Examples) {
  const Field2D gt(1, 2, std::vector<double>{1, 2});
  const Field2D pred(1, 2, std::vector<double>{1, 3});
  EXPECT_EQ(loss(gt, gt, {2, all_valid(1, 2)}), 0.0);
  EXPECT_DOUBLE_EQ(loss(pred, gt, {1, all_valid(1, 2)}), 0.5);
  EXPECT_DOUBLE_EQ(loss(pred, gt, {2, all_valid(1, 2)}), 0.5);
  EXPECT_THROW(loss(pred, gt, {2, Mask(1, 2)}), std::invalid_argument);
}

TEST(LossGrad, L1SubgradientAtZeroResidual) {
  const Field2D gt(1, 3, std::vector<double>{1, 2, 3});
  const Field2D pred(1, 3, std::vector<double>{1, 2.5, 2});
  const Field2D g = loss_grad(pred, gt, {1, all_valid(1, 3)});
  EXPECT_EQ(g[0], 0.0);
  EXPECT_DOUBLE_EQ(g[1], 1.0 / 3);
  EXPECT_DOUBLE_EQ(g[2], -1.0 / 3);
}

TEST(Backward, ZeroTanhAffinitiesPassLossGradientToX0) {
  std::mt19937_64 rng(1);
  PropagationInputs in;
  in.x0 = nlspn::testing::random_field(5, 5, rng, 1, 2);
  in.neighbors = nlspn::testing::random_offsets(5, 5, 3, rng, 2);
  in.raw = ChannelStack(5, 5, 3);
  PropagationConfig c;
  c.steps = 3;
  c.scheme = NormScheme::tanh_c(3);
  c.use_confidence = false;
  c.neighbor_mode.k = 3;
  const Field2D gt = nlspn::testing::random_field(5, 5, rng, 1, 2);
  const LossSpec spec{2, all_valid(5, 5)};
  const BackwardResult r = backward(in, c, gt, spec);
  const Field2D lg = loss_grad(in.x0, gt, spec);
  for (std::size_t i = 0; i < lg.size(); ++i) EXPECT_DOUBLE_EQ(r.grads.d_x0[i], lg[i]);
  for (double v : r.grads.d_offsets.values()) EXPECT_EQ(v, 0.0);
}

TEST(Gradcheck, DefaultInstancePasses) {
  const GradcheckProblem p = problem(NormKind::TanhGammaAbsSumStar, true, 2, 3, 5);
  GradcheckOptions o;
  const GradcheckReport r = gradcheck(p, o);
  EXPECT_TRUE(r.pass);
  for (const GroupCheck& g : r.groups) {
    EXPECT_LT(g.max_rel_error, 1e-5) << to_string(g.group);
    if (g.group != ParamGroup::Gamma) EXPECT_GE(g.checked, 50) << to_string(g.group);
  }
}

TEST(Gradcheck, EverySchemeAndMode) {
  std::uint64_t seed = 100;
  for (NormKind kind : {NormKind::AbsSum, NormKind::AbsSumStar, NormKind::TanhC,
                        NormKind::TanhGammaAbsSumStar}) {
    for (bool conf : {false, true}) {
      for (int rho : {1, 2}) {
        const GradcheckReport r = gradcheck(problem(kind, conf, rho, rho == 1 ? 1 : 3, seed++), {});
        EXPECT_TRUE(r.pass) << to_string(kind) << " conf=" << conf << " rho=" << rho;
      }
    }
  }
}

TEST(Gradcheck, DetectsCorruptedCoordinate) {
  const GradcheckProblem p = problem(NormKind::AbsSumStar, true, 2, 3, 7);
  BackwardResult r = backward(p.inputs, p.config, p.gt, p.spec);
  GradcheckOptions o;
  o.per_group = 1 << 20;  // every coordinate
  r.grads.d_raw_aff[37] += 1e-3;
  const GradcheckReport rep = gradcheck(p, o, &r.grads);
  EXPECT_FALSE(rep.pass);
  for (const GroupCheck& g : rep.groups) {
    if (g.group == ParamGroup::RawAffinity) {
      EXPECT_FALSE(g.pass);
      EXPECT_EQ(g.worst_index, 37u);
    } else {
      EXPECT_TRUE(g.pass) << to_string(g.group);
    }
  }
}

TEST(Gradcheck, L1ZeroResidualPixelIsSkipped) {
  GradcheckProblem p = problem(NormKind::TanhC, false, 1, 1, 9);
  // Force an exact zero residual at pixel 0 by matching gt to the prediction.
  const ForwardTape tape = forward(p.inputs, p.config);
  p.gt[0] = tape.states.back()[0];
  GradcheckOptions o;
  o.per_group = 1 << 20;
  const GradcheckReport r = gradcheck(p, o);
  EXPECT_TRUE(r.pass);
  for (const GroupCheck& g : r.groups) {
    if (g.group == ParamGroup::X0) EXPECT_GE(g.skipped, 1);
  }
}

TEST(Backward, LinearInCotangent) {
  const GradcheckProblem p = problem(NormKind::TanhGammaAbsSumStar, true, 2, 3, 11);
  const ForwardTape tape = forward(p.inputs, p.config);
  std::mt19937_64 rng(3);
  const Field2D cot = nlspn::testing::random_field(8, 8, rng, -1, 1);
  Field2D cot2 = cot;
  for (double& v : cot2.values()) v *= 2;
  const GradientBundle a = backward_from(p.inputs, p.config, tape, cot);
  const GradientBundle b = backward_from(p.inputs, p.config, tape, cot2);
  for (std::size_t i = 0; i < a.d_x0.size(); ++i) EXPECT_EQ(2 * a.d_x0[i], b.d_x0[i]);
  for (std::size_t i = 0; i < a.d_raw_aff.size(); ++i) EXPECT_EQ(2 * a.d_raw_aff[i], b.d_raw_aff[i]);
  for (std::size_t i = 0; i < a.d_offsets.size(); ++i) EXPECT_EQ(2 * a.d_offsets[i], b.d_offsets[i]);
  for (std::size_t i = 0; i < a.d_conf.size(); ++i) EXPECT_EQ(2 * a.d_conf[i], b.d_conf[i]);
  EXPECT_EQ(2 * a.d_gamma, b.d_gamma);
}

TEST(Backward, ZeroConfidenceGate) {
  for (NormKind kind : {NormKind::AbsSum, NormKind::AbsSumStar, NormKind::TanhC,
                        NormKind::TanhGammaAbsSumStar}) {
    GradcheckProblem p = problem(kind, true, 2, 3, 13);
    // Integer offsets land exactly on pixels; zero one pixel's confidence.
    for (Offset& o : p.inputs.neighbors.offsets()) o = {std::round(o.row), std::round(o.col)};
    Field2D conf = p.inputs.conf->field();
    conf(3, 3) = 0.0;
    p.inputs.conf = ConfidenceMap(conf);
    const BackwardResult r = backward(p.inputs, p.config, p.gt, p.spec);
    int gated = 0;
    for (int m = 0; m < 8; ++m) {
      for (int n = 0; n < 8; ++n) {
        for (int k = 0; k < 4; ++k) {
          const Offset& o = p.inputs.neighbors.at(m, n, k);
          const int r0 = std::clamp(m + int(o.row), 0, 7);
          const int c0 = std::clamp(n + int(o.col), 0, 7);
          if (r0 == 3 && c0 == 3) {
            EXPECT_EQ(r.grads.d_raw_aff(m, n, k), 0.0) << to_string(kind);
            ++gated;
          }
        }
      }
    }
    EXPECT_GT(gated, 0);
  }
}

// Property: within one smooth piece, gradients move continuously.
TEST(Backward, BranchConsistencyUnderSmallPerturbation) {
  const GradcheckProblem p = problem(NormKind::AbsSumStar, true, 2, 3, 17);
  const BackwardResult base = backward(p.inputs, p.config, p.gt, p.spec);
  for (double eps : {1e-4, 1e-6, 1e-8}) {
    GradcheckProblem q = p;
    q.inputs.raw[5] += eps;
    const BackwardResult r = backward(q.inputs, q.config, q.gt, q.spec);
    if (r.signature != base.signature) continue;
    double d = 0;
    for (std::size_t i = 0; i < r.grads.d_raw_aff.size(); ++i) {
      d = std::max(d, std::abs(r.grads.d_raw_aff[i] - base.grads.d_raw_aff[i]));
    }
    EXPECT_LT(d, 1e3 * eps);
  }
}

TEST(Backward, GammaGradientIsUnconstrained) {
  GradcheckProblem p = problem(NormKind::TanhGammaAbsSumStar, false, 2, 3, 19);
  p.config.scheme.gamma = p.config.scheme.gamma_max;
  const BackwardResult r = backward(p.inputs, p.config, p.gt, p.spec);
  const double h = 1e-6;
  GradcheckProblem up = p, dn = p;
  up.config.scheme.gamma += h;
  up.config.scheme.gamma_max += h;
  dn.config.scheme.gamma -= h;
  const double num = (evaluate_loss(up.inputs, up.config, up.gt, up.spec) -
                      evaluate_loss(dn.inputs, dn.config, dn.gt, dn.spec)) / (2 * h);
  EXPECT_NEAR(r.grads.d_gamma, num, 1e-5 * std::max(1.0, std::abs(num)));
}

TEST(Backward, ReplaceSeedsBlocksGradientThroughSeeds) {
  GradcheckProblem p = problem(NormKind::TanhC, false, 2, 3, 21);
  Mask m(8, 8);
  m.set(4, 4, true);
  p.inputs.seeds = SparseDepth(Field2D(8, 8, 2.0), m);
  p.config.replace_seeds = true;
  EXPECT_TRUE(gradcheck(p, {}).pass);
}
