#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nlspn/grid.hpp"
#include "nlspn/propagation.hpp"

namespace nlspn {

/// Reconstruction loss settings: rho = 1 (L1) or 2 (L2) over valid pixels.
struct LossSpec {
  int rho = 2;
  Mask valid;
};

/// Mean of |gt - pred|^rho over valid pixels.
double loss(const Field2D& pred, const Field2D& gt, const LossSpec& spec);
/// d loss / d pred. For rho = 1 the subgradient at a zero residual is 0.
Field2D loss_grad(const Field2D& pred, const Field2D& gt, const LossSpec& spec);

/// Every learnable input of one propagation run.
struct PropagationInputs {
  Field2D x0;
  NeighborField neighbors;
  AffinityField raw;
  /// Read only when the config enables confidence.
  std::optional<ConfidenceMap> conf;
  /// Read only when the config enables seed replacement.
  std::optional<SparseDepth> seeds;
};

struct GradientBundle {
  Field2D d_x0;
  ChannelStack d_raw_aff;
  /// Channel 2k is d/d(row offset of neighbor k), channel 2k+1 the column.
  ChannelStack d_offsets;
  Field2D d_conf;
  double d_gamma = 0.0;
};

/// Tape of one forward pass. `signature` encodes every discrete branch taken
/// (fallback, absolute-value signs, bilinear cells and clamps, L1 residual
/// signs); two evaluations with equal signatures lie on the same smooth piece.
struct ForwardTape {
  std::vector<Field2D> states;
  ChannelStack pre;       // pre-transformed raw affinities, before confidence
  ChannelStack conf;      // sampled neighbor confidence (1 when disabled)
  ChannelStack weights;   // final normalized weights
  Field2D reference;
  Field2D l1;             // L1 norm of the confidence-scaled vector
  std::vector<unsigned char> fired;
  std::vector<unsigned char> degenerate;
  std::vector<std::int64_t> signature;
};

ForwardTape forward(const PropagationInputs& in, const PropagationConfig& config);

/// Reverse sweep from an arbitrary cotangent on the final state.
GradientBundle backward_from(const PropagationInputs& in, const PropagationConfig& config,
                             const ForwardTape& tape, const Field2D& output_cotangent);

struct BackwardResult {
  double loss = 0.0;
  GradientBundle grads;
  std::vector<std::int64_t> signature;
};

/// Loss of the propagated prediction and its gradient w.r.t. x0, raw
/// affinities, offsets, confidence and gamma. d_gamma is the unconstrained
/// derivative; projection onto the gamma bounds is left to the optimizer.
BackwardResult backward(const PropagationInputs& in, const PropagationConfig& config,
                        const Field2D& gt, const LossSpec& spec);

/// Loss only (forward pass), used by finite differences.
double evaluate_loss(const PropagationInputs& in, const PropagationConfig& config,
                     const Field2D& gt, const LossSpec& spec,
                     std::vector<std::int64_t>* signature = nullptr);

enum class ParamGroup { X0, RawAffinity, Offsets, Confidence, Gamma };
std::string to_string(ParamGroup group);

struct GroupCheck {
  ParamGroup group;
  int checked = 0;
  int skipped = 0;
  double max_rel_error = 0.0;
  /// Flat index of the worst coordinate inside its group.
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool pass = true;
};

struct GradcheckReport {
  std::vector<GroupCheck> groups;
  double loss = 0.0;
  bool pass = true;
};

/// Random problem instance for gradient checking.
struct GradcheckInstance {
  int height = 8;
  int width = 8;
  int k = 4;
  int steps = 3;
  int rho = 2;
  NormKind scheme = NormKind::TanhGammaAbsSumStar;
  bool use_confidence = true;
  std::uint64_t seed = 1;
};

struct GradcheckProblem {
  PropagationInputs inputs;
  PropagationConfig config;
  Field2D gt;
  LossSpec spec;
};

GradcheckProblem make_gradcheck_problem(const GradcheckInstance& instance);

struct GradcheckOptions {
  double tolerance = 1e-5;
  double step = 1e-6;
  /// Coordinates checked per group (all of them when the group is smaller).
  int per_group = 64;
  std::uint64_t seed = 1;
  /// Relative error denominator is max(|analytic|, |numeric|, floor * max(1, |loss|)).
  double floor = 1e-4;
};

/// Central differences on a random subset of every parameter group.
/// Coordinates whose +-h perturbation changes the branch signature
/// (subgradient points, clamp and cell boundaries, fallback flips) are
/// skipped. `analytic` defaults to backward() when not provided.
GradcheckReport gradcheck(const GradcheckProblem& problem, const GradcheckOptions& options,
                          const GradientBundle* analytic = nullptr);

}  // namespace nlspn
