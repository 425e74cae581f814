#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nlspn/backprop.hpp"
#include "nlspn/metrics.hpp"
#include "nlspn/propagation.hpp"
#include "nlspn/synth.hpp"

namespace nlspn {

struct InitialDepth {
  Field2D depth;
  ConfidenceMap confidence;
};

/// Inverse-distance-weighted fill from the nearest 8 samples (weights
/// 1/d^power); confidence exp(-d_nearest / lambda) with d in pixels.
InitialDepth init_depth_idw(const SparseDepth& sparse, double power = 2.0, double lambda = 4.0);

enum class OptimizerKind { Plain, Momentum, Adam };

struct LearnFlags {
  bool x0 = false;
  bool offsets = true;
  bool affinities = true;
  bool confidence = true;
  bool gamma = true;
};

struct FitConfig {
  int iterations = 500;
  double step_size = 0.02;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  LearnFlags learn;
  /// true: CSPN pattern plus N(0, jitter_sigma) per offset; false: exact pattern.
  bool jitter_offsets = true;
  double jitter_sigma = 0.5;
  /// Raw affinities start at raw_init + raw_init_sigma * N(0,1).
  double raw_init = 0.0;
  double raw_init_sigma = 0.1;
  int rho = 2;
  double idw_power = 2.0;
  double conf_lambda = 4.0;
  /// Boundary band = discontinuity mask dilated by this many pixels.
  int band_radius = 2;
  std::uint64_t seed = 0;

  void check() const;
};

OptimizerKind parse_optimizer(std::string_view name);

/// Ground truth plus its sparse observation and boundary band.
struct FitScene {
  Field2D gt;
  SparseDepth sparse;
  Mask band;
};

FitScene make_fit_scene(const SceneSpec& scene, const SamplingSpec& sampling, int band_radius = 2);

struct FitResult {
  double final_loss = 0.0;
  double best_loss = 0.0;
  int best_iteration = 0;
  std::vector<double> loss_trace;
  std::vector<double> best_trace;
  std::vector<double> gamma_trace;
  /// Parameters at the best iteration.
  PropagationInputs params;
  PropagationConfig prop;
  Field2D prediction;
  MetricReport metrics;
  MetricReport band_metrics;
};

/// Raised when the loss becomes non-finite.
class FitDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Gradient-based fit of the enabled per-pixel parameter groups against the
/// dense ground truth. Fixed neighbor modes never move their offsets.
FitResult fit(const FitScene& scene, const FitConfig& config, const PropagationConfig& prop);

/// Starting parameters used by fit().
PropagationInputs initial_parameters(const FitScene& scene, const FitConfig& config,
                                     const PropagationConfig& prop);

struct AblationAxes {
  std::vector<NeighborMode> neighbor_modes;
  std::vector<NormScheme> schemes;
  std::vector<bool> confidence;
};

struct AblationRow {
  NeighborMode neighbor_mode;
  NormScheme scheme;
  bool confidence = false;
  /// Means over the scenes of the suite.
  MetricReport metrics;
  MetricReport band_metrics;
  double loss = 0.0;
};

/// Cartesian product neighbor_mode x scheme x confidence, each fitted on
/// every scene with identical seeds and budgets.
std::vector<AblationRow> ablation_grid(const std::vector<FitScene>& scenes, const AblationAxes& axes,
                                       const FitConfig& fit_config,
                                       const PropagationConfig& base_prop, int workers = 1);

std::string ablation_csv_header();
std::string to_csv_row(const AblationRow& row);

/// Scene/sampling pairs of the standard synthetic suite: one scene per kind,
/// uniform 5% sampling with boundary mixing.
std::vector<std::pair<SceneSpec, SamplingSpec>> standard_suite(int size, std::uint64_t seed,
                                                                double mixing_rate = 0.3);

}  // namespace nlspn
