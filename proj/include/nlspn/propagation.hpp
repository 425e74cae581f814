#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "nlspn/affinity_norm.hpp"
#include "nlspn/grid.hpp"

namespace nlspn {

enum class SpnDirection { TopDown, BottomUp, LeftRight, RightLeft };

/// Three-way neighbors from the previous row/column of a directional scan.
std::vector<Offset> pattern_spn(SpnDirection direction);
/// The eight neighbors of the 3x3 window, row-major, center excluded.
std::vector<Offset> pattern_cspn();

enum class NeighborKind { SpnThreeWay, Cspn3x3, NonLocal };

struct NeighborMode {
  NeighborKind kind = NeighborKind::NonLocal;
  SpnDirection direction = SpnDirection::TopDown;
  /// Neighbor count for NonLocal; fixed patterns ignore it.
  int k = 8;

  int neighbor_count() const;
  bool fixed() const { return kind != NeighborKind::NonLocal; }
};

std::string_view to_string(NeighborKind kind);
std::string_view to_string(SpnDirection direction);
/// "spn-top-down", "spn-bottom-up", "spn-left-right", "spn-right-left",
/// "cspn", "nonlocal".
NeighborMode parse_neighbor_mode(std::string_view name);

/// Integer pattern of a fixed mode, or the CSPN window for NonLocal (its
/// usual starting point).
std::vector<Offset> base_pattern(const NeighborMode& mode);

struct PropagationConfig {
  int steps = 18;
  NormScheme scheme = NormScheme::tanh_gamma_for(8);
  bool use_confidence = true;
  NeighborMode neighbor_mode;
  /// Re-impose observed sparse depths after every step. Off by default.
  bool replace_seeds = false;
  bool keep_trace = false;
  /// Row-parallel workers inside one step; results do not depend on it.
  int workers = 1;

  void check() const;
};

struct NormStats {
  std::size_t fallback_pixels = 0;
  /// Abs-Sum pixels whose raw affinities were all zero (identity propagation).
  std::size_t degenerate_pixels = 0;
};

struct NormalizedField {
  NormalizedAffinity affinity;
  NormStats stats;
};

/// Per-pixel normalization. With `conf`, neighbor confidence is bilinearly
/// sampled at the neighbor coordinates.
NormalizedField normalize_affinities(const AffinityField& raw, const NeighborField& neighbors,
                                     const ConfidenceMap* conf, const NormScheme& scheme);

/// One step with pre-normalized weights; neighbor values come from gather.
Field2D apply_step(const Field2D& x, const NeighborField& neighbors,
                   const NormalizedAffinity& affinity, int workers = 1);

Field2D propagate_step(const Field2D& x, const NeighborField& neighbors,
                       const AffinityField& raw, const ConfidenceMap* conf,
                       const NormScheme& scheme, NormStats* stats = nullptr);

struct PropagationResult {
  Field2D output;
  /// x^0 ... x^T when tracing was requested, otherwise empty.
  std::vector<Field2D> trace;
  NormStats stats;
};

/// T steps with weights normalized once and reused. `seeds` is only read
/// when config.replace_seeds is set.
PropagationResult propagate(const Field2D& x0, const PropagationConfig& config,
                            const NeighborField& neighbors, const AffinityField& raw,
                            const ConfidenceMap* conf, const SparseDepth* seeds = nullptr);

/// Dedicated path for integer stencils: neighbor values are read by clamped
/// integer indexing instead of bilinear sampling.
Field2D propagate_fixed_local(const Field2D& x0, std::span<const Offset> pattern,
                              const NormalizedAffinity& affinity, int steps);

/// Mean over pixels of the (population) variance of the K neighbor depths.
double neighbor_depth_variance(const Field2D& gt, const NeighborField& neighbors);

}  // namespace nlspn
