#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "nlspn/propagation.hpp"
#include "nlspn/synth.hpp"
#include "nlspn/toy_learner.hpp"

namespace nlspn {

/// Standard-suite selection for ablation runs.
struct SuiteSpec {
  int size = 32;
  std::uint64_t seed = 1;
  double mixing_rate = 0.3;
};

/// Parsed run configuration. Sections that were absent stay empty/default.
struct RunConfig {
  std::optional<SceneSpec> scene;
  std::optional<SamplingSpec> sampling;
  PropagationConfig propagation;
  FitConfig fit;
  std::optional<AblationAxes> ablation;
  std::optional<SuiteSpec> suite;
  int ablation_workers = 1;
};

/// JSON text with sections "scene", "sampling", "propagation", "fit",
/// "ablation". Unknown keys and invalid enum names raise ConfigError.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Scheme from its name with the defaults used throughout: C = K for
/// Tanh-C, gamma = K within [1, 2K] for Tanh-gamma.
NormScheme default_scheme(NormKind kind, int k);

}  // namespace nlspn
