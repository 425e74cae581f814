#include "nlspn/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "nlspn/affinity_norm.hpp"
#include "nlspn/backprop.hpp"
#include "nlspn/config.hpp"
#include "nlspn/csv.hpp"
#include "nlspn/io.hpp"
#include "nlspn/metrics.hpp"
#include "nlspn/propagation.hpp"
#include "nlspn/synth.hpp"
#include "nlspn/toy_learner.hpp"

namespace nlspn {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kSchemeNames = {"abs-sum", "abs-sum-star", "tanh-c",
                                               "tanh-gamma-abs-sum-star"};

/// Runtime failure with a message for stderr.
class CliFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(IoErrc::Open, path.string());
  out << text;
  if (!out) throw IoError(IoErrc::Write, path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(IoErrc::Open, dir.string() + ": " + ec.message());
}

Field2D mask_to_field(const Mask& m) {
  Field2D f(m.height(), m.width());
  for (std::size_t i = 0; i < m.size(); ++i) f[i] = m[i] ? 1.0 : 0.0;
  return f;
}

Mask field_to_mask(const Field2D& f) {
  Mask m(f.height(), f.width());
  for (std::size_t i = 0; i < f.size(); ++i) m.set(i, f[i] != 0.0);
  return m;
}

bool is_png(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png";
}

/// Depth map plus validity: PNG zeros or non-positive NLFM values are invalid.
DepthImage read_depth_any(const fs::path& p) {
  if (is_png(p)) return read_depth_png16(p);
  Field2D f = read_field(p);
  Mask valid(f.height(), f.width());
  for (std::size_t i = 0; i < f.size(); ++i) valid.set(i, f[i] > 0.0);
  return {std::move(f), std::move(valid)};
}

std::string fit_trace_csv(const FitResult& r) {
  std::string out = "iteration,loss,best_loss,gamma\n";
  for (std::size_t i = 0; i < r.loss_trace.size(); ++i) {
    out += std::to_string(i) + "," + format_real(r.loss_trace[i]) + "," +
           format_real(r.best_trace[i]) + "," + format_real(r.gamma_trace[i]) + "\n";
  }
  return out;
}

// ---- subcommands -----------------------------------------------------------

int cmd_synth(const fs::path& spec_path, const fs::path& out_dir, std::ostream& out) {
  const RunConfig cfg = load_run_config(spec_path);
  if (!cfg.scene || !cfg.sampling) {
    throw ConfigError("synth needs 'scene' and 'sampling' sections");
  }
  const Scene scene = generate(*cfg.scene);
  const SparseDepth sparse = sample(scene.gt, *cfg.sampling);

  ensure_dir(out_dir);
  write_map(out_dir / "gt.nlfm", scene.gt);
  write_map(out_dir / "sparse.nlfm", sparse.depth());
  write_map(out_dir / "mask.nlfm", mask_to_field(sparse.mask()));
  write_map(out_dir / "discontinuity.nlfm", mask_to_field(scene.discontinuity));
  write_depth_png16(out_dir / "gt.png", scene.gt);
  write_depth_png16(out_dir / "sparse.png", sparse.depth(), &sparse.mask());
  out << "scene " << to_string(cfg.scene->kind) << " " << scene.gt.height() << "x"
      << scene.gt.width() << ", " << sparse.mask().count() << " samples\n";
  return kExitOk;
}

int cmd_propagate(const fs::path& cfg_path, const fs::path& in_dir, const fs::path& out_dir,
                  bool trace, std::ostream& out) {
  RunConfig cfg = load_run_config(cfg_path);
  PropagationConfig prop = cfg.propagation;
  prop.keep_trace = trace;

  std::optional<SparseDepth> sparse;
  if (fs::exists(in_dir / "sparse.nlfm") && fs::exists(in_dir / "mask.nlfm")) {
    sparse.emplace(read_field(in_dir / "sparse.nlfm"), field_to_mask(read_field(in_dir / "mask.nlfm")));
  }
  std::optional<InitialDepth> idw;
  auto idw_init = [&]() -> const InitialDepth& {
    if (!sparse) throw CliFailure("need x0.nlfm/conf.nlfm or sparse.nlfm + mask.nlfm in " + in_dir.string());
    if (!idw) idw = init_depth_idw(*sparse, cfg.fit.idw_power, cfg.fit.conf_lambda);
    return *idw;
  };

  PropagationInputs in;
  in.x0 = fs::exists(in_dir / "x0.nlfm") ? read_field(in_dir / "x0.nlfm") : idw_init().depth;
  if (prop.use_confidence) {
    in.conf = fs::exists(in_dir / "conf.nlfm") ? ConfidenceMap(read_field(in_dir / "conf.nlfm"))
                                               : idw_init().confidence;
  }
  if (fs::exists(in_dir / "offsets.nlfm")) {
    in.neighbors = stack_to_offsets(read_map(in_dir / "offsets.nlfm"));
  } else {
    in.neighbors = NeighborField::uniform(in.x0.height(), in.x0.width(), base_pattern(prop.neighbor_mode));
  }
  if (!fs::exists(in_dir / "affinity.nlfm")) throw CliFailure("missing " + (in_dir / "affinity.nlfm").string());
  in.raw = read_map(in_dir / "affinity.nlfm");
  prop.neighbor_mode.k = in.neighbors.k();
  if (prop.neighbor_mode.neighbor_count() != in.neighbors.k()) {
    throw CliFailure("offset map has K=" + std::to_string(in.neighbors.k()) +
                     " but the neighbor mode expects K=" +
                     std::to_string(prop.neighbor_mode.neighbor_count()));
  }
  if (prop.replace_seeds) {
    if (!sparse) throw CliFailure("replace_seeds needs sparse.nlfm + mask.nlfm");
    in.seeds = sparse;
  }

  const PropagationResult r = propagate(in.x0, prop, in.neighbors, in.raw,
                                        in.conf ? &*in.conf : nullptr,
                                        in.seeds ? &*in.seeds : nullptr);
  ensure_dir(out_dir);
  write_map(out_dir / "refined.nlfm", r.output);
  if (trace) {
    ChannelStack stack(r.output.height(), r.output.width(), static_cast<int>(r.trace.size()));
    for (int m = 0; m < stack.height(); ++m) {
      for (int n = 0; n < stack.width(); ++n) {
        for (int t = 0; t < stack.channels(); ++t) stack(m, n, t) = r.trace[t](m, n);
      }
    }
    write_map(out_dir / "trace.nlfm", stack);
  }
  out << "steps " << prop.steps << ", fallback pixels " << r.stats.fallback_pixels
      << ", degenerate pixels " << r.stats.degenerate_pixels << "\n";
  return kExitOk;
}

int cmd_fit(const fs::path& cfg_path, const fs::path& out_dir, std::ostream& out) {
  const RunConfig cfg = load_run_config(cfg_path);
  if (!cfg.scene || !cfg.sampling) throw ConfigError("fit needs 'scene' and 'sampling' sections");
  const FitScene scene = make_fit_scene(*cfg.scene, *cfg.sampling, cfg.fit.band_radius);
  const FitResult r = fit(scene, cfg.fit, cfg.propagation);

  ensure_dir(out_dir);
  write_map(out_dir / "gt.nlfm", scene.gt);
  write_map(out_dir / "sparse.nlfm", scene.sparse.depth());
  write_map(out_dir / "mask.nlfm", mask_to_field(scene.sparse.mask()));
  write_map(out_dir / "x0.nlfm", r.params.x0);
  if (r.params.conf) write_map(out_dir / "conf.nlfm", r.params.conf->field());
  write_map(out_dir / "offsets.nlfm", offsets_to_stack(r.params.neighbors));
  write_map(out_dir / "affinity.nlfm", r.params.raw);
  write_map(out_dir / "refined.nlfm", r.prediction);
  write_text(out_dir / "trace.csv", fit_trace_csv(r));
  std::string metrics = "scope," + metric_csv_header() + "\n";
  metrics += "full," + to_csv_row(r.metrics) + "\n";
  if (r.band_metrics.count > 0) metrics += "band," + to_csv_row(r.band_metrics) + "\n";
  write_text(out_dir / "metrics.csv", metrics);
  nlohmann::json summary = {
      {"best_loss", r.best_loss},
      {"best_iteration", r.best_iteration},
      {"final_loss", r.final_loss},
      {"gamma", r.prop.scheme.gamma},
      {"neighbor_depth_variance", neighbor_depth_variance(scene.gt, r.params.neighbors)},
  };
  write_text(out_dir / "summary.json", summary.dump(2) + "\n");
  out << "best loss " << format_real(r.best_loss) << " at iteration " << r.best_iteration
      << ", rmse " << format_real(r.metrics.rmse) << " mm\n";
  return kExitOk;
}

int cmd_ablate(const fs::path& cfg_path, const fs::path& out_csv, std::ostream& out) {
  const RunConfig cfg = load_run_config(cfg_path);
  if (!cfg.ablation) throw ConfigError("ablate needs an 'ablation' section");
  std::vector<FitScene> scenes;
  if (cfg.suite) {
    for (const auto& [scene, sampling] :
         standard_suite(cfg.suite->size, cfg.suite->seed, cfg.suite->mixing_rate)) {
      scenes.push_back(make_fit_scene(scene, sampling, cfg.fit.band_radius));
    }
  } else if (cfg.scene && cfg.sampling) {
    scenes.push_back(make_fit_scene(*cfg.scene, *cfg.sampling, cfg.fit.band_radius));
  } else {
    throw ConfigError("ablate needs 'ablation.suite' or 'scene' + 'sampling'");
  }
  const std::vector<AblationRow> rows =
      ablation_grid(scenes, *cfg.ablation, cfg.fit, cfg.propagation, cfg.ablation_workers);
  std::string text = ablation_csv_header() + "\n";
  for (const AblationRow& row : rows) text += to_csv_row(row) + "\n";
  if (out_csv.has_parent_path()) ensure_dir(out_csv.parent_path());
  write_text(out_csv, text);
  out << text;
  return kExitOk;
}

int cmd_eval(const fs::path& pred_path, const fs::path& gt_path, const std::string& band_path,
             const std::string& out_path, std::ostream& out) {
  const DepthImage pred = read_depth_any(pred_path);
  const DepthImage gt = read_depth_any(gt_path);
  if (!pred.depth.same_shape(gt.depth)) throw CliFailure("prediction and ground truth shapes differ");
  MetricReport report;
  if (band_path.empty()) {
    report = evaluate(pred.depth, gt.depth, gt.valid);
  } else {
    const Mask band = field_to_mask(read_field(band_path));
    report = evaluate_banded(pred.depth, gt.depth, gt.valid, band);
  }
  const std::string text = metric_csv_header() + "\n" + to_csv_row(report) + "\n";
  if (!out_path.empty()) write_text(out_path, text);
  out << text;
  return kExitOk;
}

NormScheme scheme_from_flags(const std::string& name, int k, std::optional<double> gamma,
                             std::optional<double> c, double default_gamma, double default_c) {
  const NormKind kind = parse_norm_kind(name);
  switch (kind) {
    case NormKind::TanhC: return NormScheme::tanh_c(c.value_or(default_c));
    case NormKind::TanhGammaAbsSumStar: {
      // Analysis runs pin gamma; its training bounds do not apply here.
      const double g = gamma.value_or(default_gamma);
      return NormScheme::tanh_gamma(g, g, g);
    }
    default: return default_scheme(kind, k);
  }
}

int cmd_mc_norm(int k, const std::string& scheme_name, std::uint64_t samples, std::uint64_t seed,
                std::optional<double> gamma, std::optional<double> c, int workers,
                std::ostream& out) {
  const NormScheme scheme = scheme_from_flags(scheme_name, k, gamma, c, k / 2.0, k);
  const NormProbability p = mc_normalization_probability(k, scheme, samples, seed, workers);
  out << format_real(p.probability) << "\n";
  return kExitOk;
}

int cmd_norm_pairs(const std::string& scheme_name, std::uint64_t samples, std::uint64_t seed,
                   std::optional<double> gamma, std::optional<double> c, const fs::path& out_csv,
                   std::ostream& out) {
  const NormScheme scheme = scheme_from_flags(scheme_name, 2, gamma, c, 1.25, 2.0);
  const auto pairs = sample_normalized_pairs(scheme, samples, seed);
  std::string text = "w1,w2\n";
  for (const auto& [w1, w2] : pairs) text += format_real(w1) + "," + format_real(w2) + "\n";
  if (out_csv.has_parent_path()) ensure_dir(out_csv.parent_path());
  write_text(out_csv, text);
  out << pairs.size() << " pairs written to " << out_csv.string() << "\n";
  return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, double tol, std::ostream& out) {
  out << "scheme,confidence,rho,steps,group,checked,skipped,max_rel_error,worst_index,worst_analytic,worst_numeric,pass\n";
  bool all_pass = true;
  std::uint64_t stream = 0;
  for (NormKind kind : {NormKind::AbsSum, NormKind::AbsSumStar, NormKind::TanhC,
                        NormKind::TanhGammaAbsSumStar}) {
    for (bool conf : {true, false}) {
      GradcheckInstance inst;
      inst.scheme = kind;
      inst.use_confidence = conf;
      inst.rho = conf ? 2 : 1;
      inst.steps = conf ? 3 : 1;
      inst.seed = seed * 1000 + stream++;
      const GradcheckProblem problem = make_gradcheck_problem(inst);
      GradcheckOptions opts;
      opts.tolerance = tol;
      opts.seed = seed;
      const GradcheckReport report = gradcheck(problem, opts);
      all_pass = all_pass && report.pass;
      for (const GroupCheck& g : report.groups) {
        out << to_string(kind) << "," << (conf ? "on" : "off") << "," << inst.rho << ","
            << inst.steps << "," << to_string(g.group) << "," << g.checked << "," << g.skipped
            << "," << format_real(g.max_rel_error) << "," << g.worst_index << "," << format_real(g.worst_analytic) << ","
            << format_real(g.worst_numeric) << ","
            << (g.pass ? "pass" : "FAIL") << "\n";
      }
    }
  }
  out << (all_pass ? "gradcheck passed" : "gradcheck FAILED") << "\n";
  return all_pass ? kExitOk : kExitRuntime;
}

}  // namespace

int run_cli(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Non-local spatial propagation toolkit for depth completion"};
  app.require_subcommand(1);

  std::string cfg_path;
  std::string out_path;
  std::string in_dir;
  bool trace = false;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic scene and its sparse samples");
  synth->add_option("--spec", cfg_path, "Run config (JSON)")->required();
  synth->add_option("--out", out_path, "Output directory")->required();

  auto* prop = app.add_subcommand("propagate", "Refine an initial depth map");
  prop->add_option("--config", cfg_path, "Run config (JSON)")->required();
  prop->add_option("--in", in_dir, "Input directory")->required();
  prop->add_option("--out", out_path, "Output directory")->required();
  prop->add_flag("--trace", trace, "Also write every intermediate step");

  auto* fitc = app.add_subcommand("fit", "Fit per-pixel parameters on a synthetic scene");
  fitc->add_option("--config", cfg_path, "Run config (JSON)")->required();
  fitc->add_option("--out", out_path, "Output directory")->required();

  auto* ablate = app.add_subcommand("ablate", "Run the ablation grid");
  ablate->add_option("--config", cfg_path, "Run config (JSON)")->required();
  ablate->add_option("--out", out_path, "Output CSV")->required();

  std::string pred_path;
  std::string gt_path;
  std::string band_path;
  auto* eval = app.add_subcommand("eval", "Evaluate a depth prediction");
  eval->add_option("--pred", pred_path, "Predicted depth (.nlfm or 16-bit .png)")->required();
  eval->add_option("--gt", gt_path, "Ground-truth depth (.nlfm or 16-bit .png)")->required();
  eval->add_option("--band", band_path, "Band mask map; restricts evaluation to it");
  eval->add_option("--out", out_path, "Also write the CSV here");

  int k = 4;
  std::string scheme = "abs-sum-star";
  std::uint64_t samples = 1000000;
  std::uint64_t seed = 0;
  std::optional<double> gamma;
  std::optional<double> c;
  int workers = 1;
  auto* mc = app.add_subcommand("mc-norm", "Monte Carlo normalization probability");
  mc->add_option("--k", k, "Neighbor count")->check(CLI::Range(1, 4096));
  mc->add_option("--scheme", scheme, "Normalization scheme")->check(CLI::IsMember(kSchemeNames));
  mc->add_option("--samples", samples, "Number of draws")->check(CLI::Range(std::uint64_t{1}, std::uint64_t{1} << 40));
  mc->add_option("--seed", seed, "Random seed");
  mc->add_option("--gamma", gamma, "Tanh-gamma parameter (default K/2)")->check(CLI::PositiveNumber);
  mc->add_option("--c", c, "Tanh-C constant (default K)")->check(CLI::PositiveNumber);
  mc->add_option("--workers", workers, "Worker threads")->check(CLI::Range(1, 256));

  auto* pairs = app.add_subcommand("norm-pairs", "Normalized 2-neighbor affinity samples");
  pairs->add_option("--scheme", scheme, "Normalization scheme")->required()->check(CLI::IsMember(kSchemeNames));
  pairs->add_option("--samples", samples, "Number of pairs")->check(CLI::Range(std::uint64_t{1}, std::uint64_t{1} << 32));
  pairs->add_option("--seed", seed, "Random seed");
  pairs->add_option("--gamma", gamma, "Tanh-gamma parameter (default 1.25)")->check(CLI::PositiveNumber);
  pairs->add_option("--c", c, "Tanh-C constant (default 2)")->check(CLI::PositiveNumber);
  pairs->add_option("--out", out_path, "Output CSV")->required();

  double tol = 1e-5;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the backward pass");
  grad->add_option("--seed", seed, "Random seed")->required();
  grad->add_option("--tol", tol, "Relative error tolerance")->check(CLI::PositiveNumber);

  std::vector<std::string> args(argv.rbegin(), argv.rend());
  if (!args.empty()) args.pop_back();  // program name
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*synth) return cmd_synth(cfg_path, out_path, out);
    if (*prop) return cmd_propagate(cfg_path, in_dir, out_path, trace, out);
    if (*fitc) return cmd_fit(cfg_path, out_path, out);
    if (*ablate) return cmd_ablate(cfg_path, out_path, out);
    if (*eval) return cmd_eval(pred_path, gt_path, band_path, out_path, out);
    if (*mc) {
      if (*mc->get_option("--scheme") && scheme.empty()) return kExitUsage;
      return cmd_mc_norm(k, scheme, samples, seed, gamma, c, workers, out);
    }
    if (*pairs) return cmd_norm_pairs(scheme, samples, seed, gamma, c, out_path, out);
    if (*grad) return cmd_gradcheck(seed, tol, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace nlspn
