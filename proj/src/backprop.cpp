#include "nlspn/backprop.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "nlspn/rng.hpp"
#include "nlspn/sampler.hpp"

namespace nlspn {

namespace {

double sign(double v) { return (v > 0.0) - (v < 0.0); }

std::size_t valid_count(const Field2D& pred, const Field2D& gt, const LossSpec& spec) {
  if (!pred.same_shape(gt) || !spec.valid.same_shape(gt)) {
    throw ShapeError("loss: prediction, ground truth and mask shapes differ");
  }
  if (spec.rho != 1 && spec.rho != 2) throw std::invalid_argument("loss: rho must be 1 or 2");
  const std::size_t n = spec.valid.count();
  if (n == 0) throw std::invalid_argument("loss: empty valid set");
  return n;
}

std::int64_t axis_code(double x, int n) {
  if (x < 0.0) return -1;
  if (x > n - 1) return n;
  return static_cast<std::int64_t>(std::floor(x));
}

void check_inputs(const PropagationInputs& in, const PropagationConfig& config) {
  config.check();
  if (!in.neighbors.matches(in.x0) || in.raw.height() != in.x0.height() ||
      in.raw.width() != in.x0.width() || in.raw.channels() != in.neighbors.k()) {
    throw ShapeError("propagation inputs have inconsistent shapes");
  }
  if (config.use_confidence) {
    if (!in.conf) throw std::invalid_argument("confidence enabled but no confidence map given");
    if (in.conf->height() != in.x0.height() || in.conf->width() != in.x0.width()) {
      throw ShapeError("confidence map shape mismatch");
    }
  }
  if (config.replace_seeds) {
    if (!in.seeds || in.seeds->height() != in.x0.height() || in.seeds->width() != in.x0.width()) {
      throw ShapeError("replace_seeds requires sparse depth of the same shape");
    }
  }
}

}  // namespace

double loss(const Field2D& pred, const Field2D& gt, const LossSpec& spec) {
  const std::size_t n = valid_count(pred, gt, spec);
  double acc = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!spec.valid[i]) continue;
    const double r = std::abs(gt[i] - pred[i]);
    acc += spec.rho == 1 ? r : r * r;
  }
  return acc / static_cast<double>(n);
}

Field2D loss_grad(const Field2D& pred, const Field2D& gt, const LossSpec& spec) {
  const double inv = 1.0 / static_cast<double>(valid_count(pred, gt, spec));
  Field2D g(gt.height(), gt.width(), 0.0);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!spec.valid[i]) continue;
    const double r = pred[i] - gt[i];
    g[i] = spec.rho == 1 ? sign(r) * inv : 2.0 * r * inv;
  }
  return g;
}

ForwardTape forward(const PropagationInputs& in, const PropagationConfig& config) {
  check_inputs(in, config);
  const int h = in.x0.height();
  const int w = in.x0.width();
  const int k = in.neighbors.k();
  const NormScheme& scheme = config.scheme;
  const bool use_conf = config.use_confidence;

  ForwardTape tape;
  tape.pre = ChannelStack(h, w, k);
  tape.conf = ChannelStack(h, w, k, 1.0);
  tape.weights = ChannelStack(h, w, k);
  tape.reference = Field2D(h, w);
  tape.l1 = Field2D(h, w);
  tape.fired.assign(static_cast<std::size_t>(h) * w, 0);
  tape.degenerate.assign(static_cast<std::size_t>(h) * w, 0);
  auto& sig = tape.signature;

  if (use_conf) {
    for (double c : in.conf->field().values()) sig.push_back(c <= 0.0 || c >= 1.0);
  }
  for (int m = 0; m < h; ++m) {
    for (int n = 0; n < w; ++n) {
      const std::size_t px = in.x0.index(m, n);
      auto pre = tape.pre.pixel(m, n);
      auto conf = tape.conf.pixel(m, n);
      const auto raw = in.raw.pixel(m, n);
      for (int i = 0; i < k; ++i) {
        const Offset& o = in.neighbors.at(m, n, i);
        const double r = m + o.row;
        const double c = n + o.col;
        sig.push_back(axis_code(r, h));
        sig.push_back(axis_code(c, w));
        if (use_conf) conf[i] = sample(in.conf->field(), {r, c});
        switch (scheme.kind) {
          case NormKind::AbsSum:
          case NormKind::AbsSumStar: pre[i] = raw[i]; break;
          case NormKind::TanhC: pre[i] = std::tanh(raw[i]) / scheme.c; break;
          case NormKind::TanhGammaAbsSumStar: pre[i] = std::tanh(raw[i]) / scheme.gamma; break;
        }
      }
      double s = 0.0;
      for (int i = 0; i < k; ++i) {
        const double v = conf[i] * pre[i];
        s += std::abs(v);
        sig.push_back(static_cast<std::int64_t>(sign(v)));
      }
      tape.l1[px] = s;

      const PixelWeights pw =
          normalize_pixel(raw, use_conf ? std::span<const double>(conf) : std::span<const double>{},
                          scheme);
      std::copy(pw.weights.begin(), pw.weights.end(), tape.weights.pixel(m, n).begin());
      tape.reference[px] = reference_weight(pw.weights);
      tape.fired[px] = pw.fallback_fired;
      tape.degenerate[px] = pw.degenerate;
      sig.push_back(pw.fallback_fired);
      sig.push_back(pw.degenerate);
    }
  }

  const NormalizedAffinity affinity{tape.weights, tape.reference};
  tape.states.reserve(static_cast<std::size_t>(config.steps) + 1);
  tape.states.push_back(in.x0);
  for (int t = 0; t < config.steps; ++t) {
    Field2D next = apply_step(tape.states.back(), in.neighbors, affinity, config.workers);
    if (config.replace_seeds) {
      for (std::size_t i = 0; i < next.size(); ++i) {
        if (in.seeds->mask()[i]) next[i] = in.seeds->depth()[i];
      }
    }
    tape.states.push_back(std::move(next));
  }
  return tape;
}

GradientBundle backward_from(const PropagationInputs& in, const PropagationConfig& config,
                             const ForwardTape& tape, const Field2D& output_cotangent) {
  const int h = in.x0.height();
  const int w = in.x0.width();
  const int k = in.neighbors.k();
  const NormScheme& scheme = config.scheme;
  if (!output_cotangent.same_shape(in.x0)) throw ShapeError("cotangent shape mismatch");

  GradientBundle g{Field2D(h, w), ChannelStack(h, w, k), ChannelStack(h, w, 2 * k),
                   Field2D(h, w), 0.0};
  ChannelStack d_weights(h, w, k);

  // Reverse sweep over the propagation steps.
  Field2D cot = output_cotangent;
  for (int t = config.steps; t >= 1; --t) {
    const Field2D& prev = tape.states[static_cast<std::size_t>(t) - 1];
    if (config.replace_seeds) {
      for (std::size_t i = 0; i < cot.size(); ++i) {
        if (in.seeds->mask()[i]) cot[i] = 0.0;
      }
    }
    Field2D d_prev(h, w, 0.0);
    for (int m = 0; m < h; ++m) {
      for (int n = 0; n < w; ++n) {
        const std::size_t px = prev.index(m, n);
        const double gy = cot[px];
        if (gy == 0.0) continue;
        d_prev[px] += gy * tape.reference[px];
        for (int i = 0; i < k; ++i) {
          const Offset& o = in.neighbors.at(m, n, i);
          const SampleGrad sg = sample_grad(prev, {m + o.row, n + o.col});
          double value = 0.0;
          for (int c = 0; c < 4; ++c) value += sg.weight[c] * prev[sg.corner[c]];
          const double wi = tape.weights(m, n, i);
          d_weights(m, n, i) += gy * (value - prev[px]);
          for (int c = 0; c < 4; ++c) d_prev[sg.corner[c]] += gy * wi * sg.weight[c];
          g.d_offsets(m, n, 2 * i) += gy * wi * sg.d_row;
          g.d_offsets(m, n, 2 * i + 1) += gy * wi * sg.d_col;
        }
      }
    }
    cot = std::move(d_prev);
  }
  g.d_x0 = std::move(cot);

  // Normalization, confidence and pre-transform.
  std::vector<double> d_v(static_cast<std::size_t>(k));
  for (int m = 0; m < h; ++m) {
    for (int n = 0; n < w; ++n) {
      const std::size_t px = in.x0.index(m, n);
      if (tape.degenerate[px]) continue;
      const auto pre = tape.pre.pixel(m, n);
      const auto conf = tape.conf.pixel(m, n);
      const auto dw = d_weights.pixel(m, n);
      if (tape.fired[px]) {
        const double s = tape.l1[px];
        double dot = 0.0;
        for (int i = 0; i < k; ++i) dot += dw[i] * conf[i] * pre[i];
        for (int i = 0; i < k; ++i) {
          d_v[i] = dw[i] / s - sign(conf[i] * pre[i]) * dot / (s * s);
        }
      } else {
        for (int i = 0; i < k; ++i) d_v[i] = dw[i];
      }

      const auto raw = in.raw.pixel(m, n);
      for (int i = 0; i < k; ++i) {
        const double d_pre = d_v[i] * conf[i];
        switch (scheme.kind) {
          case NormKind::AbsSum:
          case NormKind::AbsSumStar: g.d_raw_aff(m, n, i) = d_pre; break;
          case NormKind::TanhC: {
            const double th = std::tanh(raw[i]);
            g.d_raw_aff(m, n, i) = d_pre * (1.0 - th * th) / scheme.c;
            break;
          }
          case NormKind::TanhGammaAbsSumStar: {
            const double th = std::tanh(raw[i]);
            g.d_raw_aff(m, n, i) = d_pre * (1.0 - th * th) / scheme.gamma;
            g.d_gamma -= d_pre * pre[i] / scheme.gamma;
            break;
          }
        }
        if (config.use_confidence) {
          const double d_c = d_v[i] * pre[i];
          const Offset& o = in.neighbors.at(m, n, i);
          const SampleGrad sg = sample_grad(in.conf->field(), {m + o.row, n + o.col});
          for (int c = 0; c < 4; ++c) g.d_conf[sg.corner[c]] += d_c * sg.weight[c];
          g.d_offsets(m, n, 2 * i) += d_c * sg.d_row;
          g.d_offsets(m, n, 2 * i + 1) += d_c * sg.d_col;
        }
      }
    }
  }
  return g;
}

BackwardResult backward(const PropagationInputs& in, const PropagationConfig& config,
                        const Field2D& gt, const LossSpec& spec) {
  ForwardTape tape = forward(in, config);
  const Field2D& pred = tape.states.back();
  BackwardResult out;
  out.loss = loss(pred, gt, spec);
  out.grads = backward_from(in, config, tape, loss_grad(pred, gt, spec));
  out.signature = std::move(tape.signature);
  if (spec.rho == 1) {
    for (std::size_t i = 0; i < gt.size(); ++i) {
      if (spec.valid[i]) out.signature.push_back(static_cast<std::int64_t>(sign(pred[i] - gt[i])));
    }
  }
  return out;
}

double evaluate_loss(const PropagationInputs& in, const PropagationConfig& config,
                     const Field2D& gt, const LossSpec& spec,
                     std::vector<std::int64_t>* signature) {
  ForwardTape tape = forward(in, config);
  const Field2D& pred = tape.states.back();
  if (signature) {
    *signature = std::move(tape.signature);
    if (spec.rho == 1) {
      for (std::size_t i = 0; i < gt.size(); ++i) {
        if (spec.valid[i]) signature->push_back(static_cast<std::int64_t>(sign(pred[i] - gt[i])));
      }
    }
  }
  return loss(pred, gt, spec);
}

std::string to_string(ParamGroup group) {
  switch (group) {
    case ParamGroup::X0: return "x0";
    case ParamGroup::RawAffinity: return "raw_affinity";
    case ParamGroup::Offsets: return "offsets";
    case ParamGroup::Confidence: return "confidence";
    case ParamGroup::Gamma: return "gamma";
  }
  return "?";
}

GradcheckProblem make_gradcheck_problem(const GradcheckInstance& inst) {
  Rng rng = make_rng(inst.seed, 0x6772616463ULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int h = inst.height;
  const int w = inst.width;
  const int k = inst.k;

  GradcheckProblem p;
  p.config.steps = inst.steps;
  p.config.use_confidence = inst.use_confidence;
  p.config.neighbor_mode.kind = NeighborKind::NonLocal;
  p.config.neighbor_mode.k = k;
  switch (inst.scheme) {
    case NormKind::AbsSum: p.config.scheme = NormScheme::abs_sum(); break;
    case NormKind::AbsSumStar: p.config.scheme = NormScheme::abs_sum_star(); break;
    case NormKind::TanhC: p.config.scheme = NormScheme::tanh_c(static_cast<double>(k)); break;
    case NormKind::TanhGammaAbsSumStar:
      // Small gamma so that some pixels take the fallback branch and some do not.
      p.config.scheme = NormScheme::tanh_gamma(0.4 * k + 0.6 * k * unit(rng), 1.0, 2.0 * k);
      break;
  }

  Field2D x0(h, w);
  Field2D gt(h, w);
  for (std::size_t i = 0; i < x0.size(); ++i) {
    x0[i] = 1.0 + 2.0 * unit(rng);
    gt[i] = 1.0 + 2.0 * unit(rng);
  }
  NeighborField nb(h, w, k);
  for (Offset& o : nb.offsets()) {
    o.row = 4.0 * unit(rng) - 2.0;
    o.col = 4.0 * unit(rng) - 2.0;
  }
  // Raw affinities are scaled so that the L1 fallback fires on a fraction of pixels.
  const double raw_scale = inst.scheme == NormKind::AbsSumStar ? 0.5 / std::sqrt(k) : 1.5;
  AffinityField raw(h, w, k);
  for (double& r : raw.values()) r = raw_scale * normal(rng);
  Field2D conf(h, w);
  for (double& c : conf.values()) c = 0.1 + 0.8 * unit(rng);

  p.inputs.x0 = std::move(x0);
  p.inputs.neighbors = std::move(nb);
  p.inputs.raw = std::move(raw);
  if (inst.use_confidence) p.inputs.conf = ConfidenceMap(std::move(conf));
  p.gt = std::move(gt);
  p.spec.rho = inst.rho;
  p.spec.valid = Mask(h, w, true);
  return p;
}

namespace {

// Accessors that let the checker perturb one scalar of a parameter group.
double& param_ref(GradcheckProblem& p, ParamGroup group, std::size_t i) {
  switch (group) {
    case ParamGroup::X0: return p.inputs.x0[i];
    case ParamGroup::RawAffinity: return p.inputs.raw[i];
    case ParamGroup::Offsets: {
      Offset& o = p.inputs.neighbors.offsets()[i / 2];
      return i % 2 == 0 ? o.row : o.col;
    }
    case ParamGroup::Confidence: break;
    case ParamGroup::Gamma: return p.config.scheme.gamma;
  }
  throw std::logic_error("confidence is perturbed through set_conf");
}

std::size_t group_size(const GradcheckProblem& p, ParamGroup group) {
  switch (group) {
    case ParamGroup::X0: return p.inputs.x0.size();
    case ParamGroup::RawAffinity: return p.inputs.raw.size();
    case ParamGroup::Offsets: return p.inputs.neighbors.offsets().size() * 2;
    case ParamGroup::Confidence: return p.inputs.conf ? p.inputs.conf->field().size() : 0;
    case ParamGroup::Gamma:
      return p.config.scheme.kind == NormKind::TanhGammaAbsSumStar ? 1 : 0;
  }
  return 0;
}

double analytic_at(const GradientBundle& g, ParamGroup group, std::size_t i) {
  switch (group) {
    case ParamGroup::X0: return g.d_x0[i];
    case ParamGroup::RawAffinity: return g.d_raw_aff[i];
    case ParamGroup::Offsets: return g.d_offsets[i];
    case ParamGroup::Confidence: return g.d_conf[i];
    case ParamGroup::Gamma: return g.d_gamma;
  }
  return 0.0;
}

}  // namespace

GradcheckReport gradcheck(const GradcheckProblem& problem, const GradcheckOptions& options,
                          const GradientBundle* analytic) {
  if (!(options.tolerance > 0.0)) throw std::invalid_argument("gradcheck: tolerance must be > 0");
  GradcheckReport report;
  BackwardResult base = backward(problem.inputs, problem.config, problem.gt, problem.spec);
  report.loss = base.loss;
  const GradientBundle& grads = analytic ? *analytic : base.grads;

  GradcheckProblem work = problem;
  Rng rng = make_rng(options.seed, 0x636865636bULL);
  const double h = options.step;
  // Central differences lose about eps*|L|/h to cancellation.
  const double floor = options.floor * std::max(1.0, std::abs(base.loss));

  auto eval = [&](std::vector<std::int64_t>* sig) {
    return evaluate_loss(work.inputs, work.config, work.gt, work.spec, sig);
  };

  for (ParamGroup group : {ParamGroup::X0, ParamGroup::RawAffinity, ParamGroup::Offsets,
                           ParamGroup::Confidence, ParamGroup::Gamma}) {
    const std::size_t n = group_size(problem, group);
    if (n == 0) continue;
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min<std::size_t>(n, static_cast<std::size_t>(options.per_group)));
    std::sort(idx.begin(), idx.end());

    GroupCheck gc;
    gc.group = group;
    for (std::size_t i : idx) {
      std::vector<std::int64_t> sig_plus;
      std::vector<std::int64_t> sig_minus;
      double f_plus = 0.0;
      double f_minus = 0.0;
      if (group == ParamGroup::Confidence) {
        Field2D conf = problem.inputs.conf->field();
        const double c0 = conf[i];
        conf[i] = c0 + h;
        work.inputs.conf = ConfidenceMap(conf);
        f_plus = eval(&sig_plus);
        conf[i] = c0 - h;
        work.inputs.conf = ConfidenceMap(conf);
        f_minus = eval(&sig_minus);
        work.inputs.conf = problem.inputs.conf;
      } else {
        double& x = param_ref(work, group, i);
        const double x0 = x;
        x = x0 + h;
        f_plus = eval(&sig_plus);
        x = x0 - h;
        f_minus = eval(&sig_minus);
        x = x0;
      }
      if (sig_plus != base.signature || sig_minus != base.signature) {
        ++gc.skipped;
        continue;
      }
      const double numeric = (f_plus - f_minus) / (2.0 * h);
      const double a = analytic_at(grads, group, i);
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      const double rel = std::abs(a - numeric) / denom;
      ++gc.checked;
      if (gc.checked == 1 || rel > gc.max_rel_error) {
        gc.max_rel_error = rel;
        gc.worst_index = i;
        gc.worst_analytic = a;
        gc.worst_numeric = numeric;
      }
    }
    gc.pass = gc.max_rel_error < options.tolerance;
    report.pass = report.pass && gc.pass;
    report.groups.push_back(gc);
  }
  return report;
}

}  // namespace nlspn
