#include "nlspn/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nlspn {

namespace {

void check_dims(int height, int width) {
  if (height < 1 || width < 1) {
    throw ShapeError("grid dimensions must be positive, got " + std::to_string(height) +
                     "x" + std::to_string(width));
  }
}

}  // namespace

Field2D::Field2D(int height, int width, double fill) : height_(height), width_(width) {
  check_dims(height, width);
  if (!std::isfinite(fill)) throw ShapeError("fill value must be finite");
  values_.assign(static_cast<std::size_t>(height) * width, fill);
}

Field2D::Field2D(int height, int width, std::vector<double> values)
    : height_(height), width_(width), values_(std::move(values)) {
  check_dims(height, width);
  if (values_.size() != static_cast<std::size_t>(height) * width) {
    throw ShapeError("value count does not match " + std::to_string(height) + "x" +
                     std::to_string(width));
  }
}

double Field2D::min() const { return *std::min_element(values_.begin(), values_.end()); }
double Field2D::max() const { return *std::max_element(values_.begin(), values_.end()); }

Field2D make_field(int height, int width, double fill) { return Field2D(height, width, fill); }

Mask::Mask(int height, int width, bool fill) : height_(height), width_(width) {
  check_dims(height, width);
  bits_.assign(static_cast<std::size_t>(height) * width, fill ? 1 : 0);
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

Mask Mask::operator&(const Mask& other) const {
  if (height_ != other.height_ || width_ != other.width_) {
    throw ShapeError("mask shapes differ");
  }
  Mask out(height_, width_);
  for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] = bits_[i] & other.bits_[i];
  return out;
}

Mask Mask::dilated(int radius) const {
  Mask out(height_, width_);
  for (int r = 0; r < height_; ++r) {
    for (int c = 0; c < width_; ++c) {
      if (!(*this)(r, c)) continue;
      for (int dr = -radius; dr <= radius; ++dr) {
        for (int dc = -radius; dc <= radius; ++dc) {
          const int rr = r + dr;
          const int cc = c + dc;
          if (rr >= 0 && rr < height_ && cc >= 0 && cc < width_) out.set(rr, cc, true);
        }
      }
    }
  }
  return out;
}

SparseDepth::SparseDepth(Field2D depth, Mask mask)
    : depth_(std::move(depth)), mask_(std::move(mask)) {
  if (!mask_.same_shape(depth_)) throw ShapeError("sparse depth mask shape mismatch");
  if (mask_.count() == 0) throw ShapeError("sparse depth needs at least one sample");
  for (std::size_t i = 0; i < depth_.size(); ++i) {
    if (!mask_[i]) depth_[i] = 0.0;
  }
}

double clamp_unit(double v) { return std::clamp(v, 0.0, 1.0); }

ConfidenceMap::ConfidenceMap(Field2D values) : values_(std::move(values)) {
  for (double& v : values_.values()) v = clamp_unit(v);
}

ConfidenceMap::ConfidenceMap(int height, int width, double fill)
    : ConfidenceMap(Field2D(height, width, fill)) {}

NeighborField::NeighborField(int height, int width, int k, Offset fill)
    : height_(height), width_(width), k_(k) {
  check_dims(height, width);
  if (k < 1) throw ShapeError("neighbor count must be at least 1");
  offsets_.assign(static_cast<std::size_t>(height) * width * k, fill);
}

NeighborField NeighborField::uniform(int height, int width, std::span<const Offset> pattern) {
  NeighborField out(height, width, static_cast<int>(pattern.size()));
  for (std::size_t i = 0; i < out.offsets_.size(); ++i) {
    out.offsets_[i] = pattern[i % pattern.size()];
  }
  return out;
}

ChannelStack::ChannelStack(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
  check_dims(height, width);
  if (channels < 1) throw ShapeError("channel count must be at least 1");
  values_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

ChannelStack::ChannelStack(int height, int width, int channels, std::vector<double> values)
    : height_(height), width_(width), channels_(channels), values_(std::move(values)) {
  check_dims(height, width);
  if (channels < 1) throw ShapeError("channel count must be at least 1");
  if (values_.size() != static_cast<std::size_t>(height) * width * channels) {
    throw ShapeError("value count does not match stack shape");
  }
}

Field2D ChannelStack::channel(int c) const {
  Field2D out(height_, width_);
  for (int r = 0; r < height_; ++r) {
    for (int col = 0; col < width_; ++col) out(r, col) = (*this)(r, col, c);
  }
  return out;
}

std::optional<Violation> validate(const Field2D& field) {
  for (int r = 0; r < field.height(); ++r) {
    for (int c = 0; c < field.width(); ++c) {
      if (!std::isfinite(field(r, c))) return Violation{"non-finite value", r, c};
    }
  }
  return std::nullopt;
}

std::optional<Violation> validate(const ChannelStack& stack) {
  for (int r = 0; r < stack.height(); ++r) {
    for (int c = 0; c < stack.width(); ++c) {
      for (int k = 0; k < stack.channels(); ++k) {
        if (!std::isfinite(stack(r, c, k))) return Violation{"non-finite value", r, c, k};
      }
    }
  }
  return std::nullopt;
}

std::optional<Violation> validate(const NeighborField& neighbors) {
  if (neighbors.k() < 1) return Violation{"neighbor count below 1", 0, 0};
  for (int r = 0; r < neighbors.height(); ++r) {
    for (int c = 0; c < neighbors.width(); ++c) {
      for (int k = 0; k < neighbors.k(); ++k) {
        const Offset& o = neighbors.at(r, c, k);
        if (!std::isfinite(o.row) || !std::isfinite(o.col)) {
          return Violation{"non-finite offset", r, c, k};
        }
      }
    }
  }
  return std::nullopt;
}

std::optional<Violation> validate(const ConfidenceMap& conf) {
  if (auto v = validate(conf.field())) return v;
  for (int r = 0; r < conf.height(); ++r) {
    for (int c = 0; c < conf.width(); ++c) {
      if (conf(r, c) < 0.0 || conf(r, c) > 1.0) return Violation{"confidence outside [0,1]", r, c};
    }
  }
  return std::nullopt;
}

std::optional<Violation> validate(const SparseDepth& sparse) {
  if (auto v = validate(sparse.depth())) return v;
  for (int r = 0; r < sparse.height(); ++r) {
    for (int c = 0; c < sparse.width(); ++c) {
      if (!sparse.mask()(r, c) && sparse.depth()(r, c) != 0.0) {
        return Violation{"unobserved entry is not zero", r, c};
      }
    }
  }
  if (sparse.mask().count() == 0) return Violation{"no observed samples", 0, 0};
  return std::nullopt;
}

std::optional<Violation> validate(const NormalizedAffinity& affinity) {
  const ChannelStack& w = affinity.weights;
  if (auto v = validate(w)) return v;
  if (auto v = validate(affinity.reference)) return v;
  for (int r = 0; r < w.height(); ++r) {
    for (int c = 0; c < w.width(); ++c) {
      double abs_sum = 0.0;
      double sum = 0.0;
      for (double x : w.pixel(r, c)) {
        abs_sum += std::abs(x);
        sum += x;
      }
      if (abs_sum > 1.0 + 1e-12) return Violation{"stability bound exceeded", r, c};
      if (std::abs(affinity.reference(r, c) - (1.0 - sum)) > 1e-12) {
        return Violation{"reference weight is not 1 - sum(w)", r, c};
      }
    }
  }
  return std::nullopt;
}

}  // namespace nlspn
