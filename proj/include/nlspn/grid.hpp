#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlspn {

/// Raised when a grid is constructed with invalid shape or non-finite data.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid configuration value (e.g. C < K, gamma out of bounds, unknown
/// enum name).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// First invariant violation found by validate(); `channel` is -1 for
/// single-channel grids.
struct Violation {
  std::string what;
  int row = 0;
  int col = 0;
  int channel = -1;
};

/// H x W grid of 64-bit reals, row-major, (row, col) with origin top-left.
class Field2D {
 public:
  Field2D() = default;
  Field2D(int height, int width, double fill = 0.0);
  Field2D(int height, int width, std::vector<double> values);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return values_.size(); }

  double operator()(int row, int col) const { return values_[index(row, col)]; }
  double& operator()(int row, int col) { return values_[index(row, col)]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  bool same_shape(const Field2D& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  double min() const;
  double max() const;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> values_;
};

Field2D make_field(int height, int width, double fill);

/// Per-pixel boolean mask stored apart from values.
class Mask {
 public:
  Mask() = default;
  Mask(int height, int width, bool fill = false);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return bits_.size(); }

  bool operator()(int row, int col) const {
    return bits_[static_cast<std::size_t>(row) * width_ + col] != 0;
  }
  void set(int row, int col, bool value) {
    bits_[static_cast<std::size_t>(row) * width_ + col] = value ? 1 : 0;
  }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  void set(std::size_t i, bool value) { bits_[i] = value ? 1 : 0; }

  std::size_t count() const;
  bool same_shape(const Field2D& f) const {
    return height_ == f.height() && width_ == f.width();
  }

  Mask operator&(const Mask& other) const;
  /// Square (Chebyshev) dilation by `radius` pixels.
  Mask dilated(int radius) const;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<unsigned char> bits_;
};

/// Observed sparse depth samples; unobserved entries hold 0.
class SparseDepth {
 public:
  SparseDepth(Field2D depth, Mask mask);

  const Field2D& depth() const { return depth_; }
  const Mask& mask() const { return mask_; }
  int height() const { return depth_.height(); }
  int width() const { return depth_.width(); }

 private:
  Field2D depth_;
  Mask mask_;
};

/// Per-pixel confidence, clamped into [0, 1] on construction.
class ConfidenceMap {
 public:
  ConfidenceMap() = default;
  explicit ConfidenceMap(Field2D values);
  ConfidenceMap(int height, int width, double fill);

  const Field2D& field() const { return values_; }
  int height() const { return values_.height(); }
  int width() const { return values_.width(); }
  double operator()(int row, int col) const { return values_(row, col); }

 private:
  Field2D values_;
};

double clamp_unit(double v);

/// Fractional (row, col) offset of one neighbor relative to its reference pixel.
struct Offset {
  double row = 0.0;
  double col = 0.0;
};

/// H x W x K neighbor offsets. Offsets may be fractional and reach outside
/// the 3x3 window.
class NeighborField {
 public:
  NeighborField() = default;
  NeighborField(int height, int width, int k, Offset fill = {});

  /// Same integer pattern replicated at every pixel.
  static NeighborField uniform(int height, int width, std::span<const Offset> pattern);

  int height() const { return height_; }
  int width() const { return width_; }
  int k() const { return k_; }

  const Offset& at(int row, int col, int n) const { return offsets_[slot(row, col, n)]; }
  Offset& at(int row, int col, int n) { return offsets_[slot(row, col, n)]; }

  std::span<const Offset> offsets() const { return offsets_; }
  std::span<Offset> offsets() { return offsets_; }

  std::size_t slot(int row, int col, int n) const {
    return (static_cast<std::size_t>(row) * width_ + col) * k_ + n;
  }

  bool matches(const Field2D& f) const {
    return height_ == f.height() && width_ == f.width();
  }

 private:
  int height_ = 0;
  int width_ = 0;
  int k_ = 0;
  std::vector<Offset> offsets_;
};

/// H x W x K stack of reals; used for raw affinities, normalized weights and
/// gathered neighbor values. Channel index is fastest.
class ChannelStack {
 public:
  ChannelStack() = default;
  ChannelStack(int height, int width, int channels, double fill = 0.0);
  ChannelStack(int height, int width, int channels, std::vector<double> values);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return values_.size(); }

  double operator()(int row, int col, int c) const { return values_[slot(row, col, c)]; }
  double& operator()(int row, int col, int c) { return values_[slot(row, col, c)]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  /// All K channels of one pixel.
  std::span<const double> pixel(int row, int col) const {
    return {values_.data() + slot(row, col, 0), static_cast<std::size_t>(channels_)};
  }
  std::span<double> pixel(int row, int col) {
    return {values_.data() + slot(row, col, 0), static_cast<std::size_t>(channels_)};
  }

  std::size_t slot(int row, int col, int c) const {
    return (static_cast<std::size_t>(row) * width_ + col) * channels_ + c;
  }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  /// Copy of one channel as a Field2D.
  Field2D channel(int c) const;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> values_;
};

/// Raw (unbounded) affinities w-hat, one per neighbor.
using AffinityField = ChannelStack;

/// Normalized neighbor weights plus the per-pixel reference (self) weight.
struct NormalizedAffinity {
  ChannelStack weights;
  Field2D reference;
};

std::optional<Violation> validate(const Field2D& field);
std::optional<Violation> validate(const ChannelStack& stack);
std::optional<Violation> validate(const NeighborField& neighbors);
std::optional<Violation> validate(const ConfidenceMap& conf);
std::optional<Violation> validate(const SparseDepth& sparse);
/// Checks the stability bound and reference = 1 - sum(w) at every pixel.
std::optional<Violation> validate(const NormalizedAffinity& affinity);

}  // namespace nlspn
