#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lctc/array.hpp"

namespace lctc {

struct ParameterSegment {
  std::string name;
  Shape shape;
  std::size_t offset = 0;
  std::size_t size = 0;

  friend bool operator==(const ParameterSegment&, const ParameterSegment&) = default;
};

/// All trainable parameters of a model as named segments laid out back to
/// back in one flat buffer, so flatten/unflatten are plain copies.
class ParameterVector {
 public:
  ParameterVector() = default;

  /// Appends a segment. Names must be unique.
  void add(std::string name, const RealArray& array);

  std::size_t total_size() const noexcept { return flat_.size(); }
  std::size_t num_segments() const noexcept { return segments_.size(); }
  const ParameterSegment& segment(std::size_t i) const { return segments_.at(i); }
  const std::vector<ParameterSegment>& segments() const noexcept { return segments_; }
  std::optional<std::size_t> find(const std::string& name) const;

  RealArray array(std::size_t i) const;
  std::span<double> values(std::size_t i);
  std::span<const double> values(std::size_t i) const;

  std::span<double> flat() noexcept { return flat_; }
  std::span<const double> flat() const noexcept { return flat_; }
  std::vector<double> flatten() const { return flat_; }
  void unflatten(std::span<const double> values);

  /// Same segment names, shapes and order.
  bool congruent(const ParameterVector& other) const noexcept {
    return segments_ == other.segments_;
  }
  ParameterVector zeros_like() const;

  friend bool operator==(const ParameterVector&, const ParameterVector&) = default;

 private:
  std::vector<ParameterSegment> segments_;
  std::vector<double> flat_;
};

/// A frozen copy of θ, e.g. the optimum of a finished stage.
using ParameterSnapshot = ParameterVector;

/// Flat vector congruent with a ParameterVector (gradients, projections).
using GradientVector = std::vector<double>;

double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> a);

}  // namespace lctc
