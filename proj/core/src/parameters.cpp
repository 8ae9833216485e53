#include "lctc/parameters.hpp"

#include <algorithm>

#include "lctc/errors.hpp"

namespace lctc {

void ParameterVector::add(std::string name, const RealArray& array) {
  if (find(name)) throw InvalidArgument("ParameterVector: duplicate segment name '" + name + "'");
  ParameterSegment seg{std::move(name), array.shape(), flat_.size(), array.size()};
  flat_.insert(flat_.end(), array.data().begin(), array.data().end());
  segments_.push_back(std::move(seg));
}

std::optional<std::size_t> ParameterVector::find(const std::string& name) const {
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    if (segments_[i].name == name) return i;
  }
  return std::nullopt;
}

RealArray ParameterVector::array(std::size_t i) const {
  const auto& seg = segments_.at(i);
  auto v = values(i);
  return RealArray(seg.shape, std::vector<double>(v.begin(), v.end()));
}

std::span<double> ParameterVector::values(std::size_t i) {
  const auto& seg = segments_.at(i);
  return std::span<double>(flat_).subspan(seg.offset, seg.size);
}

std::span<const double> ParameterVector::values(std::size_t i) const {
  const auto& seg = segments_.at(i);
  return std::span<const double>(flat_).subspan(seg.offset, seg.size);
}

void ParameterVector::unflatten(std::span<const double> values) {
  if (values.size() != flat_.size()) {
    throw ShapeError("unflatten: expected " + std::to_string(flat_.size()) + " values, got " +
                     std::to_string(values.size()));
  }
  std::copy(values.begin(), values.end(), flat_.begin());
}

ParameterVector ParameterVector::zeros_like() const {
  ParameterVector out = *this;
  std::fill(out.flat_.begin(), out.flat_.end(), 0.0);
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("dot: length " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double squared_norm(std::span<const double> a) { return dot(a, a); }

}  // namespace lctc
