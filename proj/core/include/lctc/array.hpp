#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lctc {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles. Most of the library works on rank-2
/// arrays; a scalar has an empty shape and one element.
class RealArray {
 public:
  RealArray() : shape_{}, data_(1, 0.0) {}
  explicit RealArray(Shape shape, double fill = 0.0);
  RealArray(Shape shape, std::vector<double> data);

  static RealArray scalar(double v) { return RealArray(Shape{}, {v}); }
  static RealArray matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return RealArray(Shape{rows, cols}, fill);
  }
  static RealArray matrix(std::size_t rows, std::size_t cols,
                          std::initializer_list<double> values);
  static RealArray row(std::span<const double> values);
  static RealArray row(std::initializer_list<double> values) {
    return row(std::span<const double>(values.begin(), values.size()));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool is_scalar() const noexcept { return data_.size() == 1 && shape_.size() <= 2; }

  // Rank-2 accessors. Vectors are treated as 1 x n.
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols() + c]; }
  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  double item() const;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<const double> row_view(std::size_t r) const noexcept {
    return std::span<const double>(data_).subspan(r * cols(), cols());
  }
  std::vector<double>& storage() noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  bool all_finite() const noexcept;

  friend bool operator==(const RealArray&, const RealArray&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Numerically stable log(sum(exp(values))). Returns -inf for an empty or
/// all -inf input.
double logsumexp(std::span<const double> values);
double log_add(double a, double b);

/// Shortest decimal text that parses back to the identical double.
std::string format_real(double v);
/// Inverse of format_real; throws FormatError on malformed text.
double parse_real(std::string_view text);

}  // namespace lctc
