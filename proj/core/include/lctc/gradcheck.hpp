#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "lctc/parameters.hpp"

namespace lctc {

/// Value and analytic gradient of a scalar objective at some θ.
struct Evaluation {
  double value = 0.0;
  GradientVector gradient;
};

using Objective = std::function<Evaluation(const ParameterVector&)>;

struct FiniteDiffOptions {
  double step = 1e-5;
  /// Flat coordinates to probe; empty probes every coordinate.
  std::vector<std::size_t> coordinates;
};

/// Max over probed coordinates of
///   |analytic - central| / (|analytic| + |central| + 1e-12).
/// Throws if f(θ ± h) is not finite.
double finite_diff_check(const Objective& f, const ParameterVector& theta,
                         const FiniteDiffOptions& options = {});

/// `count` distinct coordinates in [0, total), deterministic in seed.
std::vector<std::size_t> random_probe_coordinates(std::size_t total, std::size_t count,
                                                  std::uint64_t seed);

}  // namespace lctc
