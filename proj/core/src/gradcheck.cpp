#include "lctc/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lctc/errors.hpp"

namespace lctc {

double finite_diff_check(const Objective& f, const ParameterVector& theta,
                         const FiniteDiffOptions& options) {
  if (!(options.step > 0.0)) throw InvalidArgument("finite_diff_check: step must be > 0");
  const Evaluation base = f(theta);
  if (base.gradient.size() != theta.total_size()) {
    throw ShapeError("finite_diff_check: gradient has " + std::to_string(base.gradient.size()) +
                     " entries, parameters have " + std::to_string(theta.total_size()));
  }
  std::vector<std::size_t> coords = options.coordinates;
  if (coords.empty()) {
    coords.resize(theta.total_size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
  }

  const double h = options.step;
  ParameterVector probe = theta;
  double worst = 0.0;
  for (std::size_t i : coords) {
    if (i >= theta.total_size()) throw InvalidArgument("finite_diff_check: coordinate out of range");
    const double orig = theta.flat()[i];
    probe.flat()[i] = orig + h;
    const double up = f(probe).value;
    probe.flat()[i] = orig - h;
    const double down = f(probe).value;
    probe.flat()[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw Error("finite_diff_check: objective not finite at coordinate " + std::to_string(i));
    }
    const double central = (up - down) / (2.0 * h);
    const double analytic = base.gradient[i];
    const double err =
        std::abs(analytic - central) / (std::abs(analytic) + std::abs(central) + 1e-12);
    worst = std::max(worst, err);
  }
  return worst;
}

std::vector<std::size_t> random_probe_coordinates(std::size_t total, std::size_t count,
                                                  std::uint64_t seed) {
  std::vector<std::size_t> all(total);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(std::min(count, total));
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace lctc
