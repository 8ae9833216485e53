#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lctc/parameters.hpp"

namespace lctc {

enum class OptimizerMethod { sgd, sgd_momentum, adam };

std::string to_string(OptimizerMethod m);
OptimizerMethod parse_optimizer_method(const std::string& s);

struct OptimizerConfig {
  OptimizerMethod method = OptimizerMethod::adam;
  double lr = 0.01;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Global-norm clipping threshold; <= 0 disables clipping.
  double clip_norm = 5.0;
};

/// Rescales g in place so that ||g|| <= max_norm. Returns the factor applied.
double clip_by_global_norm(std::span<double> g, double max_norm);

/// First-order optimizer holding its per-parameter state.
class Optimizer {
 public:
  Optimizer(const OptimizerConfig& config, std::size_t num_params);

  /// θ ← update(θ, g). For plain SGD this is θ − lr·clip(g).
  void step(ParameterVector& theta, std::span<const double> grad);

  const OptimizerConfig& config() const noexcept { return config_; }
  std::size_t steps_taken() const noexcept { return t_; }

 private:
  OptimizerConfig config_;
  std::vector<double> velocity_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
  std::vector<double> scratch_;
};

}  // namespace lctc
