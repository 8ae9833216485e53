#include "lctc/optimizer.hpp"

#include <cmath>

#include "lctc/errors.hpp"

namespace lctc {

std::string to_string(OptimizerMethod m) {
  switch (m) {
    case OptimizerMethod::sgd: return "sgd";
    case OptimizerMethod::sgd_momentum: return "sgd-momentum";
    case OptimizerMethod::adam: return "adam";
  }
  return "?";
}

OptimizerMethod parse_optimizer_method(const std::string& s) {
  if (s == "sgd") return OptimizerMethod::sgd;
  if (s == "sgd-momentum" || s == "sgd_momentum") return OptimizerMethod::sgd_momentum;
  if (s == "adam") return OptimizerMethod::adam;
  throw InvalidArgument("unknown optimizer method '" + s + "'");
}

double clip_by_global_norm(std::span<double> g, double max_norm) {
  if (max_norm <= 0.0) return 1.0;
  double sq = 0.0;
  for (double v : g) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return 1.0;
  const double factor = max_norm / norm;
  for (double& v : g) v *= factor;
  return factor;
}

Optimizer::Optimizer(const OptimizerConfig& config, std::size_t num_params) : config_(config) {
  if (!(config.lr > 0.0)) throw InvalidArgument("optimizer: lr must be > 0");
  if (config.method == OptimizerMethod::sgd_momentum) velocity_.assign(num_params, 0.0);
  if (config.method == OptimizerMethod::adam) {
    if (!(config.beta1 >= 0.0 && config.beta1 < 1.0 && config.beta2 >= 0.0 && config.beta2 < 1.0))
      throw InvalidArgument("optimizer: adam betas must lie in [0, 1)");
    m_.assign(num_params, 0.0);
    v_.assign(num_params, 0.0);
  }
  scratch_.resize(num_params);
}

void Optimizer::step(ParameterVector& theta, std::span<const double> grad) {
  const std::size_t n = theta.total_size();
  if (grad.size() != n || scratch_.size() != n) {
    throw ShapeError("optimizer step: gradient has " + std::to_string(grad.size()) +
                     " entries, parameters have " + std::to_string(n));
  }
  std::copy(grad.begin(), grad.end(), scratch_.begin());
  clip_by_global_norm(scratch_, config_.clip_norm);
  ++t_;
  auto p = theta.flat();
  const double lr = config_.lr;
  switch (config_.method) {
    case OptimizerMethod::sgd:
      for (std::size_t i = 0; i < n; ++i) p[i] -= lr * scratch_[i];
      break;
    case OptimizerMethod::sgd_momentum:
      for (std::size_t i = 0; i < n; ++i) {
        velocity_[i] = config_.momentum * velocity_[i] + scratch_[i];
        p[i] -= lr * velocity_[i];
      }
      break;
    case OptimizerMethod::adam: {
      const double b1 = config_.beta1, b2 = config_.beta2;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
      for (std::size_t i = 0; i < n; ++i) {
        const double g = scratch_[i];
        m_[i] = b1 * m_[i] + (1.0 - b1) * g;
        v_[i] = b2 * v_[i] + (1.0 - b2) * g * g;
        p[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + config_.eps);
      }
      break;
    }
  }
}

}  // namespace lctc
