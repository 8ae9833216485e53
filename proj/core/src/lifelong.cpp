#include "lctc/lifelong.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lctc/errors.hpp"
#include "lctc/objective.hpp"

namespace lctc {

ImportanceMap::ImportanceMap(std::vector<double> values) : values_(std::move(values)) {
  for (double v : values_) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw InvalidArgument("ImportanceMap: entries must be finite and >= 0");
    }
  }
}

void RegularizerConfig::validate() const {
  if (!(lambda >= 0.0)) throw InvalidArgument("regularizer: lambda must be >= 0");
  if (!(kd_temperature > 0.0)) throw InvalidArgument("regularizer: kd_temperature must be > 0");
  if (!(kd_weight >= 0.0)) throw InvalidArgument("regularizer: kd_weight must be >= 0");
  if (!(ewc_online_decay > 0.0 && ewc_online_decay <= 1.0))
    throw InvalidArgument("regularizer: ewc_online_decay must lie in (0, 1]");
  if (!(si_xi > 0.0)) throw InvalidArgument("regularizer: si_xi must be > 0");
  if (fisher_samples < 1) throw InvalidArgument("regularizer: fisher_samples must be >= 1");
}

ImportanceMap fisher_diagonal(const SequenceModel& model, const ParameterVector& theta,
                              const TaskDataset& dataset, std::size_t num_samples,
                              std::uint64_t seed) {
  if (dataset.empty()) throw InvalidArgument("fisher_diagonal: empty dataset");
  if (num_samples < 1) throw InvalidArgument("fisher_diagonal: num_samples must be >= 1");

  std::vector<std::size_t> picks(dataset.size());
  std::iota(picks.begin(), picks.end(), std::size_t{0});
  if (num_samples < dataset.size()) {
    std::mt19937_64 rng(seed);
    std::shuffle(picks.begin(), picks.end(), rng);
    picks.resize(num_samples);
    std::sort(picks.begin(), picks.end());
  }

  std::vector<double> acc(theta.total_size(), 0.0);
  std::size_t used = 0;
  for (std::size_t i : picks) {
    try {
      const Evaluation e = utterance_ctc_objective(model, theta, dataset.utterances[i]);
      for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += e.gradient[j] * e.gradient[j];
      ++used;
    } catch (const InfeasibleAlignment&) {
    }
  }
  if (used > 0) {
    const double inv = 1.0 / static_cast<double>(used);
    for (double& v : acc) v *= inv;
  }
  return ImportanceMap(std::move(acc));
}

Penalty ewc_penalty(const ParameterVector& theta, const ParameterSnapshot& theta_star,
                    const ImportanceMap& importance, double lambda) {
  const std::size_t n = theta.total_size();
  if (theta_star.total_size() != n || importance.size() != n) {
    throw ShapeError("ewc_penalty: layout mismatch (theta " + std::to_string(n) + ", anchor " +
                     std::to_string(theta_star.total_size()) + ", importance " +
                     std::to_string(importance.size()) + ")");
  }
  Penalty p;
  p.gradient.assign(n, 0.0);
  auto cur = theta.flat();
  auto star = theta_star.flat();
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = cur[i] - star[i];
    sq += importance[i] * d * d;
    p.gradient[i] = lambda * importance[i] * d;
  }
  p.value = 0.5 * lambda * sq;
  return p;
}

EwcState::EwcState(EwcMode mode, double decay) : mode_(mode), decay_(decay) {
  if (mode == EwcMode::online && !(decay > 0.0 && decay <= 1.0)) {
    throw InvalidArgument("online EWC: decay must lie in (0, 1]");
  }
}

void EwcState::consolidate(const ImportanceMap& importance, const ParameterSnapshot& theta_star) {
  if (importance.size() != theta_star.total_size()) {
    throw ShapeError("ewc_consolidate: importance and anchor sizes differ");
  }
  if (mode_ == EwcMode::separate || anchors_.empty()) {
    anchors_.push_back({theta_star, importance});
    return;
  }
  Anchor& a = anchors_.front();
  if (a.importance.size() != importance.size()) {
    throw ShapeError("ewc_consolidate: importance layout changed between tasks");
  }
  std::vector<double> merged(importance.size());
  for (std::size_t i = 0; i < merged.size(); ++i)
    merged[i] = decay_ * a.importance[i] + importance[i];
  a.importance = ImportanceMap(std::move(merged));
  a.theta_star = theta_star;
}

Penalty EwcState::penalty(const ParameterVector& theta, double lambda) const {
  Penalty total;
  total.gradient.assign(theta.total_size(), 0.0);
  for (const auto& a : anchors_) {
    Penalty p = ewc_penalty(theta, a.theta_star, a.importance, lambda);
    total.value += p.value;
    for (std::size_t i = 0; i < p.gradient.size(); ++i) total.gradient[i] += p.gradient[i];
  }
  return total;
}

SIState SIState::start(const ParameterSnapshot& theta, double xi) {
  if (!(xi > 0.0)) throw InvalidArgument("SI: xi must be > 0");
  return SIState{GradientVector(theta.total_size(), 0.0), theta, xi};
}

void SIState::accumulate_step(std::span<const double> grad, std::span<const double> delta_theta) {
  if (grad.size() != omega_running.size() || delta_theta.size() != omega_running.size()) {
    throw ShapeError("si_accumulate_step: layout mismatch");
  }
  for (std::size_t i = 0; i < omega_running.size(); ++i)
    omega_running[i] -= grad[i] * delta_theta[i];
}

ImportanceMap si_consolidate(const ImportanceMap& previous, const SIState& state,
                             const ParameterSnapshot& theta_end) {
  if (!(state.xi > 0.0)) throw InvalidArgument("si_consolidate: xi must be > 0");
  const std::size_t n = state.omega_running.size();
  if (previous.size() != n || theta_end.total_size() != n ||
      state.theta_at_task_start.total_size() != n) {
    throw ShapeError("si_consolidate: layout mismatch");
  }
  auto end = theta_end.flat();
  auto start = state.theta_at_task_start.flat();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double drift = end[i] - start[i];
    out[i] = previous[i] + std::max(state.omega_running[i], 0.0) / (drift * drift + state.xi);
  }
  return ImportanceMap(std::move(out));
}

KdResult kd_loss(const RealArray& logits_old, const RealArray& logits_new, double temperature) {
  if (!(temperature > 0.0)) throw InvalidArgument("kd_loss: temperature must be > 0");
  if (logits_old.shape() != logits_new.shape() || logits_new.rank() != 2) {
    throw ShapeError("kd_loss: shape mismatch " + shape_string(logits_old.shape()) + " vs " +
                     shape_string(logits_new.shape()));
  }
  const std::size_t frames = logits_new.rows(), classes = logits_new.cols();
  RealArray old_scaled = logits_old, new_scaled = logits_new;
  for (double& v : old_scaled.data()) v /= temperature;
  for (double& v : new_scaled.data()) v /= temperature;
  const RealArray log_p = log_softmax_rows(old_scaled);
  const RealArray log_q = log_softmax_rows(new_scaled);

  KdResult r;
  r.grad_logits_new = RealArray(logits_new.shape());
  const double inv_frames = 1.0 / static_cast<double>(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    double kl = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      const double p = std::exp(log_p(t, c));
      if (p > 0.0) kl += p * (log_p(t, c) - log_q(t, c));
      r.grad_logits_new(t, c) = (std::exp(log_q(t, c)) - p) / temperature * inv_frames;
    }
    r.value += kl;
  }
  r.value = std::max(0.0, r.value * inv_frames);
  return r;
}

Var kd_loss(const RealArray& logits_old, Var logits_new, double temperature) {
  KdResult r = kd_loss(logits_old, logits_new.value(), temperature);
  return ad::external_scalar(logits_new, r.value, std::move(r.grad_logits_new));
}

GemProjection gem_project(std::span<const double> g, std::span<const double> g_mem) {
  if (g.size() != g_mem.size()) {
    throw ShapeError("gem_project: layout mismatch " + std::to_string(g.size()) + " vs " +
                     std::to_string(g_mem.size()));
  }
  GemProjection out;
  out.gradient.assign(g.begin(), g.end());
  const double mem_sq = squared_norm(g_mem);
  if (mem_sq == 0.0) {
    out.degenerate_memory = true;
    return out;
  }
  const double d = dot(g, g_mem);
  if (d >= 0.0) return out;
  const double coef = d / mem_sq;
  for (std::size_t i = 0; i < g.size(); ++i) out.gradient[i] = g[i] - coef * g_mem[i];
  out.projected = true;
  return out;
}

}  // namespace lctc
