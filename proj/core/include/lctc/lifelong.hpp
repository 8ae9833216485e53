#pragma once

#include <cstddef>
#include <initializer_list>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lctc/array.hpp"
#include "lctc/autodiff.hpp"
#include "lctc/data.hpp"
#include "lctc/model.hpp"
#include "lctc/parameters.hpp"

namespace lctc {

/// Per-parameter nonnegative importance weights Ω, congruent with θ.
class ImportanceMap {
 public:
  ImportanceMap() = default;
  explicit ImportanceMap(std::size_t size) : values_(size, 0.0) {}
  /// Throws InvalidArgument on a negative or non-finite entry.
  explicit ImportanceMap(std::vector<double> values);
  ImportanceMap(std::initializer_list<double> values) : ImportanceMap(std::vector<double>(values)) {}

  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  friend bool operator==(const ImportanceMap&, const ImportanceMap&) = default;

 private:
  std::vector<double> values_;
};

/// A penalty value and its gradient wrt θ.
struct Penalty {
  double value = 0.0;
  GradientVector gradient;
};

struct RegularizerConfig {
  double lambda = 1.0;          // quadratic penalty scale
  double kd_temperature = 2.0;  // softmax temperature for distillation
  double kd_weight = 3.0;
  double ewc_online_decay = 0.9;
  double si_xi = 0.1;           // SI damping
  std::size_t fisher_samples = 64;

  void validate() const;
};

/// Empirical Fisher diagonal: mean over sampled utterances of the squared
/// per-utterance CTC gradient. Uses every utterance when num_samples >=
/// dataset size, otherwise a seeded sample without replacement. Infeasible
/// utterances are skipped.
ImportanceMap fisher_diagonal(const SequenceModel& model, const ParameterVector& theta,
                              const TaskDataset& dataset, std::size_t num_samples,
                              std::uint64_t seed);

/// (λ/2)·Σ Ωᵢ(θᵢ − θ*ᵢ)² with gradient λ·Ω⊙(θ − θ*).
Penalty ewc_penalty(const ParameterVector& theta, const ParameterSnapshot& theta_star,
                    const ImportanceMap& importance, double lambda);

enum class EwcMode { separate, online };

/// Anchors for EWC. Separate mode keeps one (Ω, θ*) per finished task and
/// sums their penalties; online mode folds everything into one anchor with
/// Ω ← decay·Ω_prev + Ω_new.
class EwcState {
 public:
  struct Anchor {
    ParameterSnapshot theta_star;
    ImportanceMap importance;
  };

  explicit EwcState(EwcMode mode, double decay = 1.0);

  void consolidate(const ImportanceMap& importance, const ParameterSnapshot& theta_star);
  Penalty penalty(const ParameterVector& theta, double lambda) const;

  EwcMode mode() const noexcept { return mode_; }
  const std::vector<Anchor>& anchors() const noexcept { return anchors_; }

 private:
  EwcMode mode_;
  double decay_;
  std::vector<Anchor> anchors_;
};

/// Running path integral for Synaptic Intelligence.
struct SIState {
  GradientVector omega_running;
  ParameterSnapshot theta_at_task_start;
  double xi = 0.1;

  static SIState start(const ParameterSnapshot& theta, double xi);

  /// ω ← ω − grad ⊙ Δθ for one optimizer step.
  void accumulate_step(std::span<const double> grad, std::span<const double> delta_theta);
};

/// Ωᵢ = Ω_prev,ᵢ + max(ωᵢ, 0) / ((θ_end,ᵢ − θ_start,ᵢ)² + ξ).
ImportanceMap si_consolidate(const ImportanceMap& previous, const SIState& state,
                             const ParameterSnapshot& theta_end);

struct KdResult {
  double value = 0.0;
  RealArray grad_logits_new;
};

/// Mean over frames of KL[softmax(z_old/T) ‖ softmax(z_new/T)] and its
/// gradient wrt z_new.
KdResult kd_loss(const RealArray& logits_old, const RealArray& logits_new, double temperature);

/// Tape node for kd_loss; logits_old is treated as a constant.
Var kd_loss(const RealArray& logits_old, Var logits_new, double temperature);

struct GemProjection {
  GradientVector gradient;
  bool projected = false;
  /// g_mem was all zeros, so no constraint could be formed.
  bool degenerate_memory = false;
};

/// Closed-form minimum-L2 projection of g onto {g̃ : ⟨g̃, g_mem⟩ >= 0}.
GemProjection gem_project(std::span<const double> g, std::span<const double> g_mem);

}  // namespace lctc
