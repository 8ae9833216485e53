#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lctc/domain.hpp"
#include "lctc/memory.hpp"
#include "lctc/model.hpp"
#include "lctc/trainer.hpp"

namespace lctc {

inline constexpr int kConfigSchemaVersion = 1;

struct RunConfig {
  int schema_version = kConfigSchemaVersion;
  /// Empty means default_domains(seed).
  std::vector<DomainSpec> domains;
  ModelConfig model;
  Method method = Method::finetune;
  /// Only meaningful for GEM; GEM defaults to random selection.
  std::optional<SelectionPolicy> policy;
  /// Memory capacity as a fraction of the mean per-task training frames.
  double memory_fraction = 0.1;
  TrainConfig train;
  std::size_t lm_order = 2;
  double lm_add_k = 0.1;
  std::uint64_t seed = 1;

  void validate() const;
  SelectionPolicy effective_policy() const {
    return policy.value_or(SelectionPolicy::random);
  }
  std::vector<DomainSpec> resolved_domains() const;
};

struct RunReport {
  std::string method;
  std::string policy;  // "none" unless GEM
  double budget = 0.0; // memory fraction
  std::size_t capacity_frames = 0;
  std::uint64_t seed = 0;
  std::vector<int> task_ids;

  std::vector<CurvePoint> curve;
  /// final_matrix[after_stage][task]: WER on every task's eval set after each stage.
  std::vector<std::vector<double>> final_matrix;
  /// Mean of the last row of final_matrix.
  double averaged_wer = 0.0;
  /// Filled by relative_wer_reduction callers; NaN otherwise.
  double relative_reduction_vs_baseline = 0.0;
  /// Global step at which each stage ended.
  std::vector<std::size_t> stage_end_steps;
  std::size_t skipped_utterances = 0;
  std::size_t gem_projections = 0;
  ParameterVector final_parameters;

  double final_wer(int task_id) const;
  double wer_after_stage(int stage, int task_id) const;
};

struct RunHooks {
  AccessObserver observer;
};

/// Per-stage training on D_1..D_K in order, consolidating after each stage.
/// Requires at least two domains.
RunReport run_sequential(const RunConfig& config, const RunHooks& hooks = {});

/// One phase over the union of all domains with task-balanced batches and
/// the same total number of optimizer steps as the sequential run.
RunReport run_multitask(const RunConfig& config);

/// Draws a task uniformly, then an utterance uniformly within it.
class TaskBalancedSampler {
 public:
  explicit TaskBalancedSampler(std::vector<const TaskDataset*> tasks);
  std::size_t draw_task(Rng& rng) const;
  const Utterance* draw(Rng& rng) const;
  std::size_t num_tasks() const noexcept { return tasks_.size(); }

 private:
  std::vector<const TaskDataset*> tasks_;
};

struct SweepPoint {
  SelectionPolicy policy = SelectionPolicy::random;
  double budget = 0.0;
  RunReport report;
};

/// GEM run per (budget, policy) for policy in {random, median_length}.
std::vector<SweepPoint> run_memory_sweep(const RunConfig& config, std::span<const double> budgets);

/// (baseline − candidate) / baseline on averaged WER.
double relative_wer_reduction(const RunReport& baseline, const RunReport& candidate);

/// Std-dev of the given task's WER over the second half of the given stage.
double curve_oscillation(const RunReport& report, int stage, int task_id);

/// Mean per-task training frames of the run's domains times memory_fraction.
std::size_t memory_capacity_frames(double memory_fraction, const std::vector<DomainData>& data);

}  // namespace lctc
