#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lctc/data.hpp"
#include "lctc/lifelong.hpp"
#include "lctc/model.hpp"
#include "lctc/ngram.hpp"

namespace lctc {

enum class SelectionPolicy { random, min_perplexity, median_length };

std::string to_string(SelectionPolicy p);
SelectionPolicy parse_selection_policy(const std::string& s);

/// Candidate order used by a policy:
///   random          seeded uniform permutation
///   min_perplexity  ascending LM perplexity of the labels
///   median_length   ascending |frames - median frames of the dataset|
/// Deterministic orders break ties by utterance id. Throws if the
/// min_perplexity policy is given no LM.
std::vector<std::size_t> selection_order(const TaskDataset& dataset, SelectionPolicy policy,
                                         const NGramLM* lm, std::uint64_t seed);

/// Walks the policy order and keeps utterances while the running frame
/// total stays within budget_frames; stops at the first one that does not
/// fit. The result is in selection order, so any prefix of it is itself the
/// selection for a smaller budget.
std::vector<Utterance> select_for_memory(const TaskDataset& dataset, SelectionPolicy policy,
                                         std::size_t budget_frames, const NGramLM* lm,
                                         std::uint64_t seed);

/// Median of the utterance frame counts (mean of the middle pair for even sizes).
double median_frames(const TaskDataset& dataset);

/// Fixed-capacity rehearsal store balanced across finished tasks.
class EpisodicMemory {
 public:
  EpisodicMemory(std::size_t capacity_frames, SelectionPolicy policy, std::uint64_t seed);

  /// Frame budget of each of k slots: floor(capacity/k), plus one for the
  /// first capacity mod k slots. Never above ceil(capacity/k); sums to capacity.
  std::vector<std::size_t> slot_budgets(std::size_t k) const;

  /// Adds the finished task and shrinks older slots to their budgets by
  /// keeping the selection-ordered prefix that fits.
  void rebalance(const TaskDataset& finished_task, const NGramLM* lm_for_task);

  /// Seed handed to select_for_memory for a task's slot.
  std::uint64_t selection_seed(int task_id) const noexcept;

  std::size_t capacity_frames() const noexcept { return capacity_frames_; }
  SelectionPolicy policy() const noexcept { return policy_; }
  const std::map<int, std::vector<Utterance>>& slots() const noexcept { return slots_; }
  std::size_t stored_frames() const noexcept;
  std::size_t stored_utterances() const noexcept;
  bool empty() const noexcept { return stored_utterances() == 0; }

  /// All stored utterances, pooled across tasks in task order.
  std::vector<const Utterance*> pooled() const;

 private:
  std::size_t capacity_frames_;
  SelectionPolicy policy_;
  std::uint64_t seed_;
  std::map<int, std::vector<Utterance>> slots_;
};

/// Mean CTC-loss gradient over every stored utterance. Throws on an empty
/// memory.
GradientVector memory_gradient(const SequenceModel& model, const ParameterVector& theta,
                               const EpisodicMemory& memory);

}  // namespace lctc
