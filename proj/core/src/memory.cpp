#include "lctc/memory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lctc/errors.hpp"
#include "lctc/objective.hpp"

namespace lctc {

std::string to_string(SelectionPolicy p) {
  switch (p) {
    case SelectionPolicy::random: return "random";
    case SelectionPolicy::min_perplexity: return "min_perplexity";
    case SelectionPolicy::median_length: return "median_length";
  }
  return "?";
}

SelectionPolicy parse_selection_policy(const std::string& s) {
  if (s == "random") return SelectionPolicy::random;
  if (s == "min_perplexity" || s == "pp") return SelectionPolicy::min_perplexity;
  if (s == "median_length" || s == "len") return SelectionPolicy::median_length;
  throw InvalidArgument("unknown selection policy '" + s + "'");
}

double median_frames(const TaskDataset& dataset) {
  if (dataset.empty()) throw InvalidArgument("median_frames: empty dataset");
  std::vector<std::size_t> lens;
  lens.reserve(dataset.size());
  for (const auto& u : dataset.utterances) lens.push_back(u.frames());
  std::sort(lens.begin(), lens.end());
  const std::size_t n = lens.size();
  if (n % 2 == 1) return static_cast<double>(lens[n / 2]);
  return 0.5 * static_cast<double>(lens[n / 2 - 1] + lens[n / 2]);
}

std::vector<std::size_t> selection_order(const TaskDataset& dataset, SelectionPolicy policy,
                                         const NGramLM* lm, std::uint64_t seed) {
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto& utts = dataset.utterances;
  switch (policy) {
    case SelectionPolicy::random: {
      std::mt19937_64 rng(seed);
      std::shuffle(order.begin(), order.end(), rng);
      break;
    }
    case SelectionPolicy::min_perplexity: {
      if (lm == nullptr) throw InvalidArgument("min_perplexity selection requires a language model");
      std::vector<double> ppl(utts.size());
      for (std::size_t i = 0; i < utts.size(); ++i) ppl[i] = lm->perplexity(utts[i].labels);
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (ppl[a] != ppl[b]) return ppl[a] < ppl[b];
        return utts[a].id < utts[b].id;
      });
      break;
    }
    case SelectionPolicy::median_length: {
      if (dataset.empty()) break;
      const double median = median_frames(dataset);
      auto dist = [&](std::size_t i) { return std::abs(static_cast<double>(utts[i].frames()) - median); };
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double da = dist(a), db = dist(b);
        if (da != db) return da < db;
        return utts[a].id < utts[b].id;
      });
      break;
    }
  }
  return order;
}

std::vector<Utterance> select_for_memory(const TaskDataset& dataset, SelectionPolicy policy,
                                         std::size_t budget_frames, const NGramLM* lm,
                                         std::uint64_t seed) {
  const auto order = selection_order(dataset, policy, lm, seed);
  std::vector<Utterance> out;
  std::size_t used = 0;
  for (std::size_t i : order) {
    const Utterance& u = dataset.utterances[i];
    if (used + u.frames() > budget_frames) break;
    used += u.frames();
    out.push_back(u);
  }
  return out;
}

EpisodicMemory::EpisodicMemory(std::size_t capacity_frames, SelectionPolicy policy,
                               std::uint64_t seed)
    : capacity_frames_(capacity_frames), policy_(policy), seed_(seed) {}

std::vector<std::size_t> EpisodicMemory::slot_budgets(std::size_t k) const {
  if (k == 0) return {};
  std::vector<std::size_t> budgets(k, capacity_frames_ / k);
  for (std::size_t i = 0; i < capacity_frames_ % k; ++i) ++budgets[i];
  return budgets;
}

void EpisodicMemory::rebalance(const TaskDataset& finished_task, const NGramLM* lm_for_task) {
  const std::size_t k = slots_.size() + (slots_.count(finished_task.task_id) ? 0 : 1);
  const auto budgets = slot_budgets(k);

  // older slots keep the prefix of their stored (selection-ordered) items
  std::size_t idx = 0;
  for (auto& [task, items] : slots_) {
    if (task == finished_task.task_id) {
      ++idx;
      continue;
    }
    std::size_t used = 0, keep = 0;
    for (; keep < items.size(); ++keep) {
      if (used + items[keep].frames() > budgets[idx]) break;
      used += items[keep].frames();
    }
    items.resize(keep);
    ++idx;
  }

  std::size_t slot = 0;
  for (const auto& [task, items] : slots_) {
    if (task >= finished_task.task_id) break;
    ++slot;
  }
  slots_[finished_task.task_id] = select_for_memory(
      finished_task, policy_, budgets[slot], lm_for_task, selection_seed(finished_task.task_id));
}

std::uint64_t EpisodicMemory::selection_seed(int task_id) const noexcept {
  return seed_ ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(task_id + 1));
}

std::size_t EpisodicMemory::stored_frames() const noexcept {
  std::size_t n = 0;
  for (const auto& [task, items] : slots_) n += total_frames(items);
  return n;
}

std::size_t EpisodicMemory::stored_utterances() const noexcept {
  std::size_t n = 0;
  for (const auto& [task, items] : slots_) n += items.size();
  return n;
}

std::vector<const Utterance*> EpisodicMemory::pooled() const {
  std::vector<const Utterance*> out;
  for (const auto& [task, items] : slots_)
    for (const auto& u : items) out.push_back(&u);
  return out;
}

GradientVector memory_gradient(const SequenceModel& model, const ParameterVector& theta,
                               const EpisodicMemory& memory) {
  const auto items = memory.pooled();
  if (items.empty()) throw InvalidArgument("memory_gradient: memory is empty");
  return batch_ctc_objective(model, theta, items).gradient;
}

}  // namespace lctc
