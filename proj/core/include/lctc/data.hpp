#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "lctc/array.hpp"

namespace lctc {

using Label = int;
using LabelSequence = std::vector<Label>;

/// CTC blank; real symbols are 1..vocab_size.
inline constexpr Label kBlank = 0;

/// One transcribed sequence: a (T, input_dim) feature matrix and its labels.
struct Utterance {
  std::string id;
  RealArray features;
  LabelSequence labels;
  int source_task = 0;

  std::size_t frames() const noexcept { return features.rows(); }

  /// Throws InvalidArgument unless T >= 1, width == input_dim, labels are
  /// nonempty and lie in [1, vocab_size].
  void validate(std::size_t input_dim, std::size_t vocab_size) const;
};

/// A domain D_k (or one split of it).
struct TaskDataset {
  int task_id = 0;
  std::size_t vocab_size = 0;
  std::size_t input_dim = 0;
  std::vector<Utterance> utterances;

  bool empty() const noexcept { return utterances.empty(); }
  std::size_t size() const noexcept { return utterances.size(); }
  std::size_t total_frames() const noexcept;
};

std::size_t total_frames(const std::vector<Utterance>& utterances) noexcept;

}  // namespace lctc
