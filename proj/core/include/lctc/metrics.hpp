#pragma once

#include <cstddef>
#include <span>

#include "lctc/data.hpp"

namespace lctc {

/// Levenshtein distance with unit costs.
std::size_t edit_distance(std::span<const Label> ref, std::span<const Label> hyp);

/// edit_distance(ref, hyp) / |ref|. Throws on an empty reference.
double word_error_rate(std::span<const Label> ref, std::span<const Label> hyp);

/// Accumulates edits and reference length over a corpus.
class WerAccumulator {
 public:
  void add(std::span<const Label> ref, std::span<const Label> hyp);
  double wer() const;
  std::size_t edits() const noexcept { return edits_; }
  std::size_t ref_length() const noexcept { return ref_length_; }

 private:
  std::size_t edits_ = 0;
  std::size_t ref_length_ = 0;
};

}  // namespace lctc
