#include "lctc/metrics.hpp"

#include <algorithm>
#include <vector>

#include "lctc/errors.hpp"

namespace lctc {

std::size_t edit_distance(std::span<const Label> ref, std::span<const Label> hyp) {
  std::vector<std::size_t> prev(hyp.size() + 1), cur(hyp.size() + 1);
  for (std::size_t j = 0; j <= hyp.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= ref.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= hyp.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[hyp.size()];
}

double word_error_rate(std::span<const Label> ref, std::span<const Label> hyp) {
  if (ref.empty()) throw InvalidArgument("word_error_rate: empty reference");
  return static_cast<double>(edit_distance(ref, hyp)) / static_cast<double>(ref.size());
}

void WerAccumulator::add(std::span<const Label> ref, std::span<const Label> hyp) {
  if (ref.empty()) throw InvalidArgument("word_error_rate: empty reference");
  edits_ += edit_distance(ref, hyp);
  ref_length_ += ref.size();
}

double WerAccumulator::wer() const {
  if (ref_length_ == 0) throw InvalidArgument("WerAccumulator: nothing accumulated");
  return static_cast<double>(edits_) / static_cast<double>(ref_length_);
}

}  // namespace lctc
