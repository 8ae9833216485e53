#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include "lctc/data.hpp"

namespace lctc {

/// Count-based n-gram LM over label symbols 1..vocab_size with add-k
/// smoothing:
///
///   P(w | ctx) = (count(ctx, w) + k) / (count(ctx) + k * (vocab_size + 1))
///
/// where w ranges over the symbols plus the end marker and ctx is the
/// previous order-1 symbols, padded with begin markers.
class NGramLM {
 public:
  using Context = std::vector<Label>;

  /// Begin-of-sequence marker used only inside contexts.
  static constexpr Label kBegin = 0;

  static NGramLM train(const std::vector<LabelSequence>& corpus, std::size_t vocab_size,
                       std::size_t order, double add_k);

  std::size_t order() const noexcept { return order_; }
  std::size_t vocab_size() const noexcept { return vocab_size_; }
  double add_k() const noexcept { return add_k_; }
  Label end_symbol() const noexcept { return static_cast<Label>(vocab_size_ + 1); }

  /// log P(next | last order-1 symbols of history). `next` may be end_symbol().
  double conditional_logprob(std::span<const Label> history, Label next) const;

  /// Sum of conditional log-probs over the sequence and the end marker.
  double logprob(std::span<const Label> sequence) const;

  /// exp(-logprob / (len + 1)).
  double perplexity(std::span<const Label> sequence) const;

  std::uint64_t count(const Context& ctx, Label w) const;
  std::uint64_t context_count(const Context& ctx) const;

  /// Plain-text count table, one line per (context, symbol, count) in
  /// sorted order, so identical models serialise to identical bytes.
  void save(std::ostream& out) const;
  static NGramLM load(std::istream& in);

  friend bool operator==(const NGramLM&, const NGramLM&) = default;

 private:
  NGramLM(std::size_t vocab_size, std::size_t order, double add_k);
  void check_symbol(Label w, bool allow_end) const;
  Context context_of(std::span<const Label> history) const;

  std::size_t vocab_size_ = 0;
  std::size_t order_ = 1;
  double add_k_ = 0.1;
  std::map<Context, std::map<Label, std::uint64_t>> counts_;
  std::map<Context, std::uint64_t> totals_;
};

}  // namespace lctc
