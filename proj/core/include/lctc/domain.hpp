#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "lctc/array.hpp"
#include "lctc/data.hpp"

namespace lctc {

/// Synthetic stand-in for one recognition domain.
///
/// Labels come from a first-order process: the first symbol is drawn from
/// symbol_weights, each next symbol j from
///   symbol_weights[j] * exp(transition_bias * [j == successor(prev)])
/// with immediate repeats excluded. Label lengths are log-normal with mean
/// mean_label_len and log-spread len_spread (len_spread = 0 gives a fixed
/// length). Each symbol is rendered as its prototype vector held for a
/// uniform random number of frames in [min_duration, max_duration], plus
/// feature_shift and N(0, feature_noise_sigma²) noise.
struct DomainSpec {
  int task_id = 1;
  std::size_t vocab_size = 8;
  std::size_t input_dim = 8;
  std::vector<double> symbol_weights;
  double transition_bias = 0.0;
  double feature_noise_sigma = 0.1;
  std::vector<double> feature_shift;
  double mean_label_len = 6.0;
  double len_spread = 0.0;
  std::size_t min_duration = 2;
  std::size_t max_duration = 4;
  std::size_t num_train = 100;
  std::size_t num_eval = 50;
  std::uint64_t seed = 1;
  /// Shared by every domain of an experiment so symbols mean the same thing.
  std::uint64_t prototype_seed = 7;

  void validate() const;
  friend bool operator==(const DomainSpec&, const DomainSpec&) = default;
};

struct DomainData {
  TaskDataset train;
  TaskDataset eval;
};

/// (vocab_size + 1, input_dim) prototype table; row 0 (blank) is unused.
RealArray symbol_prototypes(std::size_t vocab_size, std::size_t input_dim, std::uint64_t seed);

/// Deterministic in spec.seed.
DomainData generate_domain(const DomainSpec& spec);

/// Throws unless every pair of domains differs in at least one of symbol
/// weights, feature shift, noise level or mean label length.
void check_domains_distinct(const std::vector<DomainSpec>& domains);

/// The three-domain desk benchmark: sizes 200/400/600, noise 0.1/0.2/0.4,
/// long "read" utterances first, short "conversational" ones last.
std::vector<DomainSpec> default_domains(std::uint64_t seed);

}  // namespace lctc
