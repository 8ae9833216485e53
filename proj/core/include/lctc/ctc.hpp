#pragma once

#include <cstddef>
#include <span>

#include "lctc/array.hpp"
#include "lctc/autodiff.hpp"
#include "lctc/data.hpp"

namespace lctc {

class NGramLM;

/// Forward/backward variables over the blank-extended label sequence, in
/// log space. alpha[t, s] includes the emission at t, beta[t, s] covers
/// frames t+1.. only, so logsumexp_s(alpha[t, s] + beta[t, s]) equals
/// log_likelihood for every t.
struct LogProbLattice {
  RealArray alpha;
  RealArray beta;
  LabelSequence extended;
  double log_likelihood = 0.0;
};

/// Frames needed to emit `labels`: one per label plus a blank between
/// each pair of equal neighbours.
std::size_t ctc_min_frames(std::span<const Label> labels);

/// Lattice for per-frame log-probabilities (rows sum to 1 in prob space).
/// Throws InfeasibleAlignment if there are too few frames.
LogProbLattice ctc_lattice(const RealArray& log_probs, std::span<const Label> labels);

struct CtcResult {
  double loss = 0.0;  // -log P(labels | logits)
  RealArray grad_logits;
};

/// CTC negative log-likelihood (blank = 0) of unnormalised logits (T', V+1)
/// and its gradient wrt the logits.
CtcResult ctc_loss(const RealArray& logits, std::span<const Label> labels);

/// log P(labels | logits); -inf when the alignment is infeasible.
double ctc_log_likelihood(const RealArray& logits, std::span<const Label> labels);

/// Tape node for ctc_loss.
Var ctc_loss(Var logits, std::span<const Label> labels);

/// Per-frame argmax, collapse repeats, drop blanks.
LabelSequence greedy_decode(const RealArray& logits);

struct BeamHypothesis {
  LabelSequence labels;
  double score = 0.0;        // ctc_logprob + lm_weight * lm_logprob
  double ctc_logprob = 0.0;  // prefix probability as tracked by the search
  double lm_logprob = 0.0;   // including the end marker
};

/// CTC prefix beam search with optional n-gram shallow fusion. Pruning
/// happens between frames only; after the final frame every surviving
/// prefix is scored with the LM end marker and the best is returned. Ties
/// go to the lexicographically smaller prefix.
BeamHypothesis beam_search(const RealArray& logits, const NGramLM* lm, double lm_weight,
                           std::size_t beam_width);

LabelSequence beam_decode(const RealArray& logits, const NGramLM* lm, double lm_weight,
                          std::size_t beam_width);

}  // namespace lctc
