#pragma once

#include <span>
#include <vector>

#include "lctc/data.hpp"
#include "lctc/gradcheck.hpp"
#include "lctc/model.hpp"

namespace lctc {

/// CTC loss of one utterance and its gradient wrt θ.
/// Throws InfeasibleAlignment when T' is too short for the labels.
Evaluation utterance_ctc_objective(const SequenceModel& model, const ParameterVector& theta,
                                   const Utterance& utt);

/// Mean CTC loss and gradient over the feasible utterances of a batch.
struct BatchEvaluation {
  double loss = 0.0;
  GradientVector gradient;
  std::size_t used = 0;
  std::size_t skipped = 0;
};

/// Infeasible utterances are skipped and counted; if none is feasible the
/// InfeasibleAlignment of the first one is rethrown.
BatchEvaluation batch_ctc_objective(const SequenceModel& model, const ParameterVector& theta,
                                    std::span<const Utterance* const> batch);

}  // namespace lctc
