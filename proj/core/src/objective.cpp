#include "lctc/objective.hpp"

#include <exception>

#include "lctc/ctc.hpp"
#include "lctc/errors.hpp"

namespace lctc {

Evaluation utterance_ctc_objective(const SequenceModel& model, const ParameterVector& theta,
                                   const Utterance& utt) {
  Tape tape;
  auto params = tape.bind(theta);
  Var logits = model.forward(tape, params, utt.features);
  Var loss = ctc_loss(logits, utt.labels);
  tape.backward(loss);
  return {loss.value().item(), tape.parameter_gradient()};
}

BatchEvaluation batch_ctc_objective(const SequenceModel& model, const ParameterVector& theta,
                                    std::span<const Utterance* const> batch) {
  BatchEvaluation out;
  out.gradient.assign(theta.total_size(), 0.0);
  std::exception_ptr first_failure;
  for (const Utterance* u : batch) {
    try {
      Evaluation e = utterance_ctc_objective(model, theta, *u);
      out.loss += e.value;
      for (std::size_t i = 0; i < e.gradient.size(); ++i) out.gradient[i] += e.gradient[i];
      ++out.used;
    } catch (const InfeasibleAlignment&) {
      if (!first_failure) first_failure = std::current_exception();
      ++out.skipped;
    }
  }
  if (out.used == 0) {
    if (first_failure) std::rethrow_exception(first_failure);
    throw InvalidArgument("batch_ctc_objective: empty batch");
  }
  const double inv = 1.0 / static_cast<double>(out.used);
  out.loss *= inv;
  for (double& g : out.gradient) g *= inv;
  return out;
}

}  // namespace lctc
