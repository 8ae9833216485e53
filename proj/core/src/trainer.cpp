#include "lctc/trainer.hpp"

#include <algorithm>
#include <numeric>

#include "lctc/ctc.hpp"
#include "lctc/errors.hpp"
#include "lctc/metrics.hpp"
#include "lctc/objective.hpp"

namespace lctc {

std::string to_string(Method m) {
  switch (m) {
    case Method::finetune: return "finetune";
    case Method::ewc: return "ewc";
    case Method::online_ewc: return "online_ewc";
    case Method::si: return "si";
    case Method::kd: return "kd";
    case Method::gem: return "gem";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  if (s == "finetune") return Method::finetune;
  if (s == "ewc") return Method::ewc;
  if (s == "online_ewc" || s == "online-ewc") return Method::online_ewc;
  if (s == "si") return Method::si;
  if (s == "kd") return Method::kd;
  if (s == "gem") return Method::gem;
  throw InvalidArgument("unknown method '" + s + "'");
}

std::string to_string(DecodeMode m) { return m == DecodeMode::greedy ? "greedy" : "beam_lm"; }

DecodeMode parse_decode_mode(const std::string& s) {
  if (s == "greedy") return DecodeMode::greedy;
  if (s == "beam_lm" || s == "beam+lm" || s == "beam") return DecodeMode::beam_lm;
  throw InvalidArgument("unknown decode mode '" + s + "'");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw InvalidArgument("train: batch_size must be >= 1");
  if (!(optimizer.lr > 0.0)) throw InvalidArgument("train: lr must be > 0");
  if (decode == DecodeMode::beam_lm && beam_width < 1)
    throw InvalidArgument("train: beam_width must be >= 1");
  if (!(lm_weight >= 0.0)) throw InvalidArgument("train: lm_weight must be >= 0");
  regularizer.validate();
}

MethodState MethodState::create(Method method, const RegularizerConfig& reg,
                                std::size_t num_params, std::size_t memory_capacity_frames,
                                SelectionPolicy policy, std::uint64_t selection_seed) {
  MethodState s;
  s.method = method;
  switch (method) {
    case Method::ewc: s.ewc.emplace(EwcMode::separate); break;
    case Method::online_ewc: s.ewc.emplace(EwcMode::online, reg.ewc_online_decay); break;
    case Method::si: s.si_importance = ImportanceMap(num_params); break;
    case Method::gem: s.memory.emplace(memory_capacity_frames, policy, selection_seed); break;
    case Method::finetune:
    case Method::kd: break;
  }
  return s;
}

LabelSequence Evaluator::decode(const ParameterVector& theta, const Utterance& utt) const {
  const RealArray logits = model->logits(theta, utt.features);
  if (mode == DecodeMode::greedy) return greedy_decode(logits);
  return beam_decode(logits, lm, lm_weight, beam_width);
}

double Evaluator::wer(const ParameterVector& theta, const TaskDataset& eval_set) const {
  WerAccumulator acc;
  for (const auto& u : eval_set.utterances) acc.add(u.labels, decode(theta, u));
  return acc.wer();
}

std::vector<Batch> epoch_batches(const TaskDataset& task, std::size_t epochs, std::size_t batch_size,
                                 Rng& rng) {
  std::vector<Batch> batches;
  std::vector<std::size_t> order(task.size());
  for (std::size_t e = 0; e < epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < order.size(); i += batch_size) {
      Batch b;
      for (std::size_t j = i; j < std::min(order.size(), i + batch_size); ++j)
        b.push_back(&task.utterances[order[j]]);
      batches.push_back(std::move(b));
    }
  }
  return batches;
}

namespace {

struct BatchGradient {
  double loss = 0.0;
  GradientVector gradient;
  std::size_t used = 0;
  std::size_t skipped = 0;
};

BatchGradient batch_gradient(const SequenceModel& model, const ParameterVector& theta,
                             const Batch& batch, const MethodState& state,
                             const TrainConfig& config, const StageContext& ctx) {
  const bool use_kd = state.method == Method::kd && state.anchor.has_value();
  const auto& reg = config.regularizer;
  BatchGradient out;
  out.gradient.assign(theta.total_size(), 0.0);
  for (const Utterance* u : batch) {
    if (ctx.observer) ctx.observer(ctx.stage, *u);
    Tape tape;
    auto params = tape.bind(theta);
    Var logits = model.forward(tape, params, u->features);
    Var loss;
    try {
      loss = ctc_loss(logits, u->labels);
    } catch (const InfeasibleAlignment&) {
      ++out.skipped;
      continue;
    }
    if (use_kd) {
      const RealArray old_logits = model.logits(*state.anchor, u->features);
      loss = ad::add(loss, ad::scale(kd_loss(old_logits, logits, reg.kd_temperature), reg.kd_weight));
    }
    tape.backward(loss);
    const GradientVector g = tape.parameter_gradient();
    for (std::size_t i = 0; i < g.size(); ++i) out.gradient[i] += g[i];
    out.loss += loss.value().item();
    ++out.used;
  }
  if (out.used == 0) {
    if (out.skipped > 0) {
      const Utterance* first = batch.front();
      throw InfeasibleAlignment(model.config().output_frames(first->frames()),
                                ctc_min_frames(first->labels));
    }
    return out;
  }
  const double inv = 1.0 / static_cast<double>(out.used);
  out.loss *= inv;
  for (double& g : out.gradient) g *= inv;
  return out;
}

void record_eval(const ParameterVector& theta, const StageContext& ctx, std::vector<CurvePoint>& curve) {
  if (ctx.evaluator == nullptr) return;
  for (const TaskDataset* eval : ctx.eval_sets) {
    curve.push_back({ctx.global_step, ctx.stage, eval->task_id, ctx.evaluator->wer(theta, *eval)});
  }
}

}  // namespace

StageResult train_on_batches(const SequenceModel& model, ParameterVector& theta,
                             const std::vector<Batch>& batches, MethodState& state,
                             const TrainConfig& config, StageContext& ctx) {
  config.validate();
  StageResult result;
  Optimizer optimizer(config.optimizer, theta.total_size());
  const auto& reg = config.regularizer;
  GradientVector before;
  double loss_sum = 0.0;

  for (std::size_t b = 0; b < batches.size(); ++b) {
    BatchGradient bg = batch_gradient(model, theta, batches[b], state, config, ctx);
    result.skipped_utterances += bg.skipped;
    if (bg.used == 0) continue;
    loss_sum += bg.loss;

    GradientVector total = bg.gradient;
    Penalty penalty;
    switch (state.method) {
      case Method::ewc:
      case Method::online_ewc:
        penalty = state.ewc->penalty(theta, reg.lambda);
        break;
      case Method::si:
        if (state.anchor) penalty = ewc_penalty(theta, *state.anchor, state.si_importance, reg.lambda);
        break;
      default:
        break;
    }
    if (!penalty.gradient.empty()) {
      for (std::size_t i = 0; i < total.size(); ++i) total[i] += penalty.gradient[i];
    }

    if (state.method == Method::gem && state.memory && !state.memory->empty()) {
      if (ctx.observer) {
        for (const Utterance* u : state.memory->pooled()) ctx.observer(ctx.stage, *u);
      }
      const GradientVector g_mem = memory_gradient(model, theta, *state.memory);
      GemProjection proj = gem_project(total, g_mem);
      if (proj.projected) ++result.gem_projections;
      total = std::move(proj.gradient);
    }

    if (state.si) before.assign(theta.flat().begin(), theta.flat().end());
    optimizer.step(theta, total);
    if (state.si) {
      auto after = theta.flat();
      for (std::size_t i = 0; i < before.size(); ++i) before[i] = after[i] - before[i];
      state.si->accumulate_step(bg.gradient, before);
    }

    ++ctx.global_step;
    ++result.steps;
    if (config.eval_every > 0 && (b + 1) % config.eval_every == 0 && b + 1 < batches.size()) {
      record_eval(theta, ctx, result.curve);
    }
  }
  record_eval(theta, ctx, result.curve);
  result.mean_loss = result.steps ? loss_sum / static_cast<double>(result.steps) : 0.0;
  return result;
}

StageResult train_stage(const SequenceModel& model, ParameterVector& theta, const TaskDataset& task,
                        MethodState& state, const TrainConfig& config, StageContext& ctx) {
  if (ctx.batch_rng == nullptr) throw InvalidArgument("train_stage: no batch RNG");
  if (state.method == Method::si) state.si = SIState::start(theta, config.regularizer.si_xi);
  const auto batches = epoch_batches(task, config.epochs, config.batch_size, *ctx.batch_rng);
  return train_on_batches(model, theta, batches, state, config, ctx);
}

void consolidate_stage(const SequenceModel& model, const ParameterVector& theta_star,
                       const TaskDataset& finished_task, MethodState& state,
                       const TrainConfig& config, const NGramLM* lm_for_task,
                       std::uint64_t fisher_seed, const AccessObserver& observer, int stage) {
  const auto& reg = config.regularizer;
  switch (state.method) {
    case Method::ewc:
    case Method::online_ewc: {
      if (observer)
        for (const auto& u : finished_task.utterances) observer(stage, u);
      ImportanceMap fisher =
          fisher_diagonal(model, theta_star, finished_task, reg.fisher_samples, fisher_seed);
      state.ewc->consolidate(fisher, theta_star);
      break;
    }
    case Method::si:
      if (state.si) state.si_importance = si_consolidate(state.si_importance, *state.si, theta_star);
      state.si.reset();
      state.anchor = theta_star;
      break;
    case Method::kd:
      state.anchor = theta_star;
      break;
    case Method::gem:
      state.memory->rebalance(finished_task, lm_for_task);
      break;
    case Method::finetune:
      break;
  }
}

}  // namespace lctc
