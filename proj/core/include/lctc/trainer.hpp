#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lctc/data.hpp"
#include "lctc/lifelong.hpp"
#include "lctc/memory.hpp"
#include "lctc/model.hpp"
#include "lctc/ngram.hpp"
#include "lctc/optimizer.hpp"
#include "lctc/rng.hpp"

namespace lctc {

enum class Method { finetune, ewc, online_ewc, si, kd, gem };
enum class DecodeMode { greedy, beam_lm };

std::string to_string(Method m);
Method parse_method(const std::string& s);
std::string to_string(DecodeMode m);
DecodeMode parse_decode_mode(const std::string& s);

struct TrainConfig {
  OptimizerConfig optimizer;
  std::size_t epochs = 4;
  std::size_t batch_size = 8;
  /// Evaluate seen tasks every this many batches (0: only at stage ends).
  std::size_t eval_every = 25;
  RegularizerConfig regularizer;
  DecodeMode decode = DecodeMode::greedy;
  std::size_t beam_width = 8;
  double lm_weight = 0.5;

  void validate() const;
};

/// One learning-curve sample.
struct CurvePoint {
  std::size_t step = 0;
  int stage = 0;
  int task_id = 0;
  double wer = 0.0;

  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

/// Whatever a method carries from one stage to the next.
struct MethodState {
  Method method = Method::finetune;
  std::optional<EwcState> ewc;
  ImportanceMap si_importance;
  std::optional<SIState> si;
  /// θ of the previous stage's end; anchor for SI and KD.
  std::optional<ParameterSnapshot> anchor;
  std::optional<EpisodicMemory> memory;

  static MethodState create(Method method, const RegularizerConfig& reg, std::size_t num_params,
                            std::size_t memory_capacity_frames, SelectionPolicy policy,
                            std::uint64_t selection_seed);
};

/// Decodes eval sets and scores corpus-level WER.
struct Evaluator {
  const SequenceModel* model = nullptr;
  DecodeMode mode = DecodeMode::greedy;
  const NGramLM* lm = nullptr;
  std::size_t beam_width = 8;
  double lm_weight = 0.0;

  LabelSequence decode(const ParameterVector& theta, const Utterance& utt) const;
  double wer(const ParameterVector& theta, const TaskDataset& eval_set) const;
};

/// Called with (stage, utterance) whenever the trainer reads an utterance
/// to compute a training gradient.
using AccessObserver = std::function<void(int, const Utterance&)>;

struct StageContext {
  int stage = 1;
  std::size_t global_step = 0;
  /// Eval sets of every task seen so far, current one included.
  std::vector<const TaskDataset*> eval_sets;
  const Evaluator* evaluator = nullptr;
  Rng* batch_rng = nullptr;
  AccessObserver observer;
};

struct StageResult {
  std::vector<CurvePoint> curve;
  std::size_t steps = 0;
  std::size_t skipped_utterances = 0;
  std::size_t gem_projections = 0;
  double mean_loss = 0.0;
};

using Batch = std::vector<const Utterance*>;

/// Epoch-shuffled mini-batches over one dataset.
std::vector<Batch> epoch_batches(const TaskDataset& task, std::size_t epochs, std::size_t batch_size,
                                 Rng& rng);

/// Per mini-batch: CTC loss plus the method's penalty (EWC, SI, KD); for
/// GEM the gradient is projected against the memory gradient. Then one
/// optimizer step. Seen tasks are evaluated every eval_every batches and
/// once at the end.
StageResult train_on_batches(const SequenceModel& model, ParameterVector& theta,
                             const std::vector<Batch>& batches, MethodState& state,
                             const TrainConfig& config, StageContext& ctx);

/// train_on_batches over epoch_batches(task).
StageResult train_stage(const SequenceModel& model, ParameterVector& theta, const TaskDataset& task,
                        MethodState& state, const TrainConfig& config, StageContext& ctx);

/// End-of-stage bookkeeping: Fisher/EWC anchors, SI importance, KD anchor,
/// memory rebalance. `lm_for_task` is needed by min-perplexity selection.
void consolidate_stage(const SequenceModel& model, const ParameterVector& theta_star,
                       const TaskDataset& finished_task, MethodState& state,
                       const TrainConfig& config, const NGramLM* lm_for_task,
                       std::uint64_t fisher_seed, const AccessObserver& observer, int stage);

}  // namespace lctc
