#include "lctc/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lctc/errors.hpp"
#include "lctc/rng.hpp"

namespace lctc {

void RunConfig::validate() const {
  if (schema_version != kConfigSchemaVersion) {
    throw InvalidArgument("config: unsupported schema_version " + std::to_string(schema_version));
  }
  if (policy && method != Method::gem) {
    throw InvalidArgument("config: a selection policy only applies to method 'gem'");
  }
  if (!(memory_fraction >= 0.0)) throw InvalidArgument("config: memory_fraction must be >= 0");
  if (lm_order < 1) throw InvalidArgument("config: lm_order must be >= 1");
  if (!(lm_add_k > 0.0)) throw InvalidArgument("config: lm_add_k must be > 0");
  model.validate();
  train.validate();
  const auto doms = resolved_domains();
  for (const auto& d : doms) {
    d.validate();
    if (d.vocab_size != model.vocab_size || d.input_dim != model.input_dim) {
      throw InvalidArgument("config: domain " + std::to_string(d.task_id) +
                            " does not match the model's vocab_size/input_dim");
    }
  }
  check_domains_distinct(doms);
}

std::vector<DomainSpec> RunConfig::resolved_domains() const {
  return domains.empty() ? default_domains(seed) : domains;
}

double RunReport::final_wer(int task_id) const {
  for (std::size_t i = 0; i < task_ids.size(); ++i)
    if (task_ids[i] == task_id) return final_matrix.back().at(i);
  throw InvalidArgument("RunReport: unknown task " + std::to_string(task_id));
}

double RunReport::wer_after_stage(int stage, int task_id) const {
  for (std::size_t i = 0; i < task_ids.size(); ++i)
    if (task_ids[i] == task_id) return final_matrix.at(static_cast<std::size_t>(stage - 1)).at(i);
  throw InvalidArgument("RunReport: unknown task " + std::to_string(task_id));
}

std::size_t memory_capacity_frames(double memory_fraction, const std::vector<DomainData>& data) {
  if (data.empty()) return 0;
  double frames = 0.0;
  for (const auto& d : data) frames += static_cast<double>(d.train.total_frames());
  return static_cast<std::size_t>(std::llround(memory_fraction * frames / static_cast<double>(data.size())));
}

namespace {

struct Prepared {
  std::vector<DomainData> data;
  SequenceModel model;
  std::optional<NGramLM> decode_lm;
  Evaluator evaluator;
};

Prepared prepare(const RunConfig& config) {
  config.validate();
  Prepared p{{}, SequenceModel(config.model), std::nullopt, {}};
  for (const auto& spec : config.resolved_domains()) p.data.push_back(generate_domain(spec));
  if (config.train.decode == DecodeMode::beam_lm) {
    // the decoding LM sees the text of every domain; only the acoustic model is trained sequentially
    std::vector<LabelSequence> corpus;
    for (const auto& d : p.data)
      for (const auto& u : d.train.utterances) corpus.push_back(u.labels);
    p.decode_lm = NGramLM::train(corpus, config.model.vocab_size, config.lm_order, config.lm_add_k);
  }
  return p;
}

ParameterVector initial_parameters(const RunConfig& config) {
  ModelConfig mc = config.model;
  mc.seed = substream_seed(config.seed, "init");
  return model_init(mc);
}

RunReport make_report(const RunConfig& config, const std::vector<DomainData>& data) {
  RunReport r;
  r.method = to_string(config.method);
  r.policy = config.method == Method::gem ? to_string(config.effective_policy()) : "none";
  r.budget = config.method == Method::gem ? config.memory_fraction : 0.0;
  r.seed = config.seed;
  r.relative_reduction_vs_baseline = std::numeric_limits<double>::quiet_NaN();
  for (const auto& d : data) r.task_ids.push_back(d.train.task_id);
  return r;
}

std::vector<double> evaluate_all(const Evaluator& ev, const ParameterVector& theta,
                                 const std::vector<DomainData>& data) {
  std::vector<double> row;
  for (const auto& d : data) row.push_back(ev.wer(theta, d.eval));
  return row;
}

void finish(RunReport& r) {
  const auto& last = r.final_matrix.back();
  double s = 0.0;
  for (double v : last) s += v;
  r.averaged_wer = s / static_cast<double>(last.size());
}

}  // namespace

RunReport run_sequential(const RunConfig& config, const RunHooks& hooks) {
  if (config.resolved_domains().size() < 2) {
    throw InvalidArgument("run_sequential: at least two domains are required");
  }
  Prepared p = prepare(config);
  const Evaluator ev{&p.model, config.train.decode, p.decode_lm ? &*p.decode_lm : nullptr,
                     config.train.beam_width, config.train.lm_weight};

  RunReport report = make_report(config, p.data);
  ParameterVector theta = initial_parameters(config);
  report.capacity_frames =
      config.method == Method::gem ? memory_capacity_frames(config.memory_fraction, p.data) : 0;
  MethodState state =
      MethodState::create(config.method, config.train.regularizer, theta.total_size(),
                          report.capacity_frames, config.effective_policy(),
                          substream_seed(config.seed, "selection"));
  Rng batch_rng(substream_seed(config.seed, "batch"));

  StageContext ctx;
  ctx.evaluator = &ev;
  ctx.batch_rng = &batch_rng;
  ctx.observer = hooks.observer;

  for (std::size_t k = 0; k < p.data.size(); ++k) {
    const TaskDataset& task = p.data[k].train;
    ctx.stage = static_cast<int>(k + 1);
    ctx.eval_sets.push_back(&p.data[k].eval);

    StageResult sr = train_stage(p.model, theta, task, state, config.train, ctx);
    report.curve.insert(report.curve.end(), sr.curve.begin(), sr.curve.end());
    report.skipped_utterances += sr.skipped_utterances;
    report.gem_projections += sr.gem_projections;
    report.stage_end_steps.push_back(ctx.global_step);

    std::optional<NGramLM> task_lm;
    if (config.method == Method::gem && config.effective_policy() == SelectionPolicy::min_perplexity) {
      std::vector<LabelSequence> corpus;
      for (const auto& u : task.utterances) corpus.push_back(u.labels);
      task_lm = NGramLM::train(corpus, config.model.vocab_size, config.lm_order, config.lm_add_k);
    }
    consolidate_stage(p.model, theta, task, state, config.train, task_lm ? &*task_lm : nullptr,
                      substream_seed(config.seed, "fisher", k), ctx.observer, ctx.stage);
    report.final_matrix.push_back(evaluate_all(ev, theta, p.data));
  }
  finish(report);
  report.final_parameters = std::move(theta);
  return report;
}

TaskBalancedSampler::TaskBalancedSampler(std::vector<const TaskDataset*> tasks)
    : tasks_(std::move(tasks)) {
  if (tasks_.empty()) throw InvalidArgument("TaskBalancedSampler: no tasks");
  for (const auto* t : tasks_)
    if (t->empty()) throw InvalidArgument("TaskBalancedSampler: empty task");
}

std::size_t TaskBalancedSampler::draw_task(Rng& rng) const {
  std::uniform_int_distribution<std::size_t> pick(0, tasks_.size() - 1);
  return pick(rng);
}

const Utterance* TaskBalancedSampler::draw(Rng& rng) const {
  const TaskDataset* t = tasks_[draw_task(rng)];
  std::uniform_int_distribution<std::size_t> pick(0, t->size() - 1);
  return &t->utterances[pick(rng)];
}

RunReport run_multitask(const RunConfig& config) {
  if (config.resolved_domains().size() < 2) {
    throw InvalidArgument("run_multitask: at least two domains are required");
  }
  RunConfig mt = config;
  mt.method = Method::finetune;
  mt.policy.reset();
  Prepared p = prepare(mt);
  const Evaluator ev{&p.model, config.train.decode, p.decode_lm ? &*p.decode_lm : nullptr,
                     config.train.beam_width, config.train.lm_weight};

  RunReport report = make_report(mt, p.data);
  report.method = "multitask";
  ParameterVector theta = initial_parameters(config);
  MethodState state = MethodState::create(Method::finetune, config.train.regularizer,
                                          theta.total_size(), 0, SelectionPolicy::random, 0);
  Rng batch_rng(substream_seed(config.seed, "batch"));

  std::vector<const TaskDataset*> tasks;
  std::size_t total_batches = 0;
  for (const auto& d : p.data) {
    tasks.push_back(&d.train);
    const std::size_t per_epoch = (d.train.size() + config.train.batch_size - 1) / config.train.batch_size;
    total_batches += per_epoch * config.train.epochs;
  }
  TaskBalancedSampler sampler(tasks);
  std::vector<Batch> batches(total_batches);
  for (auto& b : batches)
    for (std::size_t i = 0; i < config.train.batch_size; ++i) b.push_back(sampler.draw(batch_rng));

  StageContext ctx;
  ctx.stage = 1;
  ctx.evaluator = &ev;
  ctx.batch_rng = &batch_rng;
  for (const auto& d : p.data) ctx.eval_sets.push_back(&d.eval);

  StageResult sr = train_on_batches(p.model, theta, batches, state, config.train, ctx);
  report.curve = std::move(sr.curve);
  report.skipped_utterances = sr.skipped_utterances;
  report.stage_end_steps.push_back(ctx.global_step);
  report.final_matrix.push_back(evaluate_all(ev, theta, p.data));
  finish(report);
  report.final_parameters = std::move(theta);
  return report;
}

std::vector<SweepPoint> run_memory_sweep(const RunConfig& config, std::span<const double> budgets) {
  if (config.method != Method::gem) throw InvalidArgument("run_memory_sweep: method must be gem");
  std::vector<SweepPoint> points;
  for (SelectionPolicy policy : {SelectionPolicy::random, SelectionPolicy::median_length}) {
    for (double budget : budgets) {
      RunConfig c = config;
      c.policy = policy;
      c.memory_fraction = budget;
      points.push_back({policy, budget, run_sequential(c)});
    }
  }
  return points;
}

double relative_wer_reduction(const RunReport& baseline, const RunReport& candidate) {
  if (baseline.task_ids != candidate.task_ids) {
    throw InvalidArgument("relative_wer_reduction: reports cover different domain sequences");
  }
  if (baseline.averaged_wer == 0.0) {
    throw InvalidArgument("relative_wer_reduction: baseline averaged WER is zero");
  }
  return (baseline.averaged_wer - candidate.averaged_wer) / baseline.averaged_wer;
}

double curve_oscillation(const RunReport& report, int stage, int task_id) {
  std::vector<double> values;
  for (const auto& pt : report.curve)
    if (pt.stage == stage && pt.task_id == task_id) values.push_back(pt.wer);
  if (values.size() < 2) return 0.0;
  const std::vector<double> tail(values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2), values.end());
  double mean = 0.0;
  for (double v : tail) mean += v;
  mean /= static_cast<double>(tail.size());
  double var = 0.0;
  for (double v : tail) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(tail.size()));
}

}  // namespace lctc
