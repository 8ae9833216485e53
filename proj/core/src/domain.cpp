#include "lctc/domain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <string>

#include "lctc/errors.hpp"
#include "lctc/rng.hpp"

namespace lctc {


void DomainSpec::validate() const {
  if (vocab_size < 2) throw InvalidArgument("DomainSpec: vocab_size must be >= 2");
  if (input_dim < 1) throw InvalidArgument("DomainSpec: input_dim must be >= 1");
  if (symbol_weights.size() != vocab_size) {
    throw InvalidArgument("DomainSpec: symbol_weights needs " + std::to_string(vocab_size) +
                          " entries, got " + std::to_string(symbol_weights.size()));
  }
  double total = 0.0;
  for (double w : symbol_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("DomainSpec: negative symbol weight");
    total += w;
  }
  if (!(total > 0.0)) throw InvalidArgument("DomainSpec: degenerate symbol distribution (all weights zero)");
  if (std::count_if(symbol_weights.begin(), symbol_weights.end(), [](double w) { return w > 0.0; }) < 2) {
    throw InvalidArgument("DomainSpec: need at least two symbols with positive weight (repeats are excluded)");
  }
  if (!feature_shift.empty() && feature_shift.size() != input_dim) {
    throw InvalidArgument("DomainSpec: feature_shift must have input_dim entries");
  }
  if (!(feature_noise_sigma >= 0.0)) throw InvalidArgument("DomainSpec: noise sigma must be >= 0");
  if (!(mean_label_len >= 1.0)) throw InvalidArgument("DomainSpec: mean_label_len must be >= 1");
  if (!(len_spread >= 0.0)) throw InvalidArgument("DomainSpec: len_spread must be >= 0");
  if (min_duration < 1 || max_duration < min_duration) {
    throw InvalidArgument("DomainSpec: need 1 <= min_duration <= max_duration");
  }
}

RealArray symbol_prototypes(std::size_t vocab_size, std::size_t input_dim, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  RealArray protos = RealArray::matrix(vocab_size + 1, input_dim);
  for (std::size_t s = 1; s <= vocab_size; ++s)
    for (std::size_t j = 0; j < input_dim; ++j) protos(s, j) = normal(rng);
  return protos;
}

namespace {

Label draw(const std::vector<double>& weights, Rng& rng) {
  std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
  return static_cast<Label>(dist(rng) + 1);
}

LabelSequence draw_labels(const DomainSpec& spec, Rng& rng) {
  std::size_t len = static_cast<std::size_t>(std::llround(spec.mean_label_len));
  if (spec.len_spread > 0.0) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const double s = spec.len_spread;
    const double v = spec.mean_label_len * std::exp(s * normal(rng) - 0.5 * s * s);
    len = static_cast<std::size_t>(std::max<long long>(1, std::llround(v)));
  }
  const std::size_t vocab = spec.vocab_size;
  LabelSequence labels;
  labels.reserve(len);
  labels.push_back(draw(spec.symbol_weights, rng));
  std::vector<double> w(vocab);
  while (labels.size() < len) {
    const Label prev = labels.back();
    const Label successor = static_cast<Label>(prev % static_cast<Label>(vocab) + 1);
    for (std::size_t j = 0; j < vocab; ++j) {
      const Label sym = static_cast<Label>(j + 1);
      w[j] = sym == prev ? 0.0 : spec.symbol_weights[j];
      if (sym == successor) w[j] *= std::exp(spec.transition_bias);
    }
    if (std::accumulate(w.begin(), w.end(), 0.0) <= 0.0) break;
    labels.push_back(draw(w, rng));
  }
  return labels;
}

Utterance render(const DomainSpec& spec, const RealArray& protos, LabelSequence labels,
                 std::string id, Rng& rng) {
  std::uniform_int_distribution<std::size_t> duration(spec.min_duration, spec.max_duration);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<std::size_t> durations;
  std::size_t frames = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    durations.push_back(duration(rng));
    frames += durations.back();
  }
  RealArray feats = RealArray::matrix(frames, spec.input_dim);
  std::size_t t = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t d = 0; d < durations[i]; ++d, ++t) {
      for (std::size_t j = 0; j < spec.input_dim; ++j) {
        double v = protos(static_cast<std::size_t>(labels[i]), j);
        if (!spec.feature_shift.empty()) v += spec.feature_shift[j];
        if (spec.feature_noise_sigma > 0.0) v += spec.feature_noise_sigma * noise(rng);
        feats(t, j) = v;
      }
    }
  }
  return Utterance{std::move(id), std::move(feats), std::move(labels), spec.task_id};
}

TaskDataset make_split(const DomainSpec& spec, const RealArray& protos, std::size_t count,
                       const char* split, Rng& rng) {
  TaskDataset ds;
  ds.task_id = spec.task_id;
  ds.vocab_size = spec.vocab_size;
  ds.input_dim = spec.input_dim;
  ds.utterances.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    char id[64];
    std::snprintf(id, sizeof(id), "t%d-%s-%05zu", spec.task_id, split, i);
    ds.utterances.push_back(render(spec, protos, draw_labels(spec, rng), id, rng));
  }
  return ds;
}

}  // namespace

DomainData generate_domain(const DomainSpec& spec) {
  spec.validate();
  const RealArray protos = symbol_prototypes(spec.vocab_size, spec.input_dim, spec.prototype_seed);
  Rng train_rng(substream_seed(spec.seed, "train"));
  Rng eval_rng(substream_seed(spec.seed, "eval"));
  DomainData out;
  out.train = make_split(spec, protos, spec.num_train, "train", train_rng);
  out.eval = make_split(spec, protos, spec.num_eval, "eval", eval_rng);
  return out;
}

void check_domains_distinct(const std::vector<DomainSpec>& domains) {
  for (std::size_t a = 0; a < domains.size(); ++a)
    for (std::size_t b = a + 1; b < domains.size(); ++b) {
      const auto& x = domains[a];
      const auto& y = domains[b];
      if (x.symbol_weights == y.symbol_weights && x.feature_shift == y.feature_shift &&
          x.feature_noise_sigma == y.feature_noise_sigma && x.mean_label_len == y.mean_label_len) {
        throw InvalidArgument("domains " + std::to_string(x.task_id) + " and " +
                              std::to_string(y.task_id) +
                              " share symbol weights, shift, noise and length profile");
      }
    }
}

std::vector<DomainSpec> default_domains(std::uint64_t seed) {
  constexpr std::size_t kVocab = 8;
  constexpr std::size_t kDim = 8;
  const std::uint64_t proto_seed = substream_seed(seed, "prototypes");
  const RealArray protos = symbol_prototypes(kVocab, kDim, proto_seed);

  // The channel of a later domain moves every frame by the offset between two
  // prototypes, so symbol `from` there sounds like symbol `to` did in task 1.
  // A shift that merely relocates the data is learned alongside the old one
  // and causes no forgetting.
  auto aliasing_shift = [&](std::size_t from, std::size_t to) {
    std::vector<double> v(kDim);
    for (std::size_t j = 0; j < kDim; ++j) v[j] = protos(to, j) - protos(from, j);
    return v;
  };

  DomainSpec read;
  read.task_id = 1;
  read.symbol_weights = {4, 4, 3, 3, 1, 1, 1, 1};
  read.transition_bias = 1.0;
  read.feature_noise_sigma = 0.1;
  read.feature_shift = std::vector<double>(kDim, 0.0);
  read.mean_label_len = 8.0;
  read.len_spread = 0.7;
  read.num_train = 200;

  DomainSpec mixed;
  mixed.task_id = 2;
  mixed.symbol_weights = {1, 2, 3, 4, 4, 3, 2, 1};
  mixed.transition_bias = 0.5;
  mixed.feature_noise_sigma = 0.2;
  mixed.feature_shift = aliasing_shift(1, 5);
  mixed.mean_label_len = 6.0;
  mixed.len_spread = 0.8;
  mixed.num_train = 400;

  DomainSpec conversational;
  conversational.task_id = 3;
  conversational.symbol_weights = {1, 1, 1, 1, 3, 3, 4, 4};
  conversational.transition_bias = 0.0;
  conversational.feature_noise_sigma = 0.4;
  conversational.feature_shift = aliasing_shift(2, 7);
  conversational.mean_label_len = 4.0;
  conversational.len_spread = 0.9;
  conversational.num_train = 600;

  std::vector<DomainSpec> out{read, mixed, conversational};
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].vocab_size = kVocab;
    out[i].input_dim = kDim;
    out[i].num_eval = 60;
    out[i].prototype_seed = proto_seed;
    out[i].seed = substream_seed(seed, "data", i);
  }
  return out;
}

}  // namespace lctc
