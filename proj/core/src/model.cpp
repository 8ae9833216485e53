#include "lctc/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "lctc/data.hpp"
#include "lctc/errors.hpp"

namespace lctc {

void Utterance::validate(std::size_t input_dim, std::size_t vocab_size) const {
  if (features.rank() != 2 || features.rows() < 1) {
    throw InvalidArgument("utterance '" + id + "': features must be (T, input_dim) with T >= 1");
  }
  if (features.cols() != input_dim) {
    throw InvalidArgument("utterance '" + id + "': feature width " +
                          std::to_string(features.cols()) + " != input_dim " +
                          std::to_string(input_dim));
  }
  if (labels.empty()) throw InvalidArgument("utterance '" + id + "': empty label sequence");
  for (Label l : labels) {
    if (l < 1 || static_cast<std::size_t>(l) > vocab_size) {
      throw InvalidArgument("utterance '" + id + "': label " + std::to_string(l) +
                            " outside [1, " + std::to_string(vocab_size) + "]");
    }
  }
}

std::size_t total_frames(const std::vector<Utterance>& utterances) noexcept {
  std::size_t n = 0;
  for (const auto& u : utterances) n += u.frames();
  return n;
}

std::size_t TaskDataset::total_frames() const noexcept { return lctc::total_frames(utterances); }

void ModelConfig::validate() const {
  if (input_dim < 1 || hidden_dim < 1 || num_layers < 1 || downsample_stride < 1 ||
      vocab_size < 1) {
    throw InvalidArgument(
        "ModelConfig: input_dim, hidden_dim, num_layers, downsample_stride and vocab_size must "
        "all be >= 1");
  }
}

namespace {

std::vector<std::string> segment_names(const ModelConfig& c) {
  std::vector<std::string> names{"proj.weight", "proj.bias"};
  const char* dirs[] = {"fw", "bw"};
  const std::size_t ndir = c.bidirectional ? 2 : 1;
  for (std::size_t l = 0; l < c.num_layers; ++l)
    for (std::size_t d = 0; d < ndir; ++d) {
      const std::string p = "lstm" + std::to_string(l) + "." + dirs[d] + ".";
      names.push_back(p + "w_in");
      names.push_back(p + "w_rec");
      names.push_back(p + "bias");
    }
  names.push_back("out.weight");
  names.push_back("out.bias");
  return names;
}

RealArray uniform_weight(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  std::uniform_real_distribution<double> dist(-bound, bound);
  RealArray w = RealArray::matrix(rows, cols);
  for (double& v : w.data()) v = dist(rng);
  return w;
}

}  // namespace

ParameterVector model_init(const ModelConfig& c) {
  c.validate();
  std::mt19937_64 rng(c.seed);
  const std::size_t h = c.hidden_dim;
  const std::size_t ndir = c.bidirectional ? 2 : 1;
  const auto names = segment_names(c);
  ParameterVector theta;
  std::size_t k = 0;
  theta.add(names[k++], uniform_weight(c.input_dim, h, rng));
  theta.add(names[k++], RealArray::matrix(1, h));
  for (std::size_t l = 0; l < c.num_layers; ++l) {
    const std::size_t in = l == 0 ? h : h * ndir;
    for (std::size_t d = 0; d < ndir; ++d) {
      theta.add(names[k++], uniform_weight(in, 4 * h, rng));
      theta.add(names[k++], uniform_weight(h, 4 * h, rng));
      RealArray bias = RealArray::matrix(1, 4 * h);
      // gate layout [input | forget | output | cell]
      for (std::size_t j = h; j < 2 * h; ++j) bias[j] = 1.0;
      theta.add(names[k++], bias);
    }
  }
  theta.add(names[k++], uniform_weight(h * ndir, c.output_dim(), rng));
  theta.add(names[k++], RealArray::matrix(1, c.output_dim()));
  return theta;
}

SequenceModel::SequenceModel(const ModelConfig& config) : config_(config) {
  config_.validate();
  names_ = segment_names(config_);
  std::size_t k = 0;
  proj_weight_ = k++;
  proj_bias_ = k++;
  const std::size_t ndir = config_.bidirectional ? 2 : 1;
  for (std::size_t l = 0; l < config_.num_layers; ++l) {
    std::vector<Direction> dirs;
    for (std::size_t d = 0; d < ndir; ++d) {
      dirs.push_back({k, k + 1, k + 2});
      k += 3;
    }
    layers_.push_back(std::move(dirs));
  }
  out_weight_ = k++;
  out_bias_ = k++;
}

std::size_t SequenceModel::segment_index(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return i;
  throw InvalidArgument("SequenceModel: no parameter named '" + name + "'");
}

Var SequenceModel::run_direction(Tape& tape, std::span<const Var> params, const Direction& dir,
                                 Var input, bool reverse) const {
  const std::size_t h = config_.hidden_dim;
  const std::size_t steps = input.value().rows();
  Var projected = ad::add_row(ad::matmul(input, params[dir.w_in]), params[dir.bias]);
  Var hidden = tape.constant(RealArray::matrix(1, h));
  Var cell = tape.constant(RealArray::matrix(1, h));
  std::vector<Var> outputs(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t t = reverse ? steps - 1 - s : s;
    Var gates = ad::add(ad::slice(projected, 0, t, t + 1), ad::matmul(hidden, params[dir.w_rec]));
    Var sig = ad::sigmoid(ad::slice(gates, 1, 0, 3 * h));
    Var cand = ad::tanh(ad::slice(gates, 1, 3 * h, 4 * h));
    Var in_gate = ad::slice(sig, 1, 0, h);
    Var forget = ad::slice(sig, 1, h, 2 * h);
    Var out_gate = ad::slice(sig, 1, 2 * h, 3 * h);
    cell = ad::add(ad::mul(forget, cell), ad::mul(in_gate, cand));
    hidden = ad::mul(out_gate, ad::tanh(cell));
    outputs[t] = hidden;
  }
  return ad::concat(outputs, 0);
}

Var SequenceModel::forward(Tape& tape, std::span<const Var> params,
                           const RealArray& features) const {
  if (params.size() != names_.size()) {
    throw InvalidArgument("model_forward: expected " + std::to_string(names_.size()) +
                          " parameter segments, got " + std::to_string(params.size()));
  }
  if (features.rank() != 2 || features.rows() < 1) {
    throw ShapeError("model_forward: features must be (T, input_dim), got " +
                     shape_string(features.shape()));
  }
  if (features.cols() != config_.input_dim) {
    throw ShapeError("model_forward: shape mismatch " + shape_string(features.shape()) +
                     " vs input_dim " + std::to_string(config_.input_dim));
  }

  const std::size_t frames = features.rows();
  const std::size_t stride = config_.downsample_stride;
  RealArray pooled;
  if (stride == 1) {
    pooled = features;
  } else {
    // mean over each window of `stride` frames; the last window may be short
    const std::size_t out = config_.output_frames(frames);
    pooled = RealArray::matrix(out, config_.input_dim);
    for (std::size_t w = 0; w < out; ++w) {
      const std::size_t begin = w * stride;
      const std::size_t end = std::min(frames, begin + stride);
      const double inv = 1.0 / static_cast<double>(end - begin);
      for (std::size_t t = begin; t < end; ++t)
        for (std::size_t j = 0; j < config_.input_dim; ++j) pooled(w, j) += features(t, j) * inv;
    }
  }

  Var x = tape.constant(std::move(pooled));
  Var layer_in = ad::add_row(ad::matmul(x, params[proj_weight_]), params[proj_bias_]);
  for (const auto& dirs : layers_) {
    if (dirs.size() == 1) {
      layer_in = run_direction(tape, params, dirs[0], layer_in, false);
    } else {
      Var fw = run_direction(tape, params, dirs[0], layer_in, false);
      Var bw = run_direction(tape, params, dirs[1], layer_in, true);
      const Var both[] = {fw, bw};
      layer_in = ad::concat(both, 1);
    }
  }
  return ad::add_row(ad::matmul(layer_in, params[out_weight_]), params[out_bias_]);
}

RealArray SequenceModel::logits(const ParameterVector& theta, const RealArray& features) const {
  // constants only, so no backward closures are recorded
  Tape tape;
  std::vector<Var> params;
  params.reserve(theta.num_segments());
  for (std::size_t i = 0; i < theta.num_segments(); ++i) params.push_back(tape.constant(theta.array(i)));
  return forward(tape, params, features).value();
}

}  // namespace lctc
