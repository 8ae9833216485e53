#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lctc/autodiff.hpp"
#include "lctc/parameters.hpp"

namespace lctc {

/// Shape of the CTC acoustic model: mean-pool downsampler with a linear
/// projection, a stack of (optionally bidirectional) LSTM layers and a
/// linear output layer over vocab_size + 1 classes (blank = 0).
struct ModelConfig {
  std::size_t input_dim = 8;
  std::size_t hidden_dim = 32;
  std::size_t num_layers = 2;
  bool bidirectional = false;
  std::size_t downsample_stride = 2;
  std::size_t vocab_size = 8;
  std::uint64_t seed = 1;

  std::size_t output_dim() const noexcept { return vocab_size + 1; }
  std::size_t output_frames(std::size_t frames) const noexcept {
    return (frames + downsample_stride - 1) / downsample_stride;
  }
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Deterministic init from config.seed. Weights ~ U(-1/sqrt(fan_in),
/// 1/sqrt(fan_in)); biases zero except the LSTM forget gate, which is 1.
ParameterVector model_init(const ModelConfig& config);

class SequenceModel {
 public:
  explicit SequenceModel(const ModelConfig& config);

  const ModelConfig& config() const noexcept { return config_; }
  ParameterVector init() const { return model_init(config_); }

  /// Logits (T', vocab_size + 1) on the tape. `params` are the leaves
  /// returned by Tape::bind for a ParameterVector from model_init.
  Var forward(Tape& tape, std::span<const Var> params, const RealArray& features) const;

  /// Tape-free convenience: binds θ on a scratch tape and returns the logits.
  RealArray logits(const ParameterVector& theta, const RealArray& features) const;

  /// Segment index of a parameter, for tests that poke at specific weights.
  std::size_t segment_index(const std::string& name) const;

 private:
  struct Direction {
    std::size_t w_in, w_rec, bias;
  };
  Var run_direction(Tape& tape, std::span<const Var> params, const Direction& dir, Var input,
                    bool reverse) const;

  ModelConfig config_;
  std::size_t proj_weight_ = 0, proj_bias_ = 0;
  std::vector<std::vector<Direction>> layers_;
  std::size_t out_weight_ = 0, out_bias_ = 0;
  std::vector<std::string> names_;
};

}  // namespace lctc
