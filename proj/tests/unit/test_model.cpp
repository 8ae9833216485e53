#include <random>

#include "doctest.h"
#include "lctc/autodiff.hpp"
#include "lctc/ctc.hpp"
#include "lctc/errors.hpp"
#include "lctc/gradcheck.hpp"
#include "lctc/model.hpp"
#include "lctc/objective.hpp"

using namespace lctc;

namespace {

RealArray random_features(std::size_t frames, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  RealArray f = RealArray::matrix(frames, dim);
  for (auto& v : f.data()) v = n(rng);
  return f;
}

}  // namespace

TEST_CASE("model_init is deterministic and sized by the vocabulary") {
  ModelConfig c;
  c.vocab_size = 4;
  const SequenceModel m(c);
  CHECK(model_init(c) == model_init(c));
  const auto theta = m.init();
  const auto& out = theta.segment(m.segment_index("out.weight"));
  CHECK(out.shape == Shape{c.hidden_dim, 5});
  ModelConfig other = c;
  other.seed = 2;
  CHECK_FALSE(model_init(other) == model_init(c));
}

TEST_CASE("invalid model configurations") {
  ModelConfig c;
  c.num_layers = 0;
  CHECK_THROWS_AS(model_init(c), InvalidArgument);
  c = {};
  c.downsample_stride = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = {};
  c.hidden_dim = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("forward output shape follows the stride") {
  ModelConfig c;
  const SequenceModel m(c);
  const auto theta = m.init();
  CHECK(m.logits(theta, random_features(10, c.input_dim, 1)).shape() == Shape{5, c.vocab_size + 1});
  CHECK(m.logits(theta, random_features(11, c.input_dim, 1)).shape() == Shape{6, c.vocab_size + 1});
  CHECK_THROWS_AS(m.logits(theta, random_features(4, c.input_dim + 1, 1)), ShapeError);
}

TEST_CASE("zero parameters give uniform logits per frame") {
  ModelConfig c;
  const SequenceModel m(c);
  ParameterVector theta = m.init().zeros_like();
  const RealArray z = m.logits(theta, random_features(9, c.input_dim, 4));
  for (std::size_t t = 0; t < z.rows(); ++t)
    for (std::size_t k = 1; k < z.cols(); ++k) CHECK(z(t, k) == z(t, 0));
}

TEST_CASE("forward does not mutate its inputs") {
  ModelConfig c;
  const SequenceModel m(c);
  const auto theta = m.init();
  const auto copy = theta;
  const RealArray f = random_features(7, c.input_dim, 2);
  const RealArray fcopy = f;
  const RealArray a = m.logits(theta, f);
  const RealArray b = m.logits(theta, f);
  CHECK(theta == copy);
  CHECK(f == fcopy);
  CHECK(a == b);
}

TEST_CASE("encoder + CTC gradient matches finite differences") {
  for (bool bidir : {false, true}) {
    ModelConfig c;
    c.hidden_dim = 6;
    c.bidirectional = bidir;
    c.seed = 5;
    const SequenceModel m(c);
    const auto theta = m.init();
    const Utterance utt{"u", random_features(12, c.input_dim, 9), {1, 3, 3}, 1};
    const Objective f = [&](const ParameterVector& th) { return utterance_ctc_objective(m, th, utt); };
    FiniteDiffOptions o;
    o.coordinates = random_probe_coordinates(theta.total_size(), 40, 17);
    CHECK(finite_diff_check(f, theta, o) < 1e-4);
  }
}

TEST_CASE("every parameter segment influences the output") {
  ModelConfig c;
  c.hidden_dim = 4;
  c.bidirectional = true;
  const SequenceModel m(c);
  const auto theta = m.init();
  const Utterance utt{"u", random_features(8, c.input_dim, 3), {2, 1}, 1};
  const Evaluation e = utterance_ctc_objective(m, theta, utt);
  for (std::size_t s = 0; s < theta.num_segments(); ++s) {
    const auto& seg = theta.segment(s);
    double mass = 0.0;
    for (std::size_t i = 0; i < seg.size; ++i) mass += std::abs(e.gradient[seg.offset + i]);
    CHECK_MESSAGE(mass > 0.0, seg.name);
  }
}

TEST_CASE("bidirectional model is time-reversal symmetric under a direction swap") {
  ModelConfig c;
  c.hidden_dim = 5;
  c.num_layers = 1;
  c.bidirectional = true;
  c.downsample_stride = 1;
  const SequenceModel m(c);
  const ParameterVector theta = m.init();

  ParameterVector swapped = theta;
  for (const char* part : {"w_in", "w_rec", "bias"}) {
    const auto fw = m.segment_index(std::string("lstm0.fw.") + part);
    const auto bw = m.segment_index(std::string("lstm0.bw.") + part);
    auto a = swapped.values(fw);
    auto b = swapped.values(bw);
    std::vector<double> tmp(a.begin(), a.end());
    std::copy(b.begin(), b.end(), a.begin());
    std::copy(tmp.begin(), tmp.end(), b.begin());
  }
  // the output layer reads [fw | bw]; swap its two row blocks too
  auto w = swapped.values(m.segment_index("out.weight"));
  const std::size_t cols = c.vocab_size + 1, h = c.hidden_dim;
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t k = 0; k < cols; ++k) std::swap(w[r * cols + k], w[(r + h) * cols + k]);

  const RealArray f = random_features(6, c.input_dim, 8);
  RealArray reversed = f;
  for (std::size_t t = 0; t < f.rows(); ++t)
    for (std::size_t j = 0; j < f.cols(); ++j) reversed(t, j) = f(f.rows() - 1 - t, j);

  const RealArray y = m.logits(theta, f);
  const RealArray yr = m.logits(swapped, reversed);
  for (std::size_t t = 0; t < y.rows(); ++t)
    for (std::size_t k = 0; k < y.cols(); ++k)
      CHECK(yr(y.rows() - 1 - t, k) == doctest::Approx(y(t, k)).epsilon(1e-12));
}

TEST_CASE("infeasible utterances are skipped in a batch") {
  ModelConfig c;
  const SequenceModel m(c);
  const auto theta = m.init();
  const Utterance ok{"ok", random_features(8, c.input_dim, 1), {1, 2}, 1};
  const Utterance too_short{"short", random_features(2, c.input_dim, 2), {1, 1}, 1};
  const Utterance* both[] = {&ok, &too_short};
  const auto be = batch_ctc_objective(m, theta, both);
  CHECK(be.used == 1);
  CHECK(be.skipped == 1);
  const auto single = utterance_ctc_objective(m, theta, ok);
  CHECK(be.loss == single.value);
  CHECK(be.gradient == single.gradient);
  const Utterance* bad[] = {&too_short};
  CHECK_THROWS_AS(batch_ctc_objective(m, theta, bad), InfeasibleAlignment);
}
