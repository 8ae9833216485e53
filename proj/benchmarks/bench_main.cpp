#include <random>

#include <benchmark/benchmark.h>

#include "lctc/autodiff.hpp"
#include "lctc/ctc.hpp"
#include "lctc/domain.hpp"
#include "lctc/lifelong.hpp"
#include "lctc/model.hpp"
#include "lctc/ngram.hpp"
#include "lctc/objective.hpp"

using namespace lctc;

namespace {

RealArray random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  RealArray a = RealArray::matrix(r, c);
  for (auto& v : a.data()) v = n(rng);
  return a;
}

LabelSequence labels_of(std::size_t len, std::size_t vocab) {
  LabelSequence l(len);
  for (std::size_t i = 0; i < len; ++i) l[i] = 1 + static_cast<Label>((3 * i) % vocab);
  return l;
}

void BM_CtcLoss(benchmark::State& state) {
  const auto frames = static_cast<std::size_t>(state.range(0));
  const RealArray z = random_matrix(frames, 9, 1);
  const LabelSequence labels = labels_of(frames / 4, 8);
  for (auto _ : state) benchmark::DoNotOptimize(ctc_loss(z, labels).loss);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(frames));
}
BENCHMARK(BM_CtcLoss)->Arg(16)->Arg(64)->Arg(256);

void BM_BeamSearch(benchmark::State& state) {
  const RealArray z = random_matrix(32, 9, 2);
  const NGramLM lm = NGramLM::train({labels_of(6, 8), labels_of(9, 8), {1, 2, 3}}, 8, 2, 0.1);
  const auto width = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(beam_search(z, &lm, 0.5, width).score);
}
BENCHMARK(BM_BeamSearch)->Arg(1)->Arg(8)->Arg(32);

void BM_ModelForwardBackward(benchmark::State& state) {
  ModelConfig c;
  c.bidirectional = state.range(1) != 0;
  const SequenceModel m(c);
  const ParameterVector theta = m.init();
  const auto frames = static_cast<std::size_t>(state.range(0));
  const Utterance u{"u", random_matrix(frames, c.input_dim, 3), labels_of(frames / 6, 8), 1};
  for (auto _ : state) benchmark::DoNotOptimize(utterance_ctc_objective(m, theta, u).value);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(frames));
}
BENCHMARK(BM_ModelForwardBackward)->Args({24, 0})->Args({96, 0})->Args({24, 1});

void BM_GemProject(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  const RealArray g = random_matrix(1, dim, 4), mem = random_matrix(1, dim, 5);
  std::vector<double> neg(mem.data().begin(), mem.data().end());
  for (auto& v : neg) v = -v;
  for (auto _ : state) benchmark::DoNotOptimize(gem_project(g.data(), neg).projected);
}
BENCHMARK(BM_GemProject)->Arg(1000)->Arg(20000);

void BM_GenerateDomain(benchmark::State& state) {
  const DomainSpec spec = default_domains(1)[0];
  for (auto _ : state) benchmark::DoNotOptimize(generate_domain(spec).train.size());
}
BENCHMARK(BM_GenerateDomain);

}  // namespace
BENCHMARK_MAIN();
