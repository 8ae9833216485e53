#include <cmath>
#include <random>

#include "doctest.h"
#include "lctc/autodiff.hpp"
#include "lctc/errors.hpp"
#include "lctc/gradcheck.hpp"
#include "lctc/lifelong.hpp"
#include "lctc/memory.hpp"
#include "lctc/objective.hpp"

using namespace lctc;

namespace {

RealArray random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double s = 1.0) {
  std::normal_distribution<double> n(0.0, s);
  RealArray a = RealArray::matrix(r, c);
  for (auto& v : a.data()) v = n(rng);
  return a;
}

ParameterVector single(double v) {
  ParameterVector p;
  p.add("x", RealArray::scalar(v));
  return p;
}

ModelConfig small_model() {
  ModelConfig c;
  c.hidden_dim = 5;
  c.vocab_size = 3;
  c.input_dim = 4;
  return c;
}

Utterance utt(const std::string& id, std::size_t frames, LabelSequence labels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return Utterance{id, random_matrix(frames, 4, rng), std::move(labels), 1};
}

void check_near(std::span<const double> a, std::span<const double> b, double tol) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= tol * (1.0 + std::abs(b[i])));
}

}  // namespace

TEST_CASE("importance maps reject negative or non-finite entries") {
  CHECK_THROWS_AS(ImportanceMap({1.0, -0.1}), InvalidArgument);
  CHECK_THROWS_AS(ImportanceMap({std::nan("")}), InvalidArgument);
  CHECK_NOTHROW(ImportanceMap({0.0, 2.0}));
}

TEST_CASE("ewc penalty") {
  SUBCASE("no drift") {
    const auto p = ewc_penalty(single(1.5), single(1.5), ImportanceMap({3.0}), 2.0);
    CHECK(p.value == 0.0);
    CHECK(p.gradient[0] == 0.0);
  }
  SUBCASE("lambda zero") {
    const auto p = ewc_penalty(single(4.0), single(1.0), ImportanceMap({3.0}), 0.0);
    CHECK(p.value == 0.0);
  }
  SUBCASE("single parameter arithmetic") {
    const auto p = ewc_penalty(single(1.5), single(1.0), ImportanceMap({1.0}), 2.0);
    CHECK(p.value == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(p.gradient[0] == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("layout mismatch") {
    ParameterVector two;
    two.add("x", RealArray::matrix(1, 2));
    CHECK_THROWS(ewc_penalty(two, single(0.0), ImportanceMap({1.0}), 1.0));
  }
  SUBCASE("gradient matches finite differences") {
    std::mt19937_64 rng(1);
    ParameterVector theta, star;
    theta.add("w", random_matrix(3, 4, rng));
    star.add("w", random_matrix(3, 4, rng));
    std::vector<double> om(12);
    for (auto& v : om) v = std::abs(random_matrix(1, 1, rng).item());
    const ImportanceMap omega(om);
    const Objective f = [&](const ParameterVector& th) {
      const auto p = ewc_penalty(th, star, omega, 0.7);
      return Evaluation{p.value, p.gradient};
    };
    CHECK(finite_diff_check(f, theta) < 1e-7);
  }
}

TEST_CASE("ewc consolidation") {
  SUBCASE("online, first task") {
    EwcState s(EwcMode::online, 1.0);
    s.consolidate(ImportanceMap({0.5, 2.0}), [] {
      ParameterVector p;
      p.add("x", RealArray::matrix(1, 2, {1.0, -1.0}));
      return p;
    }());
    REQUIRE(s.anchors().size() == 1);
    CHECK(s.anchors()[0].importance == ImportanceMap({0.5, 2.0}));
    CHECK(s.anchors()[0].theta_star.flat()[1] == -1.0);
  }
  SUBCASE("online decay arithmetic") {
    EwcState s(EwcMode::online, 0.5);
    s.consolidate(ImportanceMap({2.0}), single(0.0));
    s.consolidate(ImportanceMap({1.0}), single(1.0));
    REQUIRE(s.anchors().size() == 1);
    CHECK(s.anchors()[0].importance[0] == 2.0);
    CHECK(s.anchors()[0].theta_star.flat()[0] == 1.0);
  }
  SUBCASE("separate mode sums per-task penalties") {
    EwcState s(EwcMode::separate);
    s.consolidate(ImportanceMap({2.0}), single(0.0));
    s.consolidate(ImportanceMap({1.0}), single(1.0));
    const auto theta = single(3.0);
    const auto a = ewc_penalty(theta, single(0.0), ImportanceMap({2.0}), 0.3);
    const auto b = ewc_penalty(theta, single(1.0), ImportanceMap({1.0}), 0.3);
    const auto p = s.penalty(theta, 0.3);
    CHECK(p.value == doctest::Approx(a.value + b.value).epsilon(1e-15));
    CHECK(p.gradient[0] == doctest::Approx(a.gradient[0] + b.gradient[0]).epsilon(1e-15));
  }
  SUBCASE("no anchors means no penalty") {
    EwcState s(EwcMode::separate);
    CHECK(s.penalty(single(3.0), 1.0).value == 0.0);
  }
}

TEST_CASE("fisher diagonal") {
  const ModelConfig c = small_model();
  const SequenceModel m(c);
  const ParameterVector theta = m.init();
  const TaskDataset ds{1, 3, 4, {utt("a", 6, {1, 2}, 1), utt("b", 8, {3}, 2), utt("c", 5, {2, 2}, 3)}};

  SUBCASE("one sample is the squared gradient of that utterance") {
    const auto f = fisher_diagonal(m, theta, TaskDataset{1, 3, 4, {ds.utterances[1]}}, 1, 9);
    const auto g = utterance_ctc_objective(m, theta, ds.utterances[1]).gradient;
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(f[i] == g[i] * g[i]);
  }
  SUBCASE("full sampling averages squared gradients") {
    const TaskDataset two{1, 3, 4, {ds.utterances[0], ds.utterances[1]}};
    const auto f = fisher_diagonal(m, theta, two, 10, 9);
    const auto g0 = utterance_ctc_objective(m, theta, two.utterances[0]).gradient;
    const auto g1 = utterance_ctc_objective(m, theta, two.utterances[1]).gradient;
    for (std::size_t i = 0; i < g0.size(); ++i)
      CHECK(f[i] == doctest::Approx((g0[i] * g0[i] + g1[i] * g1[i]) / 2).epsilon(1e-12));
  }
  SUBCASE("vanishing loss gradient gives a zero map") {
    // a saturated output bias makes the single-frame CTC posterior exact
    ParameterVector sat = theta.zeros_like();
    sat.values(m.segment_index("out.bias"))[1] = 800.0;
    const TaskDataset one{1, 3, 4, {utt("z", 1, {1}, 4)}};
    const auto f = fisher_diagonal(m, sat, one, 1, 1);
    for (double v : f.values()) CHECK(v == 0.0);
  }
  SUBCASE("sampling is seeded") {
    CHECK(fisher_diagonal(m, theta, ds, 2, 5) == fisher_diagonal(m, theta, ds, 2, 5));
  }
}

TEST_CASE("synaptic intelligence") {
  SIState s = SIState::start(single(0.0), 0.1);
  SUBCASE("zero gradient leaves omega alone") {
    const double g[] = {0.0}, d[] = {0.3};
    s.accumulate_step(g, d);
    CHECK(s.omega_running[0] == 0.0);
  }
  SUBCASE("one step and additivity") {
    const double g[] = {-1.0}, d[] = {0.1};
    s.accumulate_step(g, d);
    CHECK(s.omega_running[0] == doctest::Approx(0.1).epsilon(1e-15));
    const double g2[] = {-2.0}, d2[] = {0.25};
    s.accumulate_step(g2, d2);
    CHECK(s.omega_running[0] == doctest::Approx(0.6).epsilon(1e-15));
  }
  SUBCASE("consolidation") {
    const ImportanceMap prev({3.0});
    CHECK(si_consolidate(prev, s, single(0.7)) == prev);
    s.omega_running = {1.0};
    CHECK(si_consolidate(prev, s, single(0.0))[0] == doctest::Approx(13.0).epsilon(1e-14));
    s.omega_running = {-4.0};
    CHECK(si_consolidate(prev, s, single(0.2))[0] == 3.0);
  }
}

TEST_CASE("knowledge distillation") {
  std::mt19937_64 rng(3);
  SUBCASE("identical logits") {
    const RealArray z = random_matrix(4, 5, rng);
    CHECK(kd_loss(z, z, 2.0).value == doctest::Approx(0.0).epsilon(1e-15));
  }
  SUBCASE("per-frame shift invariance") {
    const RealArray zo = random_matrix(3, 4, rng), zn = random_matrix(3, 4, rng);
    RealArray shifted = zn;
    for (std::size_t k = 0; k < 4; ++k) shifted(1, k) += 7.5;
    CHECK(kd_loss(zo, shifted, 1.5).value == doctest::Approx(kd_loss(zo, zn, 1.5).value).epsilon(1e-12));
  }
  SUBCASE("two-point hand computation") {
    const double e = std::exp(1.0);
    const double p0 = 1 / (1 + e), p1 = e / (1 + e);  // softmax([0,1])
    const double q0 = e / (1 + e), q1 = 1 / (1 + e);  // softmax([1,0])
    const double kl = p0 * std::log(p0 / q0) + p1 * std::log(p1 / q1);
    const auto r = kd_loss(RealArray::row({0.0, 1.0}), RealArray::row({1.0, 0.0}), 1.0);
    CHECK(r.value == doctest::Approx(kl).epsilon(1e-14));
  }
  SUBCASE("gradient and tape node") {
    const RealArray zo = random_matrix(3, 4, rng), zn = random_matrix(3, 4, rng);
    const auto r = kd_loss(zo, zn, 2.0);
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t k = 0; k < 4; ++k) {
        RealArray a = zn, b = zn;
        a(t, k) += 1e-6;
        b(t, k) -= 1e-6;
        const double fd = (kd_loss(zo, a, 2.0).value - kd_loss(zo, b, 2.0).value) / 2e-6;
        CHECK(r.grad_logits_new(t, k) == doctest::Approx(fd).epsilon(1e-6));
      }
    Tape tape;
    const Var v = tape.variable(zn);
    const Var loss = kd_loss(zo, v, 2.0);
    tape.backward(loss);
    CHECK(loss.value().item() == r.value);
    CHECK(tape.gradient(v) == r.grad_logits_new);
  }
  SUBCASE("errors") {
    CHECK_THROWS(kd_loss(RealArray::matrix(2, 3), RealArray::matrix(3, 3), 1.0));
    CHECK_THROWS(kd_loss(RealArray::matrix(2, 3), RealArray::matrix(2, 3), 0.0));
  }
}

TEST_CASE("gem projection") {
  SUBCASE("inactive constraint") {
    const std::vector<double> g{0.3, 0.0}, m{1.0, 5.0};
    const auto r = gem_project(g, m);
    CHECK_FALSE(r.projected);
    CHECK(r.gradient == g);
  }
  SUBCASE("full opposition") {
    const std::vector<double> g{1.0, -2.0, 0.5}, m{-1.0, 2.0, -0.5};
    for (double v : gem_project(g, m).gradient) CHECK(std::abs(v) < 1e-15);
  }
  SUBCASE("two-dimensional case against a dense grid") {
    const std::vector<double> g{1.0, -1.0}, m{0.0, 1.0};
    const auto r = gem_project(g, m);
    CHECK(r.projected);
    CHECK(r.gradient[0] == doctest::Approx(1.0));
    CHECK(r.gradient[1] == doctest::Approx(0.0));
    const double dist = std::hypot(g[0] - r.gradient[0], g[1] - r.gradient[1]);
    double best = 1e9;
    for (int i = -300; i <= 300; ++i)
      for (int j = -300; j <= 300; ++j) {
        const double x = i / 100.0, y = j / 100.0;
        if (x * m[0] + y * m[1] < 0) continue;
        best = std::min(best, std::hypot(g[0] - x, g[1] - y));
      }
    CHECK(dist <= best + 1e-12);
  }
  SUBCASE("zero memory gradient leaves g alone") {
    const std::vector<double> g{1.0, -1.0}, m{0.0, 0.0};
    const auto r = gem_project(g, m);
    CHECK(r.degenerate_memory);
    CHECK(r.gradient == g);
  }
  SUBCASE("size mismatch") {
    const std::vector<double> g{1.0}, m{0.0, 0.0};
    CHECK_THROWS_AS(gem_project(g, m), ShapeError);
  }
}

TEST_CASE("memory gradient is the mean of per-utterance gradients") {
  const ModelConfig c = small_model();
  const SequenceModel m(c);
  const ParameterVector theta = m.init();
  const Utterance a = utt("a", 6, {1, 2}, 11), b = utt("b", 7, {3, 1}, 12);
  auto memory_of = [](std::vector<Utterance> us) {
    EpisodicMemory mem(1000, SelectionPolicy::random, 1);
    mem.rebalance(TaskDataset{1, 3, 4, std::move(us)}, nullptr);
    return mem;
  };
  const auto ga = utterance_ctc_objective(m, theta, a).gradient;
  const auto gb = utterance_ctc_objective(m, theta, b).gradient;
  check_near(memory_gradient(m, theta, memory_of({a})), ga, 1e-15);
  check_near(memory_gradient(m, theta, memory_of({a, a})), ga, 1e-14);
  std::vector<double> mean(ga.size());
  for (std::size_t i = 0; i < ga.size(); ++i) mean[i] = (ga[i] + gb[i]) / 2;
  check_near(memory_gradient(m, theta, memory_of({a, b})), mean, 1e-13);
  CHECK_THROWS(memory_gradient(m, theta, EpisodicMemory(10, SelectionPolicy::random, 1)));
}

TEST_CASE("loss gradients with regularisers match finite differences") {
  const ModelConfig c = small_model();
  const SequenceModel m(c);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    ModelConfig cs = c;
    cs.seed = seed;
    const ParameterVector theta = model_init(cs);
    cs.seed = seed + 100;
    ParameterVector anchor = model_init(cs);
    const Utterance u = utt("u", 9, {2, 1, 3}, seed);
    std::mt19937_64 rng(seed);
    std::vector<double> om(theta.total_size());
    for (auto& v : om) v = std::abs(random_matrix(1, 1, rng).item());
    const ImportanceMap omega(om);
    FiniteDiffOptions o;
    o.coordinates = random_probe_coordinates(theta.total_size(), 10, seed);

    const Objective si_aug = [&](const ParameterVector& th) {
      auto e = utterance_ctc_objective(m, th, u);
      const auto p = ewc_penalty(th, anchor, omega, 0.5);
      e.value += p.value;
      for (std::size_t i = 0; i < e.gradient.size(); ++i) e.gradient[i] += p.gradient[i];
      return e;
    };
    CHECK(finite_diff_check(si_aug, theta, o) < 1e-4);

    // a trained teacher is peaked; near-uniform teachers give KD gradients
    // too small to difference reliably
    {
      auto bias = anchor.values(m.segment_index("out.bias"));
      for (std::size_t k = 0; k < bias.size(); ++k) bias[k] = 3.0 * static_cast<double>(k % 3);
    }
    const RealArray old_logits = m.logits(anchor, u.features);
    const Objective kd = [&](const ParameterVector& th) {
      Tape tape;
      const auto leaves = tape.bind(th);
      const Var loss = kd_loss(old_logits, m.forward(tape, leaves, u.features), 2.0);
      tape.backward(loss);
      return Evaluation{loss.value().item(), tape.parameter_gradient()};
    };
    CHECK(finite_diff_check(kd, theta, o) < 1e-4);
  }
}
