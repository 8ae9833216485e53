#include <algorithm>
#include <random>
#include <set>

#include "doctest.h"
#include "lctc/errors.hpp"
#include "lctc/memory.hpp"
#include "lctc/ngram.hpp"

using namespace lctc;

namespace {

Utterance sized(const std::string& id, std::size_t frames, LabelSequence labels = {1}) {
  return Utterance{id, RealArray::matrix(frames, 2), std::move(labels), 1};
}

TaskDataset random_dataset(int task, std::size_t n, std::mt19937_64& rng) {
  TaskDataset ds{task, 3, 2, {}};
  for (std::size_t i = 0; i < n; ++i) {
    LabelSequence labels;
    const std::size_t len = 1 + rng() % 5;
    for (std::size_t j = 0; j < len; ++j) labels.push_back(1 + static_cast<Label>(rng() % 3));
    ds.utterances.push_back(sized("t" + std::to_string(task) + "-" + std::to_string(i), 2 + rng() % 20, labels));
  }
  return ds;
}

std::vector<std::string> ids(const std::vector<Utterance>& us) {
  std::vector<std::string> out;
  for (const auto& u : us) out.push_back(u.id);
  return out;
}

}  // namespace

TEST_CASE("policy names") {
  for (auto p : {SelectionPolicy::random, SelectionPolicy::min_perplexity, SelectionPolicy::median_length})
    CHECK(parse_selection_policy(to_string(p)) == p);
  CHECK(parse_selection_policy("len") == SelectionPolicy::median_length);
  CHECK(parse_selection_policy("pp") == SelectionPolicy::min_perplexity);
  CHECK_THROWS_AS(parse_selection_policy("best"), InvalidArgument);
}

TEST_CASE("median-length selection keeps the median utterance") {
  const TaskDataset ds{1, 3, 2, {sized("a", 3), sized("b", 5), sized("c", 9)}};
  CHECK(median_frames(ds) == 5.0);
  CHECK(ids(select_for_memory(ds, SelectionPolicy::median_length, 5, nullptr, 0)) ==
        std::vector<std::string>{"b"});
}

TEST_CASE("a budget covering everything keeps the whole dataset") {
  std::mt19937_64 rng(1);
  const TaskDataset ds = random_dataset(1, 12, rng);
  const auto lm = NGramLM::train({{1, 2}}, 3, 2, 0.5);
  for (auto p : {SelectionPolicy::random, SelectionPolicy::min_perplexity, SelectionPolicy::median_length}) {
    auto got = ids(select_for_memory(ds, p, ds.total_frames(), &lm, 3));
    auto all = ids(ds.utterances);
    std::sort(got.begin(), got.end());
    std::sort(all.begin(), all.end());
    CHECK(got == all);
  }
}

TEST_CASE("perplexity selection prefers sequences the LM likes") {
  const auto lm = NGramLM::train({{1}}, 2, 1, 1.0);
  const TaskDataset ds{1, 2, 2, {sized("ab", 4, {1, 2}), sized("aa", 4, {1, 1})}};
  CHECK(lm.perplexity(LabelSequence{1, 1}) < lm.perplexity(LabelSequence{1, 2}));
  CHECK(select_for_memory(ds, SelectionPolicy::min_perplexity, 4, &lm, 0).front().id == "aa");
  CHECK_THROWS_AS(select_for_memory(ds, SelectionPolicy::min_perplexity, 4, nullptr, 0), InvalidArgument);
}

TEST_CASE("selection stops at the first utterance that does not fit") {
  const TaskDataset ds{1, 3, 2, {sized("a", 4), sized("b", 6), sized("c", 5), sized("d", 1)}};
  // median 4.5: order a(0.5) c(0.5) b(1.5) d(3.5)
  CHECK(ids(select_for_memory(ds, SelectionPolicy::median_length, 10, nullptr, 0)) ==
        std::vector<std::string>{"a", "c"});
  CHECK(select_for_memory(ds, SelectionPolicy::median_length, 3, nullptr, 0).empty());
  CHECK(select_for_memory(ds, SelectionPolicy::random, 0, nullptr, 0).empty());
}

TEST_CASE("random selection is seeded") {
  std::mt19937_64 rng(2);
  const TaskDataset ds = random_dataset(1, 30, rng);
  CHECK(ids(select_for_memory(ds, SelectionPolicy::random, 60, nullptr, 5)) ==
        ids(select_for_memory(ds, SelectionPolicy::random, 60, nullptr, 5)));
  CHECK(selection_order(ds, SelectionPolicy::random, nullptr, 5) !=
        selection_order(ds, SelectionPolicy::random, nullptr, 6));
}

TEST_CASE("slot budgets are balanced") {
  for (std::size_t cap : {0u, 1u, 7u, 100u, 101u, 997u}) {
    EpisodicMemory mem(cap, SelectionPolicy::random, 1);
    for (std::size_t k = 1; k <= 7; ++k) {
      const auto b = mem.slot_budgets(k);
      std::size_t total = 0;
      for (auto v : b) {
        CHECK(v <= (cap + k - 1) / k);
        total += v;
      }
      CHECK(total == cap);
      if (k > 1) {
        const auto prev = mem.slot_budgets(k - 1);
        for (std::size_t i = 0; i + 1 < k; ++i) CHECK(b[i] <= prev[i]);
      }
    }
  }
}

TEST_CASE("rebalance") {
  std::mt19937_64 rng(3);
  const TaskDataset t1 = random_dataset(1, 40, rng), t2 = random_dataset(2, 40, rng), t3 = random_dataset(3, 40, rng);
  SUBCASE("a single past task owns the whole budget") {
    EpisodicMemory mem(100, SelectionPolicy::median_length, 1);
    mem.rebalance(t1, nullptr);
    CHECK(ids(mem.slots().at(1)) == ids(select_for_memory(t1, SelectionPolicy::median_length, 100, nullptr, 0)));
  }
  SUBCASE("two tasks share capacity 100") {
    EpisodicMemory mem(100, SelectionPolicy::random, 1);
    mem.rebalance(t1, nullptr);
    mem.rebalance(t2, nullptr);
    for (const auto& [task, items] : mem.slots()) CHECK(total_frames(items) <= 50);
    CHECK(mem.stored_frames() <= 100);
  }
  SUBCASE("shrinking equals a fresh selection at the smaller budget") {
    for (auto policy : {SelectionPolicy::random, SelectionPolicy::min_perplexity, SelectionPolicy::median_length}) {
      const auto lm1 = NGramLM::train({{1, 2, 3}}, 3, 2, 0.5);
      const auto lm2 = NGramLM::train({{3, 2, 1}}, 3, 2, 0.5);
      const auto lm3 = NGramLM::train({{2, 2}}, 3, 1, 0.5);
      for (std::size_t cap : {37u, 90u, 151u}) {
        EpisodicMemory mem(cap, policy, 9);
        mem.rebalance(t1, &lm1);
        mem.rebalance(t2, &lm2);
        mem.rebalance(t3, &lm3);
        const auto b = mem.slot_budgets(3);
        CHECK(ids(mem.slots().at(1)) == ids(select_for_memory(t1, policy, b[0], &lm1, mem.selection_seed(1))));
        CHECK(ids(mem.slots().at(2)) == ids(select_for_memory(t2, policy, b[1], &lm2, mem.selection_seed(2))));
        CHECK(ids(mem.slots().at(3)) == ids(select_for_memory(t3, policy, b[2], &lm3, mem.selection_seed(3))));
      }
    }
  }
  SUBCASE("pooled view is in task order") {
    EpisodicMemory mem(200, SelectionPolicy::random, 1);
    CHECK(mem.empty());
    mem.rebalance(t1, nullptr);
    mem.rebalance(t2, nullptr);
    const auto pooled = mem.pooled();
    CHECK(pooled.size() == mem.stored_utterances());
    CHECK(std::is_sorted(pooled.begin(), pooled.end(),
                         [](const Utterance* a, const Utterance* b) { return a->id[1] < b->id[1]; }));
  }
}
