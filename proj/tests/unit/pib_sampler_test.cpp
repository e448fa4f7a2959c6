#include <gtest/gtest.h>

#include <numeric>
#include <random>
#include <set>

#include "../oracles.hpp"
#include "opis/error.hpp"
#include "opis/pib_sampler.hpp"

namespace opis {
namespace {

TEST(Schedule, ProgressiveT) {
  EXPECT_EQ(progressive_t(70, 70, 90), 0.0);
  EXPECT_EQ(progressive_t(90, 70, 90), 1.0);
  EXPECT_EQ(progressive_t(85'000, 70'000, 90'000), 0.75);
}

TEST(Schedule, RatioMu) {
  EXPECT_EQ(ratio_mu(20, 0), 20.0);
  EXPECT_EQ(ratio_mu(20, 1), 4.0);
  EXPECT_EQ(ratio_mu(20, 0.5), 12.0);
}

TEST(Schedule, NeglectThreshold) {
  EXPECT_EQ(neglect_threshold(0.05, 0.85, 0, 1000), 0.05);
  EXPECT_NEAR(neglect_threshold(0.05, 0.85, 1000, 1000), 0.90, 1e-15);
  EXPECT_NEAR(neglect_threshold(0.05, 0.85, 500, 1000), 0.475, 1e-15);
}

TEST(Schedule, StateIsContinuousAtTheBoundary) {
  ScheduleState s;
  s.finetune_start = 10;
  s.final_iteration = 20;
  s.iteration = 9;
  EXPECT_EQ(s.phase(), Phase::kNormal);
  EXPECT_EQ(s.progress(), 0.0);
  s.iteration = 10;
  EXPECT_EQ(s.phase(), Phase::kFinetune);
  EXPECT_EQ(s.progress(), 0.0);
  EXPECT_EQ(s.ratio(), s.mu_s);
}

TEST(Bins, Edges) {
  const std::vector<double> a = iou_bin_edges(0.1, 0.5);
  ASSERT_EQ(a.size(), 5u);
  const double want_a[] = {0.1, 0.2, 0.3, 0.4, 0.5};
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(a[i], want_a[i], 1e-15);
  EXPECT_EQ(a.front(), 0.1);
  EXPECT_EQ(a.back(), 0.5);
  const std::vector<double> b = iou_bin_edges(0.0, 0.4);
  const double want_b[] = {0.0, 0.1, 0.2, 0.3, 0.4};
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(b[i], want_b[i], 1e-15);
}

TEST(Bins, EveryValueInExactlyOneBin) {
  const std::vector<double> e = iou_bin_edges(0.1, 0.5);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.1, 0.5);
  for (int i = 0; i < 10000; ++i) {
    const double v = u(rng);
    int hits = 0;
    for (std::size_t j = 0; j < 4; ++j) {
      const bool last = j == 3;
      hits += (v >= e[j] && (v < e[j + 1] || last)) ? 1 : 0;
    }
    EXPECT_EQ(hits, 1);
    const std::size_t b = iou_bin(e, v);
    EXPECT_GE(v, e[b]);
    if (b < 3) EXPECT_LT(v, e[b + 1]);
  }
}

SamplerRng stream(std::uint64_t k) { return SamplerRng{42, k, 0, 1, 0}; }

TEST(SampleNegatives, CapKeepsEverything) {
  std::mt19937_64 rng(2);
  const auto negs = testing::binned_negatives({1, 1, 1, 0}, 0.1, 0.5, rng);
  const NegativeSample s = sample_negatives(negs, 1, 20.0, 0.1, 0.5, stream(0));
  EXPECT_TRUE(s.capped);
  EXPECT_EQ(s.selected, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(SampleNegatives, StageOneOnly) {
  std::mt19937_64 rng(3);
  const auto negs = testing::binned_negatives({100, 100, 100, 100}, 0.1, 0.5, rng);
  const NegativeSample s = sample_negatives(negs, 10, 4.0, 0.1, 0.5, stream(1));
  EXPECT_EQ(s.selected.size(), 40u);
  EXPECT_EQ(s.bin_selected, (std::vector<std::size_t>{10, 10, 10, 10}));
  EXPECT_EQ(s.stage2_count, 0u);
}

TEST(SampleNegatives, TwoStageBookkeeping) {
  std::mt19937_64 rng(4);
  const auto negs = testing::binned_negatives({50, 50, 50, 50}, 0.1, 0.5, rng);
  const NegativeSample s = sample_negatives(negs, 2, 20.0, 0.1, 0.5, stream(2));
  EXPECT_EQ(s.target, 40u);
  EXPECT_EQ(s.selected.size(), 40u);
  EXPECT_EQ(s.bin_selected, (std::vector<std::size_t>{2, 2, 2, 2}));
  EXPECT_EQ(s.stage1.size(), 8u);
  EXPECT_EQ(s.stage2_count, 32u);
}

TEST(SampleNegatives, SelectionIsADistinctSubset) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> pop(0, 30);
  std::uniform_int_distribution<std::size_t> npos(1, 8);
  std::uniform_real_distribution<double> mu(4.0, 20.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto negs = testing::binned_negatives({pop(rng), pop(rng), pop(rng), pop(rng)}, 0.1, 0.5, rng);
    if (negs.empty()) continue;
    const NegativeSample s = sample_negatives(negs, npos(rng), mu(rng), 0.1, 0.5, stream(trial));
    std::set<std::size_t> pool;
    for (const auto& n : negs) pool.insert(n.proposal);
    const std::set<std::size_t> chosen(s.selected.begin(), s.selected.end());
    EXPECT_EQ(chosen.size(), s.selected.size());
    EXPECT_TRUE(std::is_sorted(s.selected.begin(), s.selected.end()));
    for (std::size_t r : chosen) EXPECT_TRUE(pool.contains(r));
    EXPECT_EQ(s.selected.size(), std::min(s.target, negs.size()));
  }
}

TEST(SampleNegatives, ReproducibleFromStreamCoordinates) {
  std::mt19937_64 rng(6);
  const auto negs = testing::binned_negatives({40, 40, 40, 40}, 0.1, 0.5, rng);
  const auto a = sample_negatives(negs, 3, 10.0, 0.1, 0.5, SamplerRng{9, 1, 2, 3, 4});
  const auto b = sample_negatives(negs, 3, 10.0, 0.1, 0.5, SamplerRng{9, 1, 2, 3, 4});
  const auto c = sample_negatives(negs, 3, 10.0, 0.1, 0.5, SamplerRng{9, 1, 2, 3, 5});
  EXPECT_EQ(a.selected, b.selected);
  EXPECT_NE(a.selected, c.selected);
}

TEST(SampleNegatives, Preconditions) {
  const std::vector<NegativeCandidate> negs{{0, 0.3}};
  EXPECT_THROW(sample_negatives(negs, 0, 10.0, 0.1, 0.5, stream(0)), InvalidInput);
  EXPECT_THROW(sample_negatives(negs, 1, 3.0, 0.1, 0.5, stream(0)), InvalidInput);
}

TEST(ReselectPositives, Examples) {
  Matrix phi = Matrix::Zero(2, 5);
  const std::vector<std::size_t> only{2};
  EXPECT_EQ(reselect_positives(only, phi, 0, 2, 100.0), only);

  phi.row(0) << 0.6, 0.2, 0.3, 0.0, 0.0;
  const std::vector<std::size_t> three{0, 1, 2};
  EXPECT_EQ(reselect_positives(three, phi, 0, 0, 0.9), three);

  phi.row(0) << 0.05, 0.01, 0.01, 0.01, 0.01;
  const std::vector<std::size_t> five{0, 1, 2, 3, 4};
  EXPECT_EQ(reselect_positives(five, phi, 0, 0, 0.5), std::vector<std::size_t>{0});

  EXPECT_THROW(reselect_positives(three, phi, 0, 4, 0.5), InternalError);
}

SupervisionTargets mixed_targets() {
  SupervisionTargets t;
  t.num_classes = 2;
  const InstanceStatus pattern[] = {InstanceStatus::kPositive, InstanceStatus::kNegative, InstanceStatus::kIgnored,
                                    InstanceStatus::kPositive, InstanceStatus::kNegative, InstanceStatus::kNegative};
  for (auto s : pattern) {
    InstanceTarget it;
    it.status = s;
    it.weight = s == InstanceStatus::kIgnored ? 0.0 : 0.7;
    it.selected = s != InstanceStatus::kIgnored;
    t.instances.push_back(it);
  }
  return t;
}

TEST(SelectionMask, IdentityAndEmpty) {
  const SupervisionTargets t = mixed_targets();
  const std::vector<std::size_t> pos{0, 3}, neg{1, 4, 5};
  const SupervisionTargets same = apply_selection_mask(t, pos, neg);
  for (std::size_t r = 0; r < t.size(); ++r) {
    EXPECT_EQ(same.instances[r].weight, t.instances[r].weight);
    EXPECT_EQ(same.instances[r].status, t.instances[r].status);
  }
  const SupervisionTargets none = apply_selection_mask(t, {}, {});
  for (const auto& it : none.instances) EXPECT_EQ(it.weight, 0.0);
  EXPECT_EQ(none.selected_count(), 0u);
}

TEST(SelectionMask, NonzeroWeightsEqualSelection) {
  const SupervisionTargets t = mixed_targets();
  std::mt19937_64 rng(7);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::size_t> pos, neg;
    std::set<std::size_t> want;
    for (std::size_t r = 0; r < t.size(); ++r) {
      if (t.instances[r].status == InstanceStatus::kIgnored || !coin(rng)) continue;
      (t.instances[r].status == InstanceStatus::kPositive ? pos : neg).push_back(r);
      want.insert(r);
    }
    const SupervisionTargets m = apply_selection_mask(t, pos, neg);
    std::set<std::size_t> got;
    for (std::size_t r = 0; r < m.size(); ++r) {
      if (m.instances[r].weight != 0.0) got.insert(r);
      EXPECT_EQ(m.instances[r].status, t.instances[r].status);
    }
    EXPECT_EQ(got, want);
  }
}

TEST(SelectionMask, RejectsMislabelledIndex) {
  const std::vector<std::size_t> bad{1};
  EXPECT_THROW(apply_selection_mask(mixed_targets(), bad, {}), InvalidInput);
}

}  // namespace
}  // namespace opis
