#include <gtest/gtest.h>

#include <limits>
#include <random>

#include "../oracles.hpp"
#include "opis/error.hpp"
#include "opis/gradcheck.hpp"
#include "opis/model.hpp"
#include "opis/synthetic.hpp"
#include "opis/trainer.hpp"

namespace opis {
namespace {

TEST(GenerateScene, DegenerateWorldCopiesGroundTruth) {
  GenConfig cfg;
  cfg.clutter_rate = 0.0;
  cfg.jitter_scale = 0.0;
  cfg.feature_noise = 0.0;
  cfg.max_objects = 1;
  const Matrix protos = make_prototypes(cfg, 5);
  Engine rng(1);
  for (int i = 0; i < 20; ++i) {
    const Scene s = generate_scene(cfg, protos, rng);
    ASSERT_EQ(s.gt.size(), 1u);
    for (std::size_t r = 0; r < s.proposals.size(); ++r) {
      EXPECT_EQ(s.proposals[r], s.gt[0].box);
      EXPECT_TRUE(s.features.row(r).isApprox(protos.row(s.gt[0].class_id), 1e-12));
    }
  }
}

TEST(GenerateScene, NoisyFeaturesStayCloseToPrototype) {
  GenConfig cfg;
  cfg.clutter_rate = 0.0;
  cfg.jitter_scale = 0.0;
  cfg.feature_noise = 0.05;
  cfg.max_objects = 1;
  const Matrix protos = make_prototypes(cfg, 5);
  Engine rng(2);
  const Scene s = generate_scene(cfg, protos, rng);
  for (Eigen::Index r = 0; r < s.features.rows(); ++r) {
    EXPECT_GT(s.features.row(r).dot(protos.row(s.gt[0].class_id)), 0.8);
  }
}

TEST(GenerateDataset, BitIdenticalForSameSeed) {
  const GenConfig cfg;
  const auto a = generate_dataset(cfg, 9, 5);
  const auto b = generate_dataset(cfg, 9, 5);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].proposals, b[i].proposals);
    EXPECT_TRUE(a[i].features == b[i].features);
    EXPECT_EQ(a[i].label, b[i].label);
  }
  const auto shifted = generate_dataset(cfg, 9, 2, 3);
  EXPECT_EQ(shifted[0].proposals, a[3].proposals);
  EXPECT_NE(generate_dataset(cfg, 10, 1)[0].proposals, a[0].proposals);
}

TEST(GenerateDataset, DefaultWorldInvariants) {
  const GenConfig cfg;
  for (const Scene& s : generate_dataset(cfg, 3, 100)) {
    ASSERT_EQ(s.proposals.size(), cfg.num_proposals);
    ASSERT_EQ(s.features.rows(), static_cast<Eigen::Index>(cfg.num_proposals));
    for (Eigen::Index r = 0; r < s.features.rows(); ++r) EXPECT_NEAR(s.features.row(r).norm(), 1.0, 1e-12);
    for (const GroundTruth& g : s.gt) {
      double best = 0.0;
      for (const BBox& p : s.proposals) best = std::max(best, iou(p, g.box));
      EXPECT_GE(best, 0.5);
      EXPECT_EQ(s.label[g.class_id], 1);
    }
    for (std::size_t c = 0; c < cfg.num_classes; ++c) {
      if (s.label[c] != 1) continue;
      EXPECT_TRUE(std::any_of(s.gt.begin(), s.gt.end(), [&](const GroundTruth& g) { return g.class_id == c; }));
    }
  }
}

TEST(GenConfig, Validation) {
  GenConfig cfg;
  cfg.clutter_rate = 1.0;
  EXPECT_THROW(cfg.validate(), InvalidInput);
  cfg = GenConfig{};
  cfg.min_objects = 4;
  EXPECT_THROW(cfg.validate(), InvalidInput);
}

TEST(Forward, ZeroModelIsUniform) {
  std::mt19937_64 rng(1);
  const Scene s = testing::random_scene(rng, 3, 5, 8);
  const ScoreSet sc = forward(ToyModel::zeros(3, 5, 2), s);
  EXPECT_TRUE(sc.class_softmax.isApprox(Matrix::Constant(3, 8, 1.0 / 3.0)));
  EXPECT_TRUE(sc.instance_softmax.isApprox(Matrix::Constant(3, 8, 1.0 / 8.0)));
  for (const Matrix& p : sc.phi) EXPECT_TRUE(p.isApprox(Matrix::Constant(4, 8, 0.25)));
}

TEST(Forward, SingleProposal) {
  std::mt19937_64 rng(2);
  const Scene s = testing::random_scene(rng, 3, 4, 1);
  const ScoreSet sc = forward(ToyModel::random(3, 4, 2, 1.0, 1), s);
  EXPECT_TRUE((sc.instance_softmax.array() == 1.0).all());
}

TEST(Forward, ScoreSetInvariants) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const Scene s = testing::random_scene(rng, 4, 6, 12);
    const ScoreSet sc = forward(ToyModel::random(4, 6, 3, 2.0, i), s);
    EXPECT_TRUE(sc.class_softmax.colwise().sum().isOnes(1e-9));
    EXPECT_TRUE(sc.instance_softmax.rowwise().sum().isOnes(1e-9));
    for (const Matrix& p : sc.phi) EXPECT_TRUE(p.colwise().sum().isOnes(1e-9));
    EXPECT_EQ(sc.branch(0), sc.phi0);
    EXPECT_EQ(sc.branch(2), sc.phi[1]);
  }
}

TEST(Gradient, ZeroWeightSupervisionGivesZeroRefinementGradients) {
  std::mt19937_64 rng(4);
  const Scene s = testing::random_scene(rng, 3, 5, 10);
  const ToyModel m = ToyModel::random(3, 5, 2, 0.5, 4);
  const ScoreSet sc = forward(m, s);
  TrainConfig cfg;
  cfg.method = Method::kBaseline;
  cfg.iterations = 10;
  SceneSupervision sup = build_supervision(sc, s, cfg.schedule_at(0), MethodFlags::of(cfg.method), 1, 0);
  for (auto& t : sup.targets)
    for (auto& it : t.instances) it.weight = 0.0;
  const ToyModel g = scene_gradient(m, s, sc, sup);
  for (const LinearHead& h : g.refine) {
    EXPECT_TRUE(h.weight.isZero(0.0));
    EXPECT_TRUE(h.bias.isZero(0.0));
  }
  // With no refinement signal the remaining gradient is the MIDN loss alone.
  const Vector analytic = flatten(g);
  ToyModel probe = m;
  Eigen::Index flat = 0;
  for (auto& block : probe.parameters()) {
    for (Eigen::Index i = 0; i < block.size(); ++i, ++flat) {
      const double saved = block[i];
      block[i] = saved + kGradCheckStep;
      const double up = scene_loss(forward(probe, s), s, sup).midn;
      block[i] = saved - kGradCheckStep;
      const double down = scene_loss(forward(probe, s), s, sup).midn;
      block[i] = saved;
      EXPECT_LE(gradient_rel_error(analytic[flat], (up - down) / (2 * kGradCheckStep)), 1e-5);
    }
  }
}

TEST(Gradient, FrozenSupervisionMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const GradCheckCase c = random_gradcheck_case(seed);
    EXPECT_LE(finite_diff_check(c.model, c.scene, c.config, c.iteration).max_rel_error, 1e-5) << "seed " << seed;
  }
}

TEST(Gradient, SupervisionWeightsCarryNoGradient) {
  // Under reweighting the weights depend on the live branch scores. The
  // analytic gradient treats them as constants, so it agrees with frozen
  // finite differences and disagrees with live ones.
  std::mt19937_64 rng(5);
  const Scene s = testing::random_scene(rng, 2, 4, 12);
  const ToyModel m = ToyModel::random(2, 4, 2, 1.0, 5);
  TrainConfig cfg;
  cfg.method = Method::kPirOnly;
  cfg.iterations = 10;
  EXPECT_LE(finite_diff_check(m, s, cfg, 0, SupervisionMode::kFrozen).max_rel_error, 1e-5);
  EXPECT_GT(finite_diff_check(m, s, cfg, 0, SupervisionMode::kLive).max_rel_error, 1e-3);
}

TrainConfig small_config(Method method) {
  TrainConfig cfg;
  cfg.method = method;
  cfg.iterations = 120;
  cfg.num_train_scenes = 16;
  cfg.data.num_proposals = 60;
  return cfg;
}

TEST(Train, BaselineNeverBalancesOrReweights) {
  const TrainConfig cfg = small_config(Method::kBaseline);
  const TrainResult r = train(cfg, generate_dataset(cfg.data, cfg.seed, cfg.num_train_scenes));
  EXPECT_EQ(r.log.balance_calls, 0u);
  EXPECT_EQ(r.log.reweight_calls, 0u);
  for (const IterationLog& row : r.log.rows) {
    EXPECT_EQ(row.neg_before, row.neg_after);
    EXPECT_EQ(row.zeta_mean, 1.0);
  }
}

TEST(Train, MethodRouting) {
  for (Method m : all_methods()) {
    const TrainConfig cfg = small_config(m);
    const TrainResult r = train(cfg, generate_dataset(cfg.data, cfg.seed, cfg.num_train_scenes));
    const MethodFlags f = MethodFlags::of(m);
    EXPECT_EQ(r.log.balance_calls > 0, f.balance) << to_string(m);
    EXPECT_EQ(r.log.reweight_calls > 0, f.reweight) << to_string(m);
  }
}

TEST(Train, DeterministicForSameSeed) {
  const TrainConfig cfg = small_config(Method::kOpis);
  const auto data = generate_dataset(cfg.data, cfg.seed, cfg.num_train_scenes);
  const TrainResult a = train(cfg, data);
  const TrainResult b = train(cfg, data);
  ASSERT_EQ(a.log.rows.size(), b.log.rows.size());
  for (std::size_t i = 0; i < a.log.rows.size(); ++i) {
    EXPECT_EQ(a.log.rows[i].loss_midn, b.log.rows[i].loss_midn);
    EXPECT_EQ(a.log.rows[i].loss_ref, b.log.rows[i].loss_ref);
    EXPECT_EQ(a.log.rows[i].neg_after, b.log.rows[i].neg_after);
  }
  EXPECT_TRUE(flatten(a.model) == flatten(b.model));
}

TEST(Train, BaselineAndPibOnlyAgreeBeforeFinetuning) {
  const TrainConfig base = small_config(Method::kBaseline);
  TrainConfig pib = base;
  pib.method = Method::kPibOnly;
  const auto data = generate_dataset(base.data, base.seed, base.num_train_scenes);
  const TrainResult a = train(base, data);
  const TrainResult b = train(pib, data);
  const std::size_t t0 = base.finetune_start();
  bool diverged = false;
  for (std::size_t i = 0; i < a.log.rows.size(); ++i) {
    const bool same = a.log.rows[i].loss_midn == b.log.rows[i].loss_midn && a.log.rows[i].loss_ref == b.log.rows[i].loss_ref;
    if (i < t0) {
      EXPECT_TRUE(same) << "iteration " << i;
    } else if (!same) {
      diverged = true;
    }
  }
  EXPECT_TRUE(diverged);
}

TEST(Train, LoggedScheduleIsContinuousAtT0) {
  const TrainConfig cfg = small_config(Method::kOpis);
  const TrainResult r = train(cfg, generate_dataset(cfg.data, cfg.seed, cfg.num_train_scenes));
  ASSERT_EQ(r.log.rows.size(), cfg.iterations);
  const std::size_t t0 = cfg.finetune_start();
  EXPECT_EQ(r.log.rows[t0 - 1].phase, Phase::kNormal);
  EXPECT_EQ(r.log.rows[t0].phase, Phase::kFinetune);
  EXPECT_EQ(r.log.rows[t0].t, 0.0);
  EXPECT_EQ(r.log.rows[t0].mu, cfg.schedule.mu_s);
  EXPECT_EQ(r.log.rows.back().t, 1.0);
  EXPECT_EQ(r.log.rows.back().mu, 4.0);
  for (const IterationLog& row : r.log.rows) {
    EXPECT_TRUE(std::isfinite(row.loss_midn));
    for (double l : row.loss_ref) EXPECT_TRUE(std::isfinite(l));
    EXPECT_LE(row.neg_after, row.neg_before);
  }
}

TEST(Train, HookSeesEveryIteration) {
  const TrainConfig cfg = small_config(Method::kPirOnly);
  std::size_t calls = 0;
  train(cfg, generate_dataset(cfg.data, cfg.seed, cfg.num_train_scenes),
        [&](const IterationLog& row, const ToyModel&) { EXPECT_EQ(row.iteration, calls++); });
  EXPECT_EQ(calls, cfg.iterations);
}

TEST(Train, DivergenceAborts) {
  TrainConfig cfg = small_config(Method::kBaseline);
  cfg.iterations = 20;
  cfg.learning_rate = 1e300;
  auto data = generate_dataset(cfg.data, cfg.seed, cfg.num_train_scenes);
  EXPECT_THROW(train(cfg, data), NumericalFailure);
  cfg.learning_rate = 0.01;
  data[3].features(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(train(cfg, data), InvalidInput);
}

TEST(TrainConfig, Validation) {
  TrainConfig cfg;
  cfg.iterations = 1;
  EXPECT_THROW(cfg.validate(), InvalidInput);
  cfg = TrainConfig{};
  cfg.finetune_fraction = 1.0;
  EXPECT_THROW(cfg.validate(), InvalidInput);
}

TEST(Method, NamesRoundTrip) {
  for (Method m : all_methods()) EXPECT_EQ(parse_method(to_string(m)), m);
  EXPECT_THROW(parse_method("oicr"), InvalidInput);
}

}  // namespace
}  // namespace opis
