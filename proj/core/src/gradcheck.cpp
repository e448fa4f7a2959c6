#include "opis/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace opis {

namespace {

SceneSupervision supervise(const ToyModel& model, const Scene& scene, const TrainConfig& config,
                           std::size_t iteration) {
  const ScoreSet scores = forward(model, scene);
  return build_supervision(scores, scene, config.schedule_at(iteration), MethodFlags::of(config.method),
                           config.seed, 0);
}

double loss_at(const ToyModel& model, const Scene& scene, const TrainConfig& config, std::size_t iteration,
               const SceneSupervision* frozen) {
  const ScoreSet scores = forward(model, scene);
  if (frozen != nullptr) return scene_loss(scores, scene, *frozen).total;
  const SceneSupervision live = build_supervision(scores, scene, config.schedule_at(iteration),
                                                  MethodFlags::of(config.method), config.seed, 0);
  return scene_loss(scores, scene, live).total;
}

}  // namespace

double gradient_rel_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

Vector flatten(const ToyModel& model) {
  Vector out(static_cast<Eigen::Index>(model.parameter_count()));
  Eigen::Index offset = 0;
  for (const auto& p : model.parameters()) {
    out.segment(offset, p.size()) = p;
    offset += p.size();
  }
  return out;
}

Vector numeric_gradient(const ToyModel& model, const Scene& scene, const TrainConfig& config,
                        std::size_t iteration, SupervisionMode mode, double h) {
  const SceneSupervision frozen = supervise(model, scene, config, iteration);
  const SceneSupervision* fixed = mode == SupervisionMode::kFrozen ? &frozen : nullptr;

  ToyModel probe = model;
  Vector out(static_cast<Eigen::Index>(model.parameter_count()));
  Eigen::Index flat = 0;
  auto blocks = probe.parameters();
  for (auto& block : blocks) {
    for (Eigen::Index i = 0; i < block.size(); ++i, ++flat) {
      const double saved = block[i];
      block[i] = saved + h;
      const double up = loss_at(probe, scene, config, iteration, fixed);
      block[i] = saved - h;
      const double down = loss_at(probe, scene, config, iteration, fixed);
      block[i] = saved;
      out[flat] = (up - down) / (2.0 * h);
    }
  }
  return out;
}

GradCheckResult finite_diff_check(const ToyModel& model, const Scene& scene, const TrainConfig& config,
                                  std::size_t iteration, SupervisionMode mode, double h) {
  const ScoreSet scores = forward(model, scene);
  const SceneSupervision sup = supervise(model, scene, config, iteration);
  const Vector analytic = flatten(scene_gradient(model, scene, scores, sup));
  const Vector numeric = numeric_gradient(model, scene, config, iteration, mode, h);

  GradCheckResult result;
  result.parameters = static_cast<std::size_t>(analytic.size());
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double rel = gradient_rel_error(analytic[i], numeric[i]);
    result.max_abs_error = std::max(result.max_abs_error, std::abs(analytic[i] - numeric[i]));
    if (rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_index = static_cast<std::size_t>(i);
    }
  }
  return result;
}

GradCheckCase random_gradcheck_case(std::uint64_t seed) {
  Engine rng(seed);
  std::uniform_int_distribution<std::size_t> classes(2, 5);
  std::uniform_int_distribution<std::size_t> dims(3, 8);
  std::uniform_int_distribution<std::size_t> props(5, 30);
  std::uniform_int_distribution<std::size_t> method(0, all_methods().size() - 1);

  GradCheckCase c;
  c.config.seed = seed;
  c.config.data.num_classes = classes(rng);
  c.config.data.feature_dim = dims(rng);
  c.config.data.num_proposals = props(rng);
  c.config.data.max_objects = 2;
  c.config.method = all_methods()[method(rng)];
  c.config.iterations = 100;
  c.config.num_refinements = 3;
  std::uniform_int_distribution<std::size_t> when(0, c.config.final_iteration());
  c.iteration = when(rng);

  const Matrix protos = make_prototypes(c.config.data, seed);
  c.scene = generate_scene(c.config.data, protos, rng);
  c.model = ToyModel::random(c.config.data.num_classes, c.config.data.feature_dim, c.config.num_refinements, 0.5,
                             seed);
  std::normal_distribution<double> bias(0.0, 0.5);
  for (auto* head : {&c.model.cls, &c.model.det}) {
    for (Eigen::Index i = 0; i < head->bias.size(); ++i) head->bias[i] = bias(rng);
  }
  for (auto& head : c.model.refine) {
    for (Eigen::Index i = 0; i < head.bias.size(); ++i) head.bias[i] = bias(rng);
  }
  return c;
}

}  // namespace opis
