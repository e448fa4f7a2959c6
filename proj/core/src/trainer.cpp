#include "opis/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "opis/error.hpp"
#include "opis/loss.hpp"
#include "opis/reweighting.hpp"

namespace opis {

std::string to_string(Method m) {
  switch (m) {
    case Method::kBaseline:
      return "baseline";
    case Method::kPibOnly:
      return "pib_only";
    case Method::kPirOnly:
      return "pir_only";
    case Method::kOpis:
      return "opis";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (Method m : all_methods()) {
    if (to_string(m) == name) return m;
  }
  throw InvalidInput("unknown method '" + name + "' (expected baseline, pib_only, pir_only or opis)");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods = {Method::kBaseline, Method::kPibOnly, Method::kPirOnly, Method::kOpis};
  return methods;
}

MethodFlags MethodFlags::of(Method m) {
  switch (m) {
    case Method::kBaseline:
      return {false, false, false};
    case Method::kPibOnly:
      return {true, false, false};
    case Method::kPirOnly:
      return {false, true, false};
    case Method::kOpis:
      return {true, true, true};
  }
  return {};
}

std::size_t TrainConfig::finetune_start() const {
  return static_cast<std::size_t>(std::floor(finetune_fraction * static_cast<double>(iterations)));
}

ScheduleState TrainConfig::schedule_at(std::size_t iteration) const {
  ScheduleState s = schedule;
  s.iteration = iteration;
  s.finetune_start = finetune_start();
  s.final_iteration = final_iteration();
  return s;
}

void TrainConfig::validate() const {
  data.validate();
  detail::require(iterations >= 2, "train: iterations must be >= 2");
  detail::require(batch_size >= 1, "train: batch_size must be >= 1");
  detail::require(num_train_scenes >= 1, "data: train_scenes must be >= 1");
  detail::require(num_refinements >= 1, "model: refinements must be >= 1");
  detail::require(0.0 < finetune_fraction && finetune_fraction < 1.0,
                  "schedule: finetune_fraction must lie in (0, 1)");
  detail::require(finetune_start() < final_iteration(), "schedule: fine-tuning window is empty");
  detail::require(learning_rate > 0.0 && lr_decay > 0.0, "schedule: learning_rate and lr_decay must be > 0");
  detail::require(momentum >= 0.0 && momentum < 1.0, "schedule: momentum must lie in [0, 1)");
  detail::require(weight_decay >= 0.0, "schedule: weight_decay must be >= 0");
  detail::require(init_std >= 0.0, "model: init_std must be >= 0");
  schedule_at(0).validate();
}

SceneSupervision build_supervision(const ScoreSet& scores, const Scene& scene, const ScheduleState& schedule,
                                   MethodFlags flags, std::uint64_t seed, std::uint64_t scene_id,
                                   SupervisionStats* stats) {
  const Phase phase = schedule.phase();
  const bool balancing = flags.balance && phase == Phase::kFinetune;
  const Phase reweight_phase = flags.attenuate && phase == Phase::kFinetune ? Phase::kFinetune : Phase::kNormal;
  const std::size_t n_props = scene.proposals.size();

  SceneSupervision sup;
  SupervisionStats local;
  for (std::size_t k = 1; k <= scores.phi.size(); ++k) {
    const Matrix& phi_prev = scores.branch(k - 1);
    const std::vector<ClusterCenter> centers = select_cluster_centers(phi_prev, scene.label);
    auto [targets, assignment] = assign_labels(centers, scene.proposals, scores.num_classes(),
                                               schedule.ignore_iou, schedule.positive_iou);
    local.neg_before += targets.count(InstanceStatus::kNegative);

    if (balancing) {
      SamplerRng rng{seed, scene_id, schedule.iteration, k, 0};
      targets = progressive_instance_balance(targets, assignment, phi_prev, schedule, rng).targets;
      ++local.balance_calls;
    }
    if (flags.reweight) {
      targets = reweight_branch(targets, scores.phi[k - 1], centers, schedule, reweight_phase);
      ++local.reweight_calls;
    }

    for (const InstanceTarget& t : targets.instances) {
      if (!t.selected) continue;
      if (t.status == InstanceStatus::kPositive) ++local.pos_count;
      if (t.status == InstanceStatus::kNegative) ++local.neg_after;
    }
    sup.zetas.push_back(zeta(balancing ? Phase::kFinetune : Phase::kNormal, n_props, targets.selected_count()));
    sup.targets.push_back(std::move(targets));
  }

  if (stats != nullptr) {
    stats->pos_count += local.pos_count;
    stats->neg_before += local.neg_before;
    stats->neg_after += local.neg_after;
    stats->balance_calls += local.balance_calls;
    stats->reweight_calls += local.reweight_calls;
  }
  return sup;
}

namespace {

/// Mini-batch composition: each epoch visits the dataset in a fresh
/// permutation drawn from its own stream.
class BatchOrder {
 public:
  BatchOrder(std::uint64_t seed, std::size_t dataset_size) : seed_(seed), size_(dataset_size) {}

  std::size_t at(std::size_t position) {
    const std::size_t epoch = position / size_;
    if (!perm_ || epoch != epoch_) {
      perm_.emplace(size_);
      std::iota(perm_->begin(), perm_->end(), std::size_t{0});
      Engine rng = make_engine(seed_, StreamTag::kBatchOrder, {epoch});
      std::shuffle(perm_->begin(), perm_->end(), rng);
      epoch_ = epoch;
    }
    return (*perm_)[position % size_];
  }

 private:
  std::uint64_t seed_;
  std::size_t size_;
  std::size_t epoch_ = 0;
  std::optional<std::vector<std::size_t>> perm_;
};

bool all_finite(const ToyModel& m) {
  for (const auto& p : m.parameters()) {
    if (!p.allFinite()) return false;
  }
  return true;
}

[[noreturn]] void abort_numerical(std::size_t iteration, std::size_t scene_id, const LossBreakdown& loss,
                                  const char* what) {
  std::ostringstream os;
  os << "non-finite " << what << " at iteration " << iteration << " (scene " << scene_id
     << "): loss_midn=" << loss.midn;
  for (std::size_t k = 0; k < loss.refine.size(); ++k) os << " loss_ref_" << k + 1 << "=" << loss.refine[k];
  throw NumericalFailure(os.str());
}

}  // namespace

TrainResult train(const TrainConfig& config, const std::vector<Scene>& dataset, const IterationHook& hook) {
  config.validate();
  detail::require(!dataset.empty(), "train: dataset is empty");
  for (const Scene& s : dataset) detail::require(s.features.allFinite(), "train: scene features must be finite");

  const std::size_t n_classes = config.data.num_classes;
  const std::size_t n_ref = config.num_refinements;
  const MethodFlags flags = MethodFlags::of(config.method);

  TrainResult result{ToyModel::random(n_classes, config.data.feature_dim, n_ref, config.init_std, config.seed), {}};
  ToyModel& model = result.model;
  ToyModel velocity = ToyModel::zeros(n_classes, config.data.feature_dim, n_ref);
  BatchOrder order(config.seed, dataset.size());
  const double inv_batch = 1.0 / static_cast<double>(config.batch_size);

  for (std::size_t it = 0; it < config.iterations; ++it) {
    const auto t_start = std::chrono::steady_clock::now();
    const ScheduleState schedule = config.schedule_at(it);

    IterationLog row;
    row.iteration = it;
    row.phase = schedule.phase();
    row.t = schedule.progress();
    row.mu = schedule.ratio();
    row.loss_ref.assign(n_ref, 0.0);
    row.zeta_mean = 0.0;

    ToyModel grad = ToyModel::zeros(n_classes, config.data.feature_dim, n_ref);
    SupervisionStats stats;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const std::size_t scene_id = order.at(it * config.batch_size + b);
      const Scene& scene = dataset[scene_id];
      ScoreSet scores;
      try {
        scores = forward(model, scene);
      } catch (const InvalidInput& e) {
        // Inputs were checked above, so a failed forward means the logits overflowed.
        throw NumericalFailure("iteration " + std::to_string(it) + " (scene " + std::to_string(scene_id) +
                               "): " + e.what());
      }
      const SceneSupervision sup = build_supervision(scores, scene, schedule, flags, config.seed, scene_id, &stats);
      const LossBreakdown loss = scene_loss(scores, scene, sup);
      if (!std::isfinite(loss.total)) abort_numerical(it, scene_id, loss, "loss");

      const ToyModel g = scene_gradient(model, scene, scores, sup);
      auto dst = grad.parameters();
      const auto src = g.parameters();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += inv_batch * src[i];

      row.loss_midn += inv_batch * loss.midn;
      for (std::size_t k = 0; k < n_ref; ++k) row.loss_ref[k] += inv_batch * loss.refine[k];
      for (double z : sup.zetas) row.zeta_mean += z;
    }
    if (!all_finite(grad)) {
      LossBreakdown snapshot{row.loss_midn, row.loss_ref, 0.0};
      abort_numerical(it, order.at(it * config.batch_size), snapshot, "gradient");
    }
    row.zeta_mean /= static_cast<double>(config.batch_size * n_ref);
    row.pos_count = stats.pos_count;
    row.neg_before = stats.neg_before;
    row.neg_after = stats.neg_after;
    result.log.balance_calls += stats.balance_calls;
    result.log.reweight_calls += stats.reweight_calls;

    const double lr = it < schedule.finetune_start ? config.learning_rate : config.learning_rate * config.lr_decay;
    auto params = model.parameters();
    auto vel = velocity.parameters();
    const auto grads = grad.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      vel[i] = config.momentum * vel[i] + grads[i] + config.weight_decay * params[i];
      params[i] -= lr * vel[i];
    }
    if (!all_finite(model)) {
      LossBreakdown snapshot{row.loss_midn, row.loss_ref, 0.0};
      abort_numerical(it, order.at(it * config.batch_size), snapshot, "parameter update");
    }

    row.wallclock_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start).count();
    if (hook) hook(row, model);
    result.log.rows.push_back(std::move(row));
  }
  return result;
}

}  // namespace opis
