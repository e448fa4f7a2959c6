#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "opis/model.hpp"
#include "opis/pib_sampler.hpp"
#include "opis/synthetic.hpp"

namespace opis {

/// Which parts of the supervision pipeline a run enables.
///   baseline  plain cluster-center labels and weights throughout
///   pib_only  adds instance balancing in the fine-tune phase
///   pir_only  non-attenuated positive reweighting in both phases
///   opis      reweighting in phase 1; balancing plus attenuated
///             reweighting in phase 2
enum class Method { kBaseline, kPibOnly, kPirOnly, kOpis };

std::string to_string(Method m);
Method parse_method(const std::string& name);
const std::vector<Method>& all_methods();

struct MethodFlags {
  bool balance = false;        ///< instance balancing while fine-tuning
  bool reweight = false;       ///< positive reweighting
  bool attenuate = false;      ///< attenuated reweighting while fine-tuning

  static MethodFlags of(Method m);
};

struct TrainConfig {
  std::uint64_t seed = 1;
  Method method = Method::kOpis;
  std::size_t num_train_scenes = 200;
  std::size_t batch_size = 2;
  std::size_t iterations = 4000;
  double finetune_fraction = 0.78;  ///< T_0 = floor(fraction * iterations)
  double learning_rate = 0.01;
  double lr_decay = 0.1;  ///< multiplier applied from T_0 on
  double momentum = 0.9;
  double weight_decay = 0.0005;
  std::size_t num_refinements = 3;
  double init_std = 0.01;
  ScheduleState schedule;  ///< hyperparameters; the counters are set per iteration
  GenConfig data;

  std::size_t finetune_start() const;
  std::size_t final_iteration() const { return iterations - 1; }
  /// Schedule with counters filled in for `iteration`.
  ScheduleState schedule_at(std::size_t iteration) const;
  void validate() const;
};

struct IterationLog {
  std::size_t iteration = 0;
  Phase phase = Phase::kNormal;
  double t = 0.0;
  double mu = 0.0;
  double zeta_mean = 1.0;
  double loss_midn = 0.0;
  std::vector<double> loss_ref;
  std::size_t pos_count = 0;
  std::size_t neg_before = 0;
  std::size_t neg_after = 0;
  double wallclock_ms = 0.0;
};

struct TrainLog {
  std::vector<IterationLog> rows;
  std::size_t balance_calls = 0;
  std::size_t reweight_calls = 0;
};

struct SupervisionStats {
  std::size_t pos_count = 0;
  std::size_t neg_before = 0;
  std::size_t neg_after = 0;
  std::size_t balance_calls = 0;
  std::size_t reweight_calls = 0;
};

/// Builds every branch's targets for one scene: cluster centers from the
/// previous branch, three-way labels, then balancing and reweighting as the
/// method and phase dictate. `scene_id` keys the sampler streams.
SceneSupervision build_supervision(const ScoreSet& scores, const Scene& scene, const ScheduleState& schedule,
                                   MethodFlags flags, std::uint64_t seed, std::uint64_t scene_id,
                                   SupervisionStats* stats = nullptr);

struct TrainResult {
  ToyModel model;
  TrainLog log;
};

/// Called after every iteration; used by tests to inspect intermediate state.
using IterationHook = std::function<void(const IterationLog&, const ToyModel&)>;

/// Two-phase SGD with momentum and weight decay over `dataset`. Throws
/// NumericalFailure when a loss turns non-finite.
TrainResult train(const TrainConfig& config, const std::vector<Scene>& dataset,
                  const IterationHook& hook = nullptr);

}  // namespace opis
