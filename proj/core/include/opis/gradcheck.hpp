#pragma once

#include <cstdint>

#include "opis/model.hpp"
#include "opis/trainer.hpp"

namespace opis {

inline constexpr double kGradCheckStep = 1e-6;
/// Denominator floor of the relative error, so that components whose true
/// gradient is ~0 are compared on an absolute scale.
inline constexpr double kGradCheckFloor = 1e-4;

enum class SupervisionMode {
  kFrozen,  ///< targets built once at the unperturbed parameters
  kLive,    ///< targets rebuilt at every perturbed point
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t parameters = 0;
  std::size_t worst_index = 0;  ///< flat index of the worst parameter
};

/// Relative discrepancy used by the check: |a - n| / max(|a|, |n|, floor).
double gradient_rel_error(double analytic, double numeric, double floor = kGradCheckFloor);

/// Compares the analytic gradient of the scene loss against central
/// differences with step h on every parameter. Supervision is built with
/// the schedule at `iteration` of `config`.
GradCheckResult finite_diff_check(const ToyModel& model, const Scene& scene, const TrainConfig& config,
                                  std::size_t iteration = 0, SupervisionMode mode = SupervisionMode::kFrozen,
                                  double h = kGradCheckStep);

/// Finite-difference gradient of the scene loss, flattened in
/// ToyModel::parameters() order.
Vector numeric_gradient(const ToyModel& model, const Scene& scene, const TrainConfig& config,
                        std::size_t iteration, SupervisionMode mode, double h = kGradCheckStep);

/// A randomly sized model, scene and schedule point for gradient checks:
/// 2-5 classes, 5-30 proposals, any method, either phase.
struct GradCheckCase {
  ToyModel model;
  Scene scene;
  TrainConfig config;
  std::size_t iteration = 0;
};

GradCheckCase random_gradcheck_case(std::uint64_t seed);

/// A ToyModel flattened in ToyModel::parameters() order.
Vector flatten(const ToyModel& model);

}  // namespace opis
