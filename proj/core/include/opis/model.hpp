#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "opis/midn_scoring.hpp"
#include "opis/supervision.hpp"
#include "opis/synthetic.hpp"

namespace opis {

struct LinearHead {
  Matrix weight;  ///< out x D
  Vector bias;    ///< out

  /// weight * features^T + bias, i.e. out x P.
  Matrix apply(const Matrix& features) const;
};

/// Linear stand-in for the detector: two MIDN streams and K refinement
/// heads, all reading the same fixed proposal features.
struct ToyModel {
  LinearHead cls;                  ///< C x D
  LinearHead det;                  ///< C x D
  std::vector<LinearHead> refine;  ///< K heads, (C+1) x D

  std::size_t num_classes() const { return static_cast<std::size_t>(cls.weight.rows()); }
  std::size_t feature_dim() const { return static_cast<std::size_t>(cls.weight.cols()); }
  std::size_t num_refinements() const { return refine.size(); }
  std::size_t parameter_count() const;

  /// Every parameter block (weights and biases of all heads), in a fixed order.
  std::vector<Eigen::Map<Vector>> parameters();
  std::vector<Eigen::Map<const Vector>> parameters() const;

  static ToyModel zeros(std::size_t num_classes, std::size_t feature_dim, std::size_t num_refinements);
  /// Weights from N(0, init_std^2), zero biases.
  static ToyModel random(std::size_t num_classes, std::size_t feature_dim, std::size_t num_refinements,
                         double init_std, std::uint64_t seed);
};

ScoreSet forward(const ToyModel& model, const Scene& scene);

/// Labels, weights and loss scale for every refinement branch of a scene.
struct SceneSupervision {
  std::vector<SupervisionTargets> targets;  ///< K entries, branch k+1 at index k
  std::vector<double> zetas;                ///< K entries
};

struct LossBreakdown {
  double midn = 0.0;
  std::vector<double> refine;
  double total = 0.0;
};

LossBreakdown scene_loss(const ScoreSet& scores, const Scene& scene, const SceneSupervision& sup);

/// Analytic gradient of scene_loss with respect to every model parameter,
/// with the supervision held constant. Returned in the model's own shape.
ToyModel scene_gradient(const ToyModel& model, const Scene& scene, const ScoreSet& scores,
                        const SceneSupervision& sup);

}  // namespace opis
