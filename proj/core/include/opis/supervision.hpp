#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "opis/geometry.hpp"
#include "opis/midn_scoring.hpp"

namespace opis {

/// Default IoU thresholds for label assignment.
inline constexpr double kDefaultIgnoreIou = 0.1;
inline constexpr double kDefaultPositiveIou = 0.5;

/// The top-scoring proposal of a present class under the previous branch.
struct ClusterCenter {
  std::size_t class_id = 0;
  std::size_t proposal = 0;
  double score = 0.0;  ///< previous-branch score of the center for its class
};

enum class InstanceStatus { kIgnored, kPositive, kNegative };

struct InstanceTarget {
  InstanceStatus status = InstanceStatus::kIgnored;
  std::size_t source_class = 0;  ///< class of the center attaining max_iou
  double max_iou = 0.0;
  double weight = 0.0;
  bool selected = false;
};

/// Per-proposal pseudo labels and loss weights for one refinement branch.
struct SupervisionTargets {
  std::size_t num_classes = 0;  ///< C; the background label is C
  std::vector<InstanceTarget> instances;

  /// Label index in [0, C] (C = background), or nullopt when ignored.
  std::optional<std::size_t> assigned_class(std::size_t r) const;
  std::size_t size() const { return instances.size(); }
  std::size_t count(InstanceStatus s) const;
  std::size_t selected_count() const;
};

/// Positives and negatives grouped by the class of their source center.
struct ClusterAssignment {
  std::vector<ClusterCenter> centers;
  std::vector<std::vector<std::size_t>> positives;  ///< indexed by class
  std::vector<std::vector<std::size_t>> negatives;  ///< indexed by class

  const ClusterCenter* center_of(std::size_t class_id) const;
};

/// Argmax over proposals of the previous-branch score, for each present
/// class. Ties go to the lowest proposal index. Result ordered by class.
std::vector<ClusterCenter> select_cluster_centers(const Matrix& phi_prev, const ImageLabel& label);

/// Highest IoU between `proposal` and any center, and the class of that
/// center (ties: lower class id).
std::pair<double, std::size_t> max_iou_source(const BBox& proposal, std::span<const ClusterCenter> centers,
                                              std::span<const BBox> proposals);

/// Three-way labelling: I >= positive_iou is positive for the source class,
/// I <= ignore_iou is ignored, anything between is background. Labelled
/// proposals get the source center's score as weight.
std::pair<SupervisionTargets, ClusterAssignment> assign_labels(std::span<const ClusterCenter> centers,
                                                               std::span<const BBox> proposals,
                                                               std::size_t num_classes, double ignore_iou,
                                                               double positive_iou);

}  // namespace opis
