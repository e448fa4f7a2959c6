#include "opis/supervision.hpp"

#include <algorithm>

#include "opis/error.hpp"

namespace opis {

std::optional<std::size_t> SupervisionTargets::assigned_class(std::size_t r) const {
  const InstanceTarget& t = instances.at(r);
  switch (t.status) {
    case InstanceStatus::kPositive:
      return t.source_class;
    case InstanceStatus::kNegative:
      return num_classes;
    case InstanceStatus::kIgnored:
      break;
  }
  return std::nullopt;
}

std::size_t SupervisionTargets::count(InstanceStatus s) const {
  return static_cast<std::size_t>(
      std::count_if(instances.begin(), instances.end(), [s](const InstanceTarget& t) { return t.status == s; }));
}

std::size_t SupervisionTargets::selected_count() const {
  return static_cast<std::size_t>(
      std::count_if(instances.begin(), instances.end(), [](const InstanceTarget& t) { return t.selected; }));
}

const ClusterCenter* ClusterAssignment::center_of(std::size_t class_id) const {
  for (const ClusterCenter& c : centers) {
    if (c.class_id == class_id) return &c;
  }
  return nullptr;
}

std::vector<ClusterCenter> select_cluster_centers(const Matrix& phi_prev, const ImageLabel& label) {
  detail::require(phi_prev.cols() > 0, "select_cluster_centers: empty proposal set");
  detail::require(static_cast<std::size_t>(phi_prev.rows()) >= label.size(),
                  "select_cluster_centers: score matrix has fewer rows than classes");
  detail::require(std::find(label.begin(), label.end(), 1) != label.end(),
                  "select_cluster_centers: label has no positive class");

  std::vector<ClusterCenter> centers;
  for (std::size_t c = 0; c < label.size(); ++c) {
    if (label[c] != 1) continue;
    Eigen::Index best = 0;
    for (Eigen::Index r = 1; r < phi_prev.cols(); ++r) {
      if (phi_prev(c, r) > phi_prev(c, best)) best = r;
    }
    centers.push_back({c, static_cast<std::size_t>(best), phi_prev(c, best)});
  }
  return centers;
}

std::pair<double, std::size_t> max_iou_source(const BBox& proposal, std::span<const ClusterCenter> centers,
                                              std::span<const BBox> proposals) {
  detail::require(!centers.empty(), "max_iou_source: no cluster centers");
  double best_iou = -1.0;
  std::size_t best_class = 0;
  for (const ClusterCenter& c : centers) {
    const double v = iou(proposal, proposals[c.proposal]);
    if (v > best_iou || (v == best_iou && c.class_id < best_class)) {
      best_iou = v;
      best_class = c.class_id;
    }
  }
  return {best_iou, best_class};
}

std::pair<SupervisionTargets, ClusterAssignment> assign_labels(std::span<const ClusterCenter> centers,
                                                               std::span<const BBox> proposals,
                                                               std::size_t num_classes, double ignore_iou,
                                                               double positive_iou) {
  detail::require(0.0 <= ignore_iou && ignore_iou < positive_iou && positive_iou <= 1.0,
                  "assign_labels: thresholds must satisfy 0 <= ignore < positive <= 1");
  for (const ClusterCenter& c : centers) {
    detail::require(c.class_id < num_classes, "assign_labels: center class out of range");
    detail::require(c.proposal < proposals.size(), "assign_labels: center index out of range");
  }

  SupervisionTargets targets;
  targets.num_classes = num_classes;
  targets.instances.resize(proposals.size());

  ClusterAssignment assignment;
  assignment.centers.assign(centers.begin(), centers.end());
  assignment.positives.resize(num_classes);
  assignment.negatives.resize(num_classes);
  if (centers.empty()) return {std::move(targets), std::move(assignment)};

  std::vector<double> center_score(num_classes, 0.0);
  for (const ClusterCenter& c : centers) center_score[c.class_id] = c.score;

  for (std::size_t r = 0; r < proposals.size(); ++r) {
    auto [max_iou, source] = max_iou_source(proposals[r], centers, proposals);
    InstanceTarget& t = targets.instances[r];
    t.max_iou = max_iou;
    t.source_class = source;
    if (max_iou >= positive_iou) {
      t.status = InstanceStatus::kPositive;
      t.weight = center_score[source];
      t.selected = true;
      assignment.positives[source].push_back(r);
    } else if (max_iou <= ignore_iou) {
      t.status = InstanceStatus::kIgnored;
      t.weight = 0.0;
      t.selected = false;
    } else {
      t.status = InstanceStatus::kNegative;
      t.weight = center_score[source];
      t.selected = true;
      assignment.negatives[source].push_back(r);
    }
  }
  return {std::move(targets), std::move(assignment)};
}

}  // namespace opis
