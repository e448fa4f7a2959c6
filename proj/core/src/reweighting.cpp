#include "opis/reweighting.hpp"

#include <cmath>
#include <vector>

#include "opis/error.hpp"

namespace opis {

namespace {

bool unit(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

double reweight_normal(double score, double iou, double beta, double center_score) {
  detail::require(unit(score) && unit(iou) && unit(beta) && unit(center_score),
                  "reweight_normal: inputs must lie in [0, 1]");
  return (beta * std::exp(score) + (1.0 - beta) * std::exp(iou)) * center_score;
}

double reweight_attenuated(double score, double iou, double beta, double center_score, double gamma, double t) {
  detail::require(gamma >= 0.0, "reweight_attenuated: gamma must be >= 0");
  detail::require(unit(t), "reweight_attenuated: T must lie in [0, 1]");
  return std::exp(-gamma * t) * reweight_normal(score, iou, beta, center_score);
}

SupervisionTargets reweight_branch(const SupervisionTargets& targets, const Matrix& phi_k,
                                   std::span<const ClusterCenter> centers, const ScheduleState& schedule,
                                   Phase phase) {
  detail::require(static_cast<std::size_t>(phi_k.cols()) == targets.size(), "reweight_branch: shape mismatch");

  std::vector<const ClusterCenter*> by_class(targets.num_classes, nullptr);
  for (const ClusterCenter& c : centers) by_class.at(c.class_id) = &c;

  const double t = phase == Phase::kFinetune ? schedule.progress() : 0.0;
  SupervisionTargets out = targets;
  for (std::size_t r = 0; r < out.size(); ++r) {
    InstanceTarget& inst = out.instances[r];
    if (inst.status != InstanceStatus::kPositive || !inst.selected) continue;
    const ClusterCenter* center = by_class[inst.source_class];
    if (center == nullptr) throw InternalError("reweight_branch: positive without a cluster center");
    const double score = phi_k(inst.source_class, r);
    inst.weight = phase == Phase::kFinetune
                      ? reweight_attenuated(score, inst.max_iou, schedule.beta, center->score, schedule.gamma, t)
                      : reweight_normal(score, inst.max_iou, schedule.beta, center->score);
  }
  return out;
}

}  // namespace opis
