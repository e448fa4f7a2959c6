#pragma once

#include <span>

#include "opis/midn_scoring.hpp"
#include "opis/pib_sampler.hpp"
#include "opis/supervision.hpp"

namespace opis {

/// Positive weight boosted by the current branch's own score and the IoU
/// to the cluster center:
///   (beta * e^score + (1 - beta) * e^iou) * center_score
double reweight_normal(double score, double iou, double beta, double center_score);

/// reweight_normal scaled by e^(-gamma * t). Bitwise equal to it at t = 0.
double reweight_attenuated(double score, double iou, double beta, double center_score, double gamma, double t);

/// Applies the phase's reweighting to every selected positive; negatives and
/// ignored proposals are left as they are. `phi_k` is the current branch's
/// live score matrix and centers carry the previous-branch scores.
SupervisionTargets reweight_branch(const SupervisionTargets& targets, const Matrix& phi_k,
                                   std::span<const ClusterCenter> centers, const ScheduleState& schedule,
                                   Phase phase);

}  // namespace opis
