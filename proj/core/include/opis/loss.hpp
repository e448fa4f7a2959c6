#pragma once

#include <cstddef>
#include <span>

#include "opis/midn_scoring.hpp"
#include "opis/pib_sampler.hpp"
#include "opis/supervision.hpp"

namespace opis {

inline constexpr double kLogClamp = 1e-12;

/// Loss rescale for a branch: 1 in the normal phase, |R| / |R_s| while
/// fine-tuning, where R_s is the branch's selected set over all classes.
double zeta(Phase phase, std::size_t n_total, std::size_t n_selected);

/// Weighted cross-entropy of one refinement branch:
///   -(1/|R|) * sum_r zeta * w_r * log phi_k[label_r, r]
double refinement_loss(const SupervisionTargets& targets, const Matrix& phi_k, double zeta);

/// Gradient of refinement_loss with respect to the pre-softmax logits. The
/// weights are constants.
Matrix refinement_loss_grad(const SupervisionTargets& targets, const Matrix& logits, double zeta);

/// MIDN loss plus the sum of the refinement losses.
double total_loss(double midn, std::span<const double> refinement);

}  // namespace opis
