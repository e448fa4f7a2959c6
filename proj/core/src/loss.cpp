#include "opis/loss.hpp"

#include <algorithm>
#include <cmath>

#include "opis/error.hpp"

namespace opis {

namespace {

void check_shape(const SupervisionTargets& targets, const Matrix& m, const char* what) {
  if (static_cast<std::size_t>(m.cols()) != targets.size() ||
      static_cast<std::size_t>(m.rows()) != targets.num_classes + 1) {
    throw InvalidInput(std::string(what) + ": shape mismatch between targets and scores");
  }
}

}  // namespace

double zeta(Phase phase, std::size_t n_total, std::size_t n_selected) {
  if (phase == Phase::kNormal) return 1.0;
  detail::require(n_selected >= 1, "zeta: fine-tune phase needs at least one selected instance");
  return static_cast<double>(n_total) / static_cast<double>(n_selected);
}

double refinement_loss(const SupervisionTargets& targets, const Matrix& phi_k, double zeta) {
  check_shape(targets, phi_k, "refinement_loss");
  if (targets.size() == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t r = 0; r < targets.size(); ++r) {
    const double w = targets.instances[r].weight;
    const auto label = targets.assigned_class(r);
    if (!label || w == 0.0) continue;
    sum += zeta * w * std::log(std::max(phi_k(*label, r), kLogClamp));
  }
  return -sum / static_cast<double>(targets.size());
}

Matrix refinement_loss_grad(const SupervisionTargets& targets, const Matrix& logits, double zeta) {
  check_shape(targets, logits, "refinement_loss_grad");
  Matrix grad = Matrix::Zero(logits.rows(), logits.cols());
  if (targets.size() == 0) return grad;
  const Matrix probs = softmax_over_classes(logits);
  const double n = static_cast<double>(targets.size());
  for (std::size_t r = 0; r < targets.size(); ++r) {
    const double w = targets.instances[r].weight;
    const auto label = targets.assigned_class(r);
    if (!label || w == 0.0) continue;
    const double scale = zeta * w / n;
    grad.col(r) = scale * probs.col(r);
    grad(*label, r) -= scale;
  }
  return grad;
}

double total_loss(double midn, std::span<const double> refinement) {
  detail::require(!refinement.empty(), "total_loss: at least one refinement branch is required");
  double total = midn;
  for (double l : refinement) total += l;
  return total;
}

}  // namespace opis
