#pragma once

#include <Eigen/Dense>
#include <vector>

namespace opis {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Image-level label: entry c is 1 when class c is present.
using ImageLabel = std::vector<int>;

/// Clamp applied to image-level scores before the log in the MIDN loss.
inline constexpr double kMidnClampEps = 1e-7;

/// All score matrices produced by one forward pass over a scene. Rows are
/// classes, columns are proposals.
struct ScoreSet {
  Matrix x_cls;            ///< C x R classification-stream logits
  Matrix x_det;            ///< C x R detection-stream logits
  Matrix class_softmax;    ///< softmax of x_cls over classes (columns sum to 1)
  Matrix instance_softmax; ///< softmax of x_det over proposals (rows sum to 1)
  Matrix x_r;              ///< C x R composed instance scores
  Vector image_scores;     ///< y', length C, unclamped
  Matrix phi0;             ///< (C+1) x R supervision source for the first refinement
  std::vector<Matrix> refine_logits;  ///< K matrices, (C+1) x R
  std::vector<Matrix> phi;            ///< K matrices, per-column softmax of refine_logits

  /// Scores of refinement branch k, with k = 0 meaning phi0.
  const Matrix& branch(std::size_t k) const { return k == 0 ? phi0 : phi[k - 1]; }
  std::size_t num_classes() const { return static_cast<std::size_t>(x_cls.rows()); }
  std::size_t num_proposals() const { return static_cast<std::size_t>(x_cls.cols()); }
};

Matrix softmax_over_classes(const Matrix& logits);
Matrix softmax_over_instances(const Matrix& logits);

/// Element-wise product of the two softmax streams.
Matrix compose_instance_scores(const Matrix& class_softmax, const Matrix& instance_softmax);

/// Row sums of the composed scores.
Vector image_scores(const Matrix& x_r);

/// Builds phi0 from the composed MIDN scores: foreground rows copied, the
/// background row zero, no renormalisation.
Matrix make_phi0(const Matrix& x_r);

/// Binary cross-entropy summed over classes, on predictions clamped into
/// [kMidnClampEps, 1 - kMidnClampEps].
double midn_loss(const Vector& y_pred, const ImageLabel& y_true);

/// d(midn_loss)/d(y_pred) evaluated on the clamped prediction.
Vector midn_loss_grad(const Vector& y_pred, const ImageLabel& y_true);

}  // namespace opis
