#include "opis/midn_scoring.hpp"

#include <algorithm>
#include <cmath>

#include "opis/error.hpp"

namespace opis {

namespace {

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw InvalidInput(std::string(what) + ": non-finite input");
}

double clamp_pred(double p) { return std::clamp(p, kMidnClampEps, 1.0 - kMidnClampEps); }

void check_label(const Vector& y_pred, const ImageLabel& y_true) {
  if (static_cast<std::size_t>(y_pred.size()) != y_true.size()) {
    throw InvalidInput("midn loss: prediction and label lengths differ");
  }
  for (int y : y_true) {
    if (y != 0 && y != 1) throw InvalidInput("midn loss: labels must be 0 or 1");
  }
}

}  // namespace

Matrix softmax_over_classes(const Matrix& logits) {
  require_finite(logits, "softmax_over_classes");
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.cols(); ++r) {
    const double m = logits.col(r).maxCoeff();
    out.col(r) = (logits.col(r).array() - m).exp();
    out.col(r) /= out.col(r).sum();
  }
  return out;
}

Matrix softmax_over_instances(const Matrix& logits) {
  require_finite(logits, "softmax_over_instances");
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.rows(); ++c) {
    const double m = logits.row(c).maxCoeff();
    out.row(c) = (logits.row(c).array() - m).exp();
    out.row(c) /= out.row(c).sum();
  }
  return out;
}

Matrix compose_instance_scores(const Matrix& class_softmax, const Matrix& instance_softmax) {
  if (class_softmax.rows() != instance_softmax.rows() || class_softmax.cols() != instance_softmax.cols()) {
    throw InvalidInput("compose_instance_scores: shape mismatch");
  }
  return class_softmax.cwiseProduct(instance_softmax);
}

Vector image_scores(const Matrix& x_r) { return x_r.rowwise().sum(); }

Matrix make_phi0(const Matrix& x_r) {
  Matrix phi0 = Matrix::Zero(x_r.rows() + 1, x_r.cols());
  phi0.topRows(x_r.rows()) = x_r;
  return phi0;
}

double midn_loss(const Vector& y_pred, const ImageLabel& y_true) {
  check_label(y_pred, y_true);
  double loss = 0.0;
  for (Eigen::Index c = 0; c < y_pred.size(); ++c) {
    const double p = clamp_pred(y_pred[c]);
    loss -= y_true[c] == 1 ? std::log(p) : std::log(1.0 - p);
  }
  return loss;
}

Vector midn_loss_grad(const Vector& y_pred, const ImageLabel& y_true) {
  check_label(y_pred, y_true);
  Vector g(y_pred.size());
  for (Eigen::Index c = 0; c < y_pred.size(); ++c) {
    const double p = clamp_pred(y_pred[c]);
    g[c] = (p - y_true[c]) / (p * (1.0 - p));
  }
  return g;
}

}  // namespace opis
