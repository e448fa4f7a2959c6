#include "opis/model.hpp"

#include <random>

#include "opis/error.hpp"
#include "opis/loss.hpp"
#include "opis/rng.hpp"

namespace opis {

Matrix LinearHead::apply(const Matrix& features) const {
  Matrix out = weight * features.transpose();
  out.colwise() += bias;
  return out;
}

std::size_t ToyModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += static_cast<std::size_t>(p.size());
  return n;
}

namespace {

template <typename MapT, typename HeadT>
void push_head(std::vector<MapT>& out, HeadT& head) {
  out.emplace_back(head.weight.data(), head.weight.size());
  out.emplace_back(head.bias.data(), head.bias.size());
}

LinearHead zero_head(std::size_t out, std::size_t dim) {
  return {Matrix::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(dim)),
          Vector::Zero(static_cast<Eigen::Index>(out))};
}

}  // namespace

std::vector<Eigen::Map<Vector>> ToyModel::parameters() {
  std::vector<Eigen::Map<Vector>> out;
  push_head(out, cls);
  push_head(out, det);
  for (auto& h : refine) push_head(out, h);
  return out;
}

std::vector<Eigen::Map<const Vector>> ToyModel::parameters() const {
  std::vector<Eigen::Map<const Vector>> out;
  push_head(out, cls);
  push_head(out, det);
  for (const auto& h : refine) push_head(out, h);
  return out;
}

ToyModel ToyModel::zeros(std::size_t num_classes, std::size_t feature_dim, std::size_t num_refinements) {
  detail::require(num_classes >= 1 && feature_dim >= 1 && num_refinements >= 1,
                  "ToyModel: classes, feature_dim and refinements must all be >= 1");
  ToyModel m;
  m.cls = zero_head(num_classes, feature_dim);
  m.det = zero_head(num_classes, feature_dim);
  for (std::size_t k = 0; k < num_refinements; ++k) m.refine.push_back(zero_head(num_classes + 1, feature_dim));
  return m;
}

ToyModel ToyModel::random(std::size_t num_classes, std::size_t feature_dim, std::size_t num_refinements,
                          double init_std, std::uint64_t seed) {
  ToyModel m = zeros(num_classes, feature_dim, num_refinements);
  Engine rng = make_engine(seed, StreamTag::kModelInit, {});
  std::normal_distribution<double> n(0.0, init_std);
  auto fill = [&](LinearHead& h) {
    for (Eigen::Index i = 0; i < h.weight.size(); ++i) h.weight.data()[i] = n(rng);
  };
  fill(m.cls);
  fill(m.det);
  for (auto& h : m.refine) fill(h);
  return m;
}

ScoreSet forward(const ToyModel& model, const Scene& scene) {
  detail::require(static_cast<std::size_t>(scene.features.cols()) == model.feature_dim(),
                  "forward: feature dimension does not match the model");
  detail::require(scene.label.size() == model.num_classes(), "forward: label length does not match the model");
  ScoreSet s;
  s.x_cls = model.cls.apply(scene.features);
  s.x_det = model.det.apply(scene.features);
  s.class_softmax = softmax_over_classes(s.x_cls);
  s.instance_softmax = softmax_over_instances(s.x_det);
  s.x_r = compose_instance_scores(s.class_softmax, s.instance_softmax);
  s.image_scores = image_scores(s.x_r);
  s.phi0 = make_phi0(s.x_r);
  for (const LinearHead& h : model.refine) {
    s.refine_logits.push_back(h.apply(scene.features));
    s.phi.push_back(softmax_over_classes(s.refine_logits.back()));
  }
  return s;
}

LossBreakdown scene_loss(const ScoreSet& scores, const Scene& scene, const SceneSupervision& sup) {
  LossBreakdown out;
  out.midn = midn_loss(scores.image_scores, scene.label);
  for (std::size_t k = 0; k < sup.targets.size(); ++k) {
    out.refine.push_back(refinement_loss(sup.targets[k], scores.phi[k], sup.zetas[k]));
  }
  out.total = total_loss(out.midn, out.refine);
  return out;
}

namespace {

void accumulate(LinearHead& grad, const Matrix& d_logits, const Matrix& features) {
  grad.weight += d_logits * features;
  grad.bias += d_logits.rowwise().sum();
}

}  // namespace

ToyModel scene_gradient(const ToyModel& model, const Scene& scene, const ScoreSet& scores,
                        const SceneSupervision& sup) {
  detail::require(sup.targets.size() == model.num_refinements() && sup.zetas.size() == model.num_refinements(),
                  "scene_gradient: supervision does not cover every refinement branch");
  ToyModel grad = ToyModel::zeros(model.num_classes(), model.feature_dim(), model.num_refinements());

  // MIDN: the clamp has zero slope outside [eps, 1 - eps].
  Vector g = midn_loss_grad(scores.image_scores, scene.label);
  for (Eigen::Index c = 0; c < g.size(); ++c) {
    const double p = scores.image_scores[c];
    if (p < kMidnClampEps || p > 1.0 - kMidnClampEps) g[c] = 0.0;
  }
  const Matrix& sc = scores.class_softmax;
  const Matrix& sd = scores.instance_softmax;
  const Matrix g_sc = sd.array().colwise() * g.array();
  const Matrix g_sd = sc.array().colwise() * g.array();

  Matrix d_cls(sc.rows(), sc.cols());
  for (Eigen::Index r = 0; r < sc.cols(); ++r) {
    const double dot = g_sc.col(r).dot(sc.col(r));
    d_cls.col(r) = sc.col(r).array() * (g_sc.col(r).array() - dot);
  }
  Matrix d_det(sd.rows(), sd.cols());
  for (Eigen::Index c = 0; c < sd.rows(); ++c) {
    const double dot = g_sd.row(c).dot(sd.row(c));
    d_det.row(c) = sd.row(c).array() * (g_sd.row(c).array() - dot);
  }
  accumulate(grad.cls, d_cls, scene.features);
  accumulate(grad.det, d_det, scene.features);

  for (std::size_t k = 0; k < model.num_refinements(); ++k) {
    const Matrix d_ref = refinement_loss_grad(sup.targets[k], scores.refine_logits[k], sup.zetas[k]);
    accumulate(grad.refine[k], d_ref, scene.features);
  }
  return grad;
}

}  // namespace opis
