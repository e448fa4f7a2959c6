#include "opis/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "opis/error.hpp"

namespace opis {

namespace {

constexpr std::uint64_t kMaxResample = 1000;
constexpr double kMinProposalSide = 1.0;

BBox clip_box(double x1, double y1, double x2, double y2, double size) {
  if (x2 < x1) std::swap(x1, x2);
  if (y2 < y1) std::swap(y1, y2);
  x1 = std::clamp(x1, 0.0, size - kMinProposalSide);
  y1 = std::clamp(y1, 0.0, size - kMinProposalSide);
  x2 = std::clamp(x2, x1 + kMinProposalSide, size);
  y2 = std::clamp(y2, y1 + kMinProposalSide, size);
  return {x1, y1, x2, y2};
}

BBox jittered(const BBox& g, double scale, Engine& rng) {
  if (scale == 0.0) return g;
  std::uniform_real_distribution<double> amount(0.0, scale);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double j = amount(rng);
  const double dw = j * g.width();
  const double dh = j * g.height();
  const double x1 = g.x1 + unit(rng) * dw;
  const double y1 = g.y1 + unit(rng) * dh;
  const double x2 = g.x2 + unit(rng) * dw;
  const double y2 = g.y2 + unit(rng) * dh;
  return {x1, y1, x2, y2};
}

BBox random_box(double min_side, double max_side, double size, Engine& rng) {
  std::uniform_real_distribution<double> side(min_side, max_side);
  const double w = side(rng);
  const double h = side(rng);
  std::uniform_real_distribution<double> px(0.0, size - w);
  std::uniform_real_distribution<double> py(0.0, size - h);
  const double x = px(rng);
  const double y = py(rng);
  return {x, y, x + w, y + h};
}

bool every_object_covered(const Scene& s) {
  return std::all_of(s.gt.begin(), s.gt.end(), [&](const GroundTruth& g) {
    return std::any_of(s.proposals.begin(), s.proposals.end(),
                       [&](const BBox& p) { return iou(p, g.box) >= 0.5; });
  });
}

Scene draw_scene(const GenConfig& cfg, const Matrix& prototypes, Engine& rng) {
  Scene s;
  std::uniform_int_distribution<std::size_t> n_objects(cfg.min_objects, cfg.max_objects);
  std::uniform_int_distribution<std::size_t> klass(0, cfg.num_classes - 1);
  const std::size_t k = n_objects(rng);
  s.label.assign(cfg.num_classes, 0);
  for (std::size_t i = 0; i < k; ++i) {
    GroundTruth g;
    g.class_id = klass(rng);
    g.box = random_box(cfg.min_object_size, cfg.max_object_size, cfg.image_size, rng);
    s.label[g.class_id] = 1;
    s.gt.push_back(g);
  }

  std::bernoulli_distribution clutter(cfg.clutter_rate);
  std::uniform_int_distribution<std::size_t> pick(0, s.gt.size() - 1);
  s.proposals.reserve(cfg.num_proposals);
  for (std::size_t r = 0; r < cfg.num_proposals; ++r) {
    if (clutter(rng)) {
      const BBox b = random_box(5.0, 0.6 * cfg.image_size, cfg.image_size, rng);
      s.proposals.push_back(b);
    } else {
      const BBox b = jittered(s.gt[pick(rng)].box, cfg.jitter_scale, rng);
      s.proposals.push_back(clip_box(b.x1, b.y1, b.x2, b.y2, cfg.image_size));
    }
  }

  std::normal_distribution<double> noise(0.0, 1.0);
  const auto dim = static_cast<Eigen::Index>(cfg.feature_dim);
  s.features.resize(static_cast<Eigen::Index>(cfg.num_proposals), dim);
  for (std::size_t r = 0; r < cfg.num_proposals; ++r) {
    double best = 0.0;
    std::size_t best_class = s.gt.front().class_id;
    for (const GroundTruth& g : s.gt) {
      const double v = iou(s.proposals[r], g.box);
      if (v > best) {
        best = v;
        best_class = g.class_id;
      }
    }
    Vector f = best * prototypes.row(static_cast<Eigen::Index>(best_class)).transpose();
    for (Eigen::Index d = 0; d < dim; ++d) f[d] += cfg.feature_noise * noise(rng);
    const double norm = f.norm();
    if (norm > 1e-12) {
      f /= norm;
    } else {
      f.setConstant(1.0 / std::sqrt(static_cast<double>(dim)));
    }
    s.features.row(static_cast<Eigen::Index>(r)) = f.transpose();
  }
  return s;
}

}  // namespace

void GenConfig::validate() const {
  detail::require(num_classes >= 1, "data: classes must be >= 1");
  detail::require(feature_dim >= 1, "data: feature_dim must be >= 1");
  detail::require(num_proposals >= 1, "data: proposals must be >= 1");
  detail::require(min_objects >= 1 && min_objects <= max_objects, "data: need 1 <= min_objects <= max_objects");
  detail::require(image_size > 10.0, "data: image_size must exceed 10");
  detail::require(0.0 < min_object_size && min_object_size <= max_object_size && max_object_size < image_size,
                  "data: need 0 < min_object_size <= max_object_size < image_size");
  detail::require(0.0 <= clutter_rate && clutter_rate < 1.0, "data: clutter_rate must lie in [0, 1)");
  detail::require(jitter_scale >= 0.0, "data: jitter_scale must be >= 0");
  detail::require(feature_noise >= 0.0, "data: feature_noise must be >= 0");
}

Matrix make_prototypes(const GenConfig& config, std::uint64_t dataset_seed) {
  config.validate();
  Engine rng = make_engine(dataset_seed, StreamTag::kPrototypes, {});
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix protos(static_cast<Eigen::Index>(config.num_classes), static_cast<Eigen::Index>(config.feature_dim));
  for (Eigen::Index c = 0; c < protos.rows(); ++c) {
    for (Eigen::Index d = 0; d < protos.cols(); ++d) protos(c, d) = n(rng);
    protos.row(c).normalize();
  }
  return protos;
}

Scene generate_scene(const GenConfig& config, const Matrix& prototypes, Engine& rng) {
  config.validate();
  detail::require(static_cast<std::size_t>(prototypes.rows()) == config.num_classes &&
                      static_cast<std::size_t>(prototypes.cols()) == config.feature_dim,
                  "generate_scene: prototype shape does not match the config");
  for (std::uint64_t attempt = 0; attempt < kMaxResample; ++attempt) {
    Scene s = draw_scene(config, prototypes, rng);
    if (every_object_covered(s)) return s;
  }
  throw InvalidInput("generate_scene: could not cover every object with an IoU >= 0.5 proposal");
}

std::vector<Scene> generate_dataset(const GenConfig& config, std::uint64_t dataset_seed, std::size_t count,
                                    std::size_t first_index) {
  const Matrix protos = make_prototypes(config, dataset_seed);
  std::vector<Scene> scenes;
  scenes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Engine rng = make_engine(dataset_seed, StreamTag::kScene, {first_index + i});
    scenes.push_back(generate_scene(config, protos, rng));
  }
  return scenes;
}

}  // namespace opis
