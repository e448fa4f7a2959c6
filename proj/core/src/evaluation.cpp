#include "opis/evaluation.hpp"

#include <algorithm>
#include <numeric>

#include "opis/error.hpp"

namespace opis {

Matrix branch_mean_scores(const ScoreSet& scores) {
  detail::require(!scores.phi.empty(), "branch_mean_scores: no refinement branches");
  const Eigen::Index c = static_cast<Eigen::Index>(scores.num_classes());
  Matrix mean = Matrix::Zero(c, scores.phi.front().cols());
  for (const Matrix& phi : scores.phi) mean += phi.topRows(c);
  return mean / static_cast<double>(scores.phi.size());
}

std::vector<ScoredBox> detect(const ToyModel& model, const Scene& scene, double nms_iou, double score_floor) {
  const Matrix mean = branch_mean_scores(forward(model, scene));
  std::vector<ScoredBox> out;
  for (Eigen::Index c = 0; c < mean.rows(); ++c) {
    std::vector<ScoredBox> cand;
    for (Eigen::Index r = 0; r < mean.cols(); ++r) {
      if (mean(c, r) < score_floor) continue;
      cand.push_back({scene.proposals[static_cast<std::size_t>(r)], mean(c, r), static_cast<std::size_t>(c)});
    }
    const auto kept = nms(cand, nms_iou);
    out.insert(out.end(), kept.begin(), kept.end());
  }
  std::stable_sort(out.begin(), out.end(), [](const ScoredBox& a, const ScoredBox& b) { return a.score > b.score; });
  return out;
}

double voc_ap(std::span<const SceneDetection> dets, std::span<const SceneGroundTruth> gts, std::size_t class_id,
              double iou_thresh) {
  std::vector<const SceneGroundTruth*> class_gts;
  for (const auto& g : gts) {
    if (g.gt.class_id == class_id) class_gts.push_back(&g);
  }
  if (class_gts.empty()) throw InvalidInput("voc_ap: class has no ground truth; AP is undefined");

  std::vector<const SceneDetection*> class_dets;
  for (const auto& d : dets) {
    if (d.det.class_id == class_id) class_dets.push_back(&d);
  }
  std::stable_sort(class_dets.begin(), class_dets.end(),
                   [](const SceneDetection* a, const SceneDetection* b) { return a->det.score > b->det.score; });

  std::vector<bool> matched(class_gts.size(), false);
  std::vector<double> tp(class_dets.size(), 0.0);
  std::vector<double> fp(class_dets.size(), 0.0);
  for (std::size_t i = 0; i < class_dets.size(); ++i) {
    const SceneDetection& d = *class_dets[i];
    double best = -1.0;
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < class_gts.size(); ++j) {
      if (class_gts[j]->scene_id != d.scene_id) continue;
      const double v = iou(d.det.box, class_gts[j]->gt.box);
      if (v > best) {
        best = v;
        best_j = j;
      }
    }
    if (best > iou_thresh && !matched[best_j]) {
      matched[best_j] = true;
      tp[i] = 1.0;
    } else {
      fp[i] = 1.0;
    }
  }

  // Precision/recall with sentinels, precision made monotone from the right,
  // then summed over every recall step.
  const double n_gt = static_cast<double>(class_gts.size());
  std::vector<double> rec{0.0};
  std::vector<double> prec{0.0};
  double ctp = 0.0;
  double cfp = 0.0;
  for (std::size_t i = 0; i < class_dets.size(); ++i) {
    ctp += tp[i];
    cfp += fp[i];
    rec.push_back(ctp / n_gt);
    prec.push_back(ctp / (ctp + cfp));
  }
  rec.push_back(1.0);
  prec.push_back(0.0);
  for (std::size_t i = prec.size() - 1; i > 0; --i) prec[i - 1] = std::max(prec[i - 1], prec[i]);

  double ap = 0.0;
  for (std::size_t i = 1; i < rec.size(); ++i) ap += (rec[i] - rec[i - 1]) * prec[i];
  return ap;
}

double mean_ap(std::span<const SceneDetection> dets, std::span<const SceneGroundTruth> gts,
               std::span<const std::size_t> classes, double iou_thresh) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t c : classes) {
    const bool present = std::any_of(gts.begin(), gts.end(), [c](const auto& g) { return g.gt.class_id == c; });
    if (!present) continue;
    sum += voc_ap(dets, gts, c, iou_thresh);
    ++n;
  }
  detail::require(n > 0, "mean_ap: no class has ground truth");
  return sum / static_cast<double>(n);
}

double corloc(std::span<const LocalizationCase> cases, double iou_thresh) {
  detail::require(!cases.empty(), "corloc: no (scene, class) pairs");
  std::size_t hits = 0;
  for (const LocalizationCase& c : cases) {
    const bool hit = std::any_of(c.gts.begin(), c.gts.end(), [&](const BBox& g) { return iou(c.top, g) > iou_thresh; });
    if (hit) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(cases.size());
}

std::vector<LocalizationCase> localization_cases(const ToyModel& model, std::span<const Scene> scenes) {
  std::vector<LocalizationCase> cases;
  for (const Scene& scene : scenes) {
    const Matrix mean = branch_mean_scores(forward(model, scene));
    for (std::size_t c = 0; c < scene.label.size(); ++c) {
      if (scene.label[c] != 1) continue;
      Eigen::Index best = 0;
      for (Eigen::Index r = 1; r < mean.cols(); ++r) {
        if (mean(static_cast<Eigen::Index>(c), r) > mean(static_cast<Eigen::Index>(c), best)) best = r;
      }
      LocalizationCase lc;
      lc.top = scene.proposals[static_cast<std::size_t>(best)];
      for (const GroundTruth& g : scene.gt) {
        if (g.class_id == c) lc.gts.push_back(g.box);
      }
      cases.push_back(std::move(lc));
    }
  }
  return cases;
}

double corloc(const ToyModel& model, std::span<const Scene> scenes, double iou_thresh) {
  return corloc(localization_cases(model, scenes), iou_thresh);
}

EvalReport evaluate(const ToyModel& model, std::span<const Scene> test_scenes,
                    std::span<const Scene> localization_scenes, double nms_iou, double score_floor) {
  EvalReport report;
  std::vector<SceneGroundTruth> gts;
  for (std::size_t s = 0; s < test_scenes.size(); ++s) {
    for (const ScoredBox& d : detect(model, test_scenes[s], nms_iou, score_floor)) {
      report.detections.push_back({s, d});
    }
    for (const GroundTruth& g : test_scenes[s].gt) gts.push_back({s, g});
  }

  const std::size_t n_classes = model.num_classes();
  report.per_class_ap.assign(n_classes, std::nullopt);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    const bool present = std::any_of(gts.begin(), gts.end(), [c](const auto& g) { return g.gt.class_id == c; });
    if (!present) continue;
    report.per_class_ap[c] = voc_ap(report.detections, gts, c);
    sum += *report.per_class_ap[c];
    ++n;
  }
  report.map = n > 0 ? sum / static_cast<double>(n) : 0.0;
  report.corloc = corloc(model, localization_scenes);
  return report;
}

}  // namespace opis
