#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "opis/geometry.hpp"
#include "opis/model.hpp"
#include "opis/synthetic.hpp"

namespace opis {

inline constexpr double kDefaultNmsIou = 0.3;
inline constexpr double kDefaultScoreFloor = 1e-3;
inline constexpr double kVocMatchIou = 0.5;

struct SceneDetection {
  std::size_t scene_id = 0;
  ScoredBox det;
};

struct SceneGroundTruth {
  std::size_t scene_id = 0;
  GroundTruth gt;
};

/// Mean over the refinement branches of their foreground scores, C x R.
Matrix branch_mean_scores(const ScoreSet& scores);

/// Per-class detections for one scene: branch-mean scores, floor filter,
/// then NMS. Ordered by descending score.
std::vector<ScoredBox> detect(const ToyModel& model, const Scene& scene, double nms_iou = kDefaultNmsIou,
                              double score_floor = kDefaultScoreFloor);

/// All-points VOC average precision for one class. A detection is a true
/// positive when its best-overlapping same-class ground truth in the same
/// scene has IoU strictly above `iou_thresh` and is still unmatched.
/// Throws InvalidInput when the class has no ground truth.
double voc_ap(std::span<const SceneDetection> dets, std::span<const SceneGroundTruth> gts, std::size_t class_id,
              double iou_thresh = kVocMatchIou);

/// Mean of voc_ap over those `classes` that have ground truth.
double mean_ap(std::span<const SceneDetection> dets, std::span<const SceneGroundTruth> gts,
               std::span<const std::size_t> classes, double iou_thresh = kVocMatchIou);

/// One (scene, present class) pair: the class's single top-scoring box and
/// that class's ground-truth boxes in the scene.
struct LocalizationCase {
  BBox top;
  std::vector<BBox> gts;
};

double corloc(std::span<const LocalizationCase> cases, double iou_thresh = kVocMatchIou);

/// Builds one case per (scene, labelled class) from the branch-mean argmax
/// proposal and scores them.
std::vector<LocalizationCase> localization_cases(const ToyModel& model, std::span<const Scene> scenes);
double corloc(const ToyModel& model, std::span<const Scene> scenes, double iou_thresh = kVocMatchIou);

struct EvalReport {
  std::vector<std::optional<double>> per_class_ap;  ///< nullopt where the class has no ground truth
  double map = 0.0;
  double corloc = 0.0;
  std::vector<SceneDetection> detections;
};

/// mAP over `test_scenes` and CorLoc over `localization_scenes`.
EvalReport evaluate(const ToyModel& model, std::span<const Scene> test_scenes,
                    std::span<const Scene> localization_scenes, double nms_iou = kDefaultNmsIou,
                    double score_floor = kDefaultScoreFloor);

}  // namespace opis
