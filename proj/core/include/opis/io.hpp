#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>

#include "opis/config.hpp"
#include "opis/evaluation.hpp"
#include "opis/model.hpp"
#include "opis/trainer.hpp"

namespace opis {

/// Shortest round-trip decimal form of a double.
std::string format_number(double v);

/// Header: iteration,phase,T,mu,zeta_mean,loss_midn,loss_ref_1..K,
/// pos_count,neg_count_before,neg_count_after. Contains no timing, so equal
/// runs give equal bytes; wall-clock goes to the timing sidecar.
void write_trainlog_csv(std::ostream& out, const TrainLog& log, std::size_t num_refinements);
void write_timing_csv(std::ostream& out, const TrainLog& log);

struct ModelSnapshot {
  ToyModel model;
  ExperimentConfig config;
};

void save_model(const std::filesystem::path& path, const ToyModel& model, const ExperimentConfig& config);
ModelSnapshot load_model(const std::filesystem::path& path);

/// One JSON object per line: scene_id, class_id, score, x1, y1, x2, y2.
void write_detections_jsonl(std::ostream& out, std::span<const SceneDetection> dets);

/// JSON object with per-class AP (null where undefined), mAP and CorLoc.
void write_metrics_json(std::ostream& out, const EvalReport& report);

}  // namespace opis
