#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include "opis/error.hpp"
#include "opis/evaluation.hpp"
#include "opis/trainer.hpp"

namespace opis {

/// Offset of evaluation scene indices within a dataset's stream space, so
/// test scenes never coincide with training scenes.
inline constexpr std::size_t kEvalSceneOffset = 1'000'000;

/// Bad configuration file or value. `key()` names the offending
/// `section.key` (or the path, for unreadable files).
class ConfigError : public InvalidInput {
 public:
  ConfigError(std::string key, const std::string& message) : InvalidInput(message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct ExperimentConfig {
  TrainConfig train;
  std::size_t num_eval_scenes = 100;
  double nms_iou = kDefaultNmsIou;
  double score_floor = kDefaultScoreFloor;

  void validate() const;
};

/// Parses `key = value` text grouped into [data], [model], [schedule],
/// [sampler], [reweight], [train] and [eval] sections. Keys left out keep
/// their defaults; unknown sections or keys are errors.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every key with its resolved value, in a form parse_config accepts.
std::string to_config_text(const ExperimentConfig& config);

}  // namespace opis
