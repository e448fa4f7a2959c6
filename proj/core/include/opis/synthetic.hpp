#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "opis/geometry.hpp"
#include "opis/midn_scoring.hpp"
#include "opis/rng.hpp"

namespace opis {

struct GroundTruth {
  BBox box;
  std::size_t class_id = 0;
};

/// One synthetic image: proposals with unit-length feature rows, the
/// image-level label and the hidden ground truth used only for evaluation.
struct Scene {
  std::vector<BBox> proposals;
  Matrix features;  ///< P x D
  ImageLabel label;
  std::vector<GroundTruth> gt;
};

/// Generator settings for the synthetic detection world.
struct GenConfig {
  std::size_t num_classes = 4;
  std::size_t feature_dim = 16;
  std::size_t num_proposals = 150;
  std::size_t min_objects = 1;
  std::size_t max_objects = 3;
  double image_size = 100.0;
  double min_object_size = 20.0;
  double max_object_size = 50.0;
  double clutter_rate = 0.7;    ///< fraction of proposals drawn uniformly over the image
  double jitter_scale = 0.5;    ///< max corner jitter as a fraction of object size
  double feature_noise = 0.25;  ///< per-dimension noise std before normalisation

  void validate() const;
};

/// Class prototype directions shared by every scene of a dataset.
Matrix make_prototypes(const GenConfig& config, std::uint64_t dataset_seed);

/// Samples one scene. Every ground-truth object is guaranteed at least one
/// proposal with IoU >= 0.5 (the scene is resampled until that holds).
Scene generate_scene(const GenConfig& config, const Matrix& prototypes, Engine& rng);

/// `count` scenes drawn from per-scene streams of `dataset_seed`; scene i
/// depends only on (dataset_seed, i).
std::vector<Scene> generate_dataset(const GenConfig& config, std::uint64_t dataset_seed, std::size_t count,
                                    std::size_t first_index = 0);

}  // namespace opis
