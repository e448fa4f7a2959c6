#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace opis {

using Engine = std::mt19937_64;

/// Purpose tags that keep derived random streams disjoint.
enum class StreamTag : std::uint64_t {
  kSampler = 1,
  kScene = 2,
  kPrototypes = 3,
  kModelInit = 4,
  kBatchOrder = 5,
};

/// Mixes a root seed, a purpose tag and integer coordinates into a child
/// seed (splitmix64 finaliser chained over the inputs).
std::uint64_t derive_seed(std::uint64_t root, StreamTag tag, std::initializer_list<std::uint64_t> coords);

inline Engine make_engine(std::uint64_t root, StreamTag tag, std::initializer_list<std::uint64_t> coords) {
  return Engine(derive_seed(root, tag, coords));
}

/// Stream coordinates of one negative-sampling call. Equal coordinates give
/// equal draws regardless of the order classes or branches are visited in.
struct SamplerRng {
  std::uint64_t seed = 0;
  std::uint64_t scene = 0;
  std::uint64_t iteration = 0;
  std::uint64_t branch = 0;
  std::uint64_t class_id = 0;

  Engine engine() const { return make_engine(seed, StreamTag::kSampler, {scene, iteration, branch, class_id}); }
};

}  // namespace opis
