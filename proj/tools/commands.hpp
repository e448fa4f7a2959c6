#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "opis/config.hpp"

namespace opis::cli {

enum ExitCode : int {
  kSuccess = 0,
  kConfigError = 2,
  kNumericalFailure = 3,
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  std::optional<std::size_t> iterations;
};

/// Loads a config file and applies command-line overrides.
ExperimentConfig resolve_config(const std::filesystem::path& path, const Overrides& overrides);

/// Training set and evaluation set of an experiment, both derived from the
/// dataset seed.
std::vector<Scene> train_scenes(const ExperimentConfig& config, std::uint64_t dataset_seed);
std::vector<Scene> eval_scenes(const ExperimentConfig& config, std::uint64_t dataset_seed);

/// Writes trainlog.csv, trainlog_timing.csv, model.json and
/// resolved_config.ini into `out_dir`.
int cmd_train(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
              const Overrides& overrides, std::ostream& out, std::ostream& err);

/// Writes metrics.json and detections.jsonl into `out_dir`.
int cmd_eval(const std::filesystem::path& model_path, std::uint64_t dataset_seed,
             const std::filesystem::path& out_dir, std::ostream& out, std::ostream& err);

struct CompareCell {
  std::string method;
  std::uint64_t seed = 0;
  double map = 0.0;
  double corloc = 0.0;
};

/// Trains and evaluates every (method, seed) cell. Cells run on up to
/// `threads` workers; results come back in (method, seed) order.
std::vector<CompareCell> run_comparison(const ExperimentConfig& base, const std::vector<std::string>& methods,
                                        const std::vector<std::uint64_t>& seeds, std::size_t threads);

/// CSV of every cell followed by one `median` row per method.
void write_comparison_csv(std::ostream& out, const std::vector<CompareCell>& cells,
                          const std::vector<std::string>& methods);

int cmd_compare(const std::filesystem::path& config_path, const std::vector<std::string>& methods,
                const std::vector<std::uint64_t>& seeds, const std::filesystem::path& out_path,
                const Overrides& overrides, std::ostream& out, std::ostream& err);

int cmd_gradcheck(std::uint64_t seed, std::ostream& out, std::ostream& err);

int cmd_sample_demo(const std::filesystem::path& config_path, std::size_t iteration, const Overrides& overrides,
                    std::ostream& out, std::ostream& err);

/// Worker cap from OPIS_THREADS, defaulting to the hardware concurrency.
std::size_t thread_budget();

double median(std::vector<double> values);

}  // namespace opis::cli
