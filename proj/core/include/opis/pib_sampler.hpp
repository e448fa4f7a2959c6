#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "opis/midn_scoring.hpp"
#include "opis/rng.hpp"
#include "opis/supervision.hpp"

namespace opis {

enum class Phase { kNormal, kFinetune };

/// Iteration counters plus every sampling and reweighting hyperparameter.
///
/// Iterations are zero-based. Fine-tuning covers iterations
/// [finetune_start, final_iteration]; the progressive parameter is 0 on the
/// first fine-tune iteration and 1 on the last.
struct ScheduleState {
  std::size_t iteration = 0;        ///< T_n
  std::size_t finetune_start = 0;   ///< T_0
  std::size_t final_iteration = 1;  ///< T_1

  double mu_s = 20.0;          ///< initial negative:positive ratio
  double alpha = 0.85;         ///< neglect threshold slope
  double neglect_base = 0.05;  ///< neglect threshold at iteration 0
  double ignore_iou = kDefaultIgnoreIou;
  double positive_iou = kDefaultPositiveIou;
  double beta = 0.5;   ///< score vs IoU balance in positive reweighting
  double gamma = 0.9;  ///< attenuation rate of positive weights
  std::size_t n_bins = 4;

  Phase phase() const { return iteration >= finetune_start ? Phase::kFinetune : Phase::kNormal; }
  /// Progressive parameter; 0 throughout the normal phase.
  double progress() const;
  /// Negative:positive ratio at the current iteration.
  double ratio() const;
  /// Positive-neglect threshold at the current iteration.
  double neglect() const;
  void validate() const;
};

double progressive_t(std::size_t iteration, std::size_t finetune_start, std::size_t final_iteration);

/// mu_s at T = 0 falling linearly to 4 at T = 1.
double ratio_mu(double mu_s, double t);

double neglect_threshold(double neglect_base, double alpha, std::size_t iteration, std::size_t final_iteration);

/// Equal-width edges over (ignore_iou, positive_iou); n_bins + 1 values with
/// the endpoints reproduced exactly.
std::vector<double> iou_bin_edges(double ignore_iou, double positive_iou, std::size_t n_bins = 4);

/// Bin j holds [edges[j], edges[j+1]); values at or above the last edge fall
/// in the last bin and values below the first in bin 0.
std::size_t iou_bin(std::span<const double> edges, double value);

struct NegativeCandidate {
  std::size_t proposal = 0;
  double iou = 0.0;
};

/// Outcome of reselecting one class's negatives, with the bookkeeping needed
/// to trace the two stages.
struct NegativeSample {
  std::vector<std::size_t> selected;  ///< proposal indices, ascending
  std::size_t target = 0;             ///< floor(mu * n_pos)
  bool capped = false;                ///< target >= supply, everything kept
  std::vector<std::size_t> bin_population;
  std::vector<std::size_t> bin_selected;
  std::vector<std::size_t> stage1;  ///< proposals picked by the binned stage
  std::size_t stage2_count = 0;
};

/// Binned-then-random negative reselection for one class.
///
/// Stage 1 draws min(n_pos, B_j) negatives uniformly without replacement
/// from each IoU bin; stage 2 tops up uniformly from the remainder until
/// floor(mu * n_pos) are selected. When the target meets or exceeds the
/// supply every negative is kept.
NegativeSample sample_negatives(std::span<const NegativeCandidate> negatives, std::size_t n_pos, double mu,
                                double ignore_iou, double positive_iou, const SamplerRng& rng,
                                std::size_t n_bins = 4);

/// Keeps only the center when the summed previous-branch score of the
/// class's positives (center included) falls below `threshold`.
std::vector<std::size_t> reselect_positives(std::span<const std::size_t> positives, const Matrix& phi_prev,
                                            std::size_t class_id, std::size_t center, double threshold);

/// Zeroes the weight and clears `selected` for every proposal outside the
/// two selected sets. Labels are untouched.
SupervisionTargets apply_selection_mask(const SupervisionTargets& targets,
                                        std::span<const std::size_t> selected_pos,
                                        std::span<const std::size_t> selected_neg);

struct ClassBalanceTrace {
  std::size_t class_id = 0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  std::size_t n_pos_kept = 0;
  bool neglect_applied = false;
  NegativeSample negatives;
};

struct BalanceResult {
  SupervisionTargets targets;
  /// Positives kept per class; input to the reweighting step.
  std::vector<std::vector<std::size_t>> kept_positives;
  std::vector<ClassBalanceTrace> classes;
  std::size_t neg_before = 0;
  std::size_t neg_after = 0;
};

/// One branch's instance balancing for the fine-tune phase: negatives are
/// reselected for classes that have any, positives pruned by the neglect
/// rule for classes that have none, then the weights are masked.
/// `rng.class_id` is overwritten per class.
BalanceResult progressive_instance_balance(const SupervisionTargets& targets, const ClusterAssignment& assignment,
                                           const Matrix& phi_prev, const ScheduleState& schedule,
                                           SamplerRng rng);

}  // namespace opis
