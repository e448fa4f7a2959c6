#include "opis/pib_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>

#include "opis/error.hpp"

namespace opis {

double ScheduleState::progress() const {
  if (phase() == Phase::kNormal) return 0.0;
  return progressive_t(iteration, finetune_start, final_iteration);
}

double ScheduleState::ratio() const { return ratio_mu(mu_s, progress()); }

double ScheduleState::neglect() const {
  return neglect_threshold(neglect_base, alpha, iteration, final_iteration);
}

void ScheduleState::validate() const {
  detail::require(finetune_start < final_iteration, "schedule: finetune_start must precede final_iteration");
  detail::require(mu_s >= 4.0, "schedule: mu_s must be >= 4");
  detail::require(0.0 <= ignore_iou && ignore_iou < positive_iou && positive_iou <= 1.0,
                  "schedule: thresholds must satisfy 0 <= ignore_iou < positive_iou <= 1");
  detail::require(0.0 <= beta && beta <= 1.0, "schedule: beta must lie in [0, 1]");
  detail::require(gamma >= 0.0, "schedule: gamma must be >= 0");
  detail::require(n_bins >= 1, "schedule: n_bins must be >= 1");
}

double progressive_t(std::size_t iteration, std::size_t finetune_start, std::size_t final_iteration) {
  detail::require(finetune_start < final_iteration, "progressive_t: requires T_0 < T_1");
  detail::require(finetune_start <= iteration && iteration <= final_iteration,
                  "progressive_t: iteration outside the fine-tune window");
  return static_cast<double>(iteration - finetune_start) / static_cast<double>(final_iteration - finetune_start);
}

double ratio_mu(double mu_s, double t) {
  detail::require(mu_s >= 4.0, "ratio_mu: mu_s must be >= 4");
  detail::require(0.0 <= t && t <= 1.0, "ratio_mu: T must lie in [0, 1]");
  return mu_s - (mu_s - 4.0) * t;
}

double neglect_threshold(double neglect_base, double alpha, std::size_t iteration, std::size_t final_iteration) {
  detail::require(final_iteration > 0 && iteration <= final_iteration,
                  "neglect_threshold: iteration must not exceed the final iteration");
  return neglect_base + alpha * static_cast<double>(iteration) / static_cast<double>(final_iteration);
}

std::vector<double> iou_bin_edges(double ignore_iou, double positive_iou, std::size_t n_bins) {
  detail::require(ignore_iou < positive_iou, "iou_bin_edges: requires ignore_iou < positive_iou");
  detail::require(n_bins >= 1, "iou_bin_edges: n_bins must be >= 1");
  std::vector<double> edges(n_bins + 1);
  for (std::size_t j = 0; j <= n_bins; ++j) {
    edges[j] = std::lerp(ignore_iou, positive_iou, static_cast<double>(j) / static_cast<double>(n_bins));
  }
  edges.front() = ignore_iou;
  edges.back() = positive_iou;
  return edges;
}

std::size_t iou_bin(std::span<const double> edges, double value) {
  const std::size_t n_bins = edges.size() - 1;
  for (std::size_t j = 0; j + 1 < n_bins; ++j) {
    if (value < edges[j + 1]) return j;
  }
  return n_bins - 1;
}

NegativeSample sample_negatives(std::span<const NegativeCandidate> negatives, std::size_t n_pos, double mu,
                                double ignore_iou, double positive_iou, const SamplerRng& rng,
                                std::size_t n_bins) {
  detail::require(n_pos >= 1, "sample_negatives: class has no positives");
  detail::require(mu >= 4.0, "sample_negatives: mu must be >= 4");

  NegativeSample out;
  out.target = static_cast<std::size_t>(std::floor(mu * static_cast<double>(n_pos)));
  out.bin_population.assign(n_bins, 0);
  out.bin_selected.assign(n_bins, 0);

  const std::vector<double> edges = iou_bin_edges(ignore_iou, positive_iou, n_bins);
  std::vector<std::vector<std::size_t>> bins(n_bins);
  for (const NegativeCandidate& n : negatives) bins[iou_bin(edges, n.iou)].push_back(n.proposal);
  for (std::size_t j = 0; j < n_bins; ++j) {
    std::sort(bins[j].begin(), bins[j].end());
    out.bin_population[j] = bins[j].size();
  }

  if (out.target >= negatives.size()) {
    out.capped = true;
    for (const NegativeCandidate& n : negatives) out.selected.push_back(n.proposal);
    std::sort(out.selected.begin(), out.selected.end());
    return out;
  }

  Engine gen = rng.engine();
  std::vector<std::size_t> rest;
  for (std::size_t j = 0; j < n_bins; ++j) {
    const std::size_t take = std::min(n_pos, bins[j].size());
    std::vector<std::size_t> picked;
    std::sample(bins[j].begin(), bins[j].end(), std::back_inserter(picked), take, gen);
    out.bin_selected[j] = picked.size();
    out.stage1.insert(out.stage1.end(), picked.begin(), picked.end());
    std::set_difference(bins[j].begin(), bins[j].end(), picked.begin(), picked.end(), std::back_inserter(rest));
  }
  std::sort(out.stage1.begin(), out.stage1.end());
  std::sort(rest.begin(), rest.end());

  const std::size_t remaining = out.target - out.stage1.size();
  std::vector<std::size_t> topped;
  std::sample(rest.begin(), rest.end(), std::back_inserter(topped), remaining, gen);
  out.stage2_count = topped.size();

  out.selected = out.stage1;
  out.selected.insert(out.selected.end(), topped.begin(), topped.end());
  std::sort(out.selected.begin(), out.selected.end());
  return out;
}

std::vector<std::size_t> reselect_positives(std::span<const std::size_t> positives, const Matrix& phi_prev,
                                            std::size_t class_id, std::size_t center, double threshold) {
  if (std::find(positives.begin(), positives.end(), center) == positives.end()) {
    throw InternalError("reselect_positives: cluster center is not among the positives");
  }
  double total = 0.0;
  for (std::size_t r : positives) total += phi_prev(class_id, r);
  if (total < threshold) return {center};
  return {positives.begin(), positives.end()};
}

SupervisionTargets apply_selection_mask(const SupervisionTargets& targets,
                                        std::span<const std::size_t> selected_pos,
                                        std::span<const std::size_t> selected_neg) {
  std::vector<bool> keep(targets.size(), false);
  auto mark = [&](std::span<const std::size_t> ids, InstanceStatus expected) {
    for (std::size_t r : ids) {
      detail::require(r < targets.size(), "apply_selection_mask: index out of range");
      detail::require(targets.instances[r].status == expected,
                      "apply_selection_mask: selected index has the wrong label");
      keep[r] = true;
    }
  };
  mark(selected_pos, InstanceStatus::kPositive);
  mark(selected_neg, InstanceStatus::kNegative);

  SupervisionTargets out = targets;
  for (std::size_t r = 0; r < out.size(); ++r) {
    if (!keep[r]) {
      out.instances[r].weight = 0.0;
      out.instances[r].selected = false;
    }
  }
  return out;
}

BalanceResult progressive_instance_balance(const SupervisionTargets& targets, const ClusterAssignment& assignment,
                                           const Matrix& phi_prev, const ScheduleState& schedule,
                                           SamplerRng rng) {
  const double mu = schedule.ratio();
  const double neglect = schedule.neglect();

  BalanceResult result;
  result.kept_positives.resize(targets.num_classes);
  std::vector<std::size_t> pos_keep;
  std::vector<std::size_t> neg_keep;

  for (const ClusterCenter& center : assignment.centers) {
    const std::size_t c = center.class_id;
    const auto& pos = assignment.positives[c];
    const auto& neg = assignment.negatives[c];
    // A center whose box duplicates a lower class's center loses every
    // proposal to that class and supervises nothing.
    if (pos.empty()) continue;

    ClassBalanceTrace trace;
    trace.class_id = c;
    trace.n_pos = pos.size();
    trace.n_neg = neg.size();
    result.neg_before += neg.size();

    if (!neg.empty()) {
      std::vector<NegativeCandidate> candidates;
      candidates.reserve(neg.size());
      for (std::size_t r : neg) candidates.push_back({r, targets.instances[r].max_iou});
      rng.class_id = c;
      trace.negatives = sample_negatives(candidates, pos.size(), mu, schedule.ignore_iou, schedule.positive_iou,
                                         rng, schedule.n_bins);
      result.kept_positives[c] = pos;
    } else {
      result.kept_positives[c] = reselect_positives(pos, phi_prev, c, center.proposal, neglect);
      trace.neglect_applied = result.kept_positives[c].size() < pos.size();
    }
    trace.n_pos_kept = result.kept_positives[c].size();
    result.neg_after += trace.negatives.selected.size();
    pos_keep.insert(pos_keep.end(), result.kept_positives[c].begin(), result.kept_positives[c].end());
    neg_keep.insert(neg_keep.end(), trace.negatives.selected.begin(), trace.negatives.selected.end());
    result.classes.push_back(std::move(trace));
  }

  result.targets = apply_selection_mask(targets, pos_keep, neg_keep);
  return result;
}

}  // namespace opis
