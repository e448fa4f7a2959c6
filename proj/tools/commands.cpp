#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <thread>

#include "opis/evaluation.hpp"
#include "opis/gradcheck.hpp"
#include "opis/io.hpp"
#include "opis/pib_sampler.hpp"
#include "opis/trainer.hpp"

namespace opis::cli {

namespace fs = std::filesystem;

namespace {

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(path.string(), "cannot write '" + path.string() + "'");
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError(dir.string(), "cannot create output directory '" + dir.string() + "'");
}

/// Runs `body`, mapping exceptions onto the exit-code partition.
template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const NumericalFailure& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
}

}  // namespace

ExperimentConfig resolve_config(const fs::path& path, const Overrides& overrides) {
  ExperimentConfig config = load_config(path);
  if (overrides.seed) config.train.seed = *overrides.seed;
  if (overrides.method) {
    try {
      config.train.method = parse_method(*overrides.method);
    } catch (const InvalidInput& e) {
      throw ConfigError("--method", e.what());
    }
  }
  if (overrides.iterations) config.train.iterations = *overrides.iterations;
  try {
    config.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidInput& e) {
    throw ConfigError("", e.what());
  }
  return config;
}

std::vector<Scene> train_scenes(const ExperimentConfig& config, std::uint64_t dataset_seed) {
  return generate_dataset(config.train.data, dataset_seed, config.train.num_train_scenes);
}

std::vector<Scene> eval_scenes(const ExperimentConfig& config, std::uint64_t dataset_seed) {
  return generate_dataset(config.train.data, dataset_seed, config.num_eval_scenes, kEvalSceneOffset);
}

int cmd_train(const fs::path& config_path, const fs::path& out_dir, const Overrides& overrides, std::ostream& out,
              std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig config = resolve_config(config_path, overrides);
    ensure_dir(out_dir);
    const std::vector<Scene> scenes = train_scenes(config, config.train.seed);
    const TrainResult result = train(config.train, scenes);

    auto log = open_output(out_dir / "trainlog.csv");
    write_trainlog_csv(log, result.log, config.train.num_refinements);
    auto timing = open_output(out_dir / "trainlog_timing.csv");
    write_timing_csv(timing, result.log);
    save_model(out_dir / "model.json", result.model, config);
    auto echo = open_output(out_dir / "resolved_config.ini");
    echo << to_config_text(config);

    const IterationLog& last = result.log.rows.back();
    out << "trained " << to_string(config.train.method) << " for " << result.log.rows.size()
        << " iterations; final loss_midn=" << format_number(last.loss_midn) << '\n';
    return static_cast<int>(kSuccess);
  });
}

int cmd_eval(const fs::path& model_path, std::uint64_t dataset_seed, const fs::path& out_dir, std::ostream& out,
             std::ostream& err) {
  return guarded(err, [&] {
    const ModelSnapshot snap = load_model(model_path);
    ensure_dir(out_dir);
    const std::vector<Scene> test = eval_scenes(snap.config, dataset_seed);
    const std::vector<Scene> trainval = train_scenes(snap.config, dataset_seed);
    const EvalReport report = evaluate(snap.model, test, trainval, snap.config.nms_iou, snap.config.score_floor);

    auto metrics = open_output(out_dir / "metrics.json");
    write_metrics_json(metrics, report);
    auto dets = open_output(out_dir / "detections.jsonl");
    write_detections_jsonl(dets, report.detections);
    out << "mAP=" << format_number(report.map) << " CorLoc=" << format_number(report.corloc) << '\n';
    return static_cast<int>(kSuccess);
  });
}

std::size_t thread_budget() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("OPIS_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) n = static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  return n;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

std::vector<CompareCell> run_comparison(const ExperimentConfig& base, const std::vector<std::string>& methods,
                                        const std::vector<std::uint64_t>& seeds, std::size_t threads) {
  std::vector<CompareCell> cells;
  for (const std::string& m : methods) {
    parse_method(m);
    for (std::uint64_t s : seeds) cells.push_back({m, s, 0.0, 0.0});
  }

  auto run_cell = [&](CompareCell& cell) {
    ExperimentConfig config = base;
    config.train.seed = cell.seed;
    config.train.method = parse_method(cell.method);
    const std::vector<Scene> trainval = train_scenes(config, cell.seed);
    const std::vector<Scene> test = eval_scenes(config, cell.seed);
    const TrainResult result = train(config.train, trainval);
    const EvalReport report = evaluate(result.model, test, trainval, config.nms_iou, config.score_floor);
    cell.map = report.map;
    cell.corloc = report.corloc;
  };

  const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(cells.size(), 1));
  if (workers == 1) {
    for (CompareCell& c : cells) run_cell(c);
    return cells;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < cells.size() && !failed; i = next++) {
        try {
          run_cell(cells[i]);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
  return cells;
}

void write_comparison_csv(std::ostream& out, const std::vector<CompareCell>& cells,
                          const std::vector<std::string>& methods) {
  out << "method,seed,mAP,CorLoc\n";
  for (const CompareCell& c : cells) {
    out << c.method << ',' << c.seed << ',' << format_number(c.map) << ',' << format_number(c.corloc) << '\n';
  }
  for (const std::string& m : methods) {
    std::vector<double> maps;
    std::vector<double> corlocs;
    for (const CompareCell& c : cells) {
      if (c.method != m) continue;
      maps.push_back(c.map);
      corlocs.push_back(c.corloc);
    }
    out << m << ",median," << format_number(median(maps)) << ',' << format_number(median(corlocs)) << '\n';
  }
}

int cmd_compare(const fs::path& config_path, const std::vector<std::string>& methods,
                const std::vector<std::uint64_t>& seeds, const fs::path& out_path, const Overrides& overrides,
                std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig config = resolve_config(config_path, overrides);
    if (methods.empty() || seeds.empty()) throw ConfigError("--methods/--seeds", "compare needs methods and seeds");
    for (const std::string& m : methods) {
      try {
        parse_method(m);
      } catch (const InvalidInput& e) {
        throw ConfigError("--methods", e.what());
      }
    }
    const std::vector<CompareCell> cells = run_comparison(config, methods, seeds, thread_budget());
    if (out_path.has_parent_path()) ensure_dir(out_path.parent_path());
    auto file = open_output(out_path);
    write_comparison_csv(file, cells, methods);
    write_comparison_csv(out, cells, methods);
    return static_cast<int>(kSuccess);
  });
}

int cmd_gradcheck(std::uint64_t seed, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const GradCheckCase c = random_gradcheck_case(seed);
    const GradCheckResult r = finite_diff_check(c.model, c.scene, c.config, c.iteration);
    out << "method=" << to_string(c.config.method) << " iteration=" << c.iteration
        << " parameters=" << r.parameters << " max_rel_error=" << format_number(r.max_rel_error)
        << " max_abs_error=" << format_number(r.max_abs_error) << '\n';
    if (r.max_rel_error <= 1e-5) return static_cast<int>(kSuccess);
    err << "gradient check failed: relative error above 1e-5\n";
    return static_cast<int>(kNumericalFailure);
  });
}

int cmd_sample_demo(const fs::path& config_path, std::size_t iteration, const Overrides& overrides,
                    std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig config = resolve_config(config_path, overrides);
    const TrainConfig& tc = config.train;
    if (iteration > tc.final_iteration()) {
      throw ConfigError("--iteration", "--iteration must not exceed " + std::to_string(tc.final_iteration()));
    }
    const Scene scene = generate_dataset(tc.data, tc.seed, 1).front();
    const ToyModel model = ToyModel::random(tc.data.num_classes, tc.data.feature_dim, tc.num_refinements,
                                            tc.init_std, tc.seed);
    const ScoreSet scores = forward(model, scene);
    ScheduleState schedule = tc.schedule_at(iteration);
    // The trace always shows the fine-tune computation; before T_0 it is
    // evaluated as if fine-tuning had just begun.
    const bool early = schedule.phase() == Phase::kNormal;
    if (early) schedule.iteration = schedule.finetune_start;

    out << "iteration " << iteration << " (T_0=" << schedule.finetune_start << ", T_1=" << schedule.final_iteration
        << ")" << (early ? " precedes fine-tuning; showing T_n = T_0" : "") << '\n';
    out << "T=" << format_number(schedule.progress()) << " mu=" << format_number(schedule.ratio())
        << " I_t=" << format_number(schedule.neglect()) << '\n';

    const std::vector<double> edges = iou_bin_edges(schedule.ignore_iou, schedule.positive_iou, schedule.n_bins);
    out << "bin edges:";
    for (double e : edges) out << ' ' << format_number(e);
    out << '\n';

    for (std::size_t k = 1; k <= tc.num_refinements; ++k) {
      const Matrix& phi_prev = scores.branch(k - 1);
      const auto centers = select_cluster_centers(phi_prev, scene.label);
      const auto [targets, assignment] =
          assign_labels(centers, scene.proposals, tc.data.num_classes, schedule.ignore_iou, schedule.positive_iou);
      const BalanceResult bal = progressive_instance_balance(targets, assignment, phi_prev, schedule,
                                                             SamplerRng{tc.seed, 0, schedule.iteration, k, 0});
      out << "branch " << k << '\n';
      for (const ClassBalanceTrace& t : bal.classes) {
        out << "  class " << t.class_id << ": n_P=" << t.n_pos << " n_N=" << t.n_neg;
        if (t.n_neg == 0) {
          out << " (no negatives) kept positives=" << t.n_pos_kept << (t.neglect_applied ? " [neglect]" : "") << '\n';
          continue;
        }
        const NegativeSample& s = t.negatives;
        out << " target n'=" << s.target << (s.capped ? " (capped: keep all)" : "") << '\n';
        out << "    B_cj:";
        for (std::size_t b : s.bin_population) out << ' ' << b;
        out << "\n    stage-1 picks:";
        for (std::size_t b : s.bin_selected) out << ' ' << b;
        out << "\n    stage-2 picks: " << s.stage2_count << "\n    |N'|=" << s.selected.size() << '\n';
      }
    }
    return static_cast<int>(kSuccess);
  });
}

}  // namespace opis::cli
