#include "opis/io.hpp"

#include <charconv>
#include <fstream>
#include <nlohmann/json.hpp>
#include <ostream>

namespace opis {

namespace {

using json = nlohmann::ordered_json;

json head_to_json(const LinearHead& h) {
  json w = json::array();
  for (Eigen::Index i = 0; i < h.weight.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < h.weight.cols(); ++j) row.push_back(h.weight(i, j));
    w.push_back(std::move(row));
  }
  json b = json::array();
  for (Eigen::Index i = 0; i < h.bias.size(); ++i) b.push_back(h.bias[i]);
  return {{"weight", std::move(w)}, {"bias", std::move(b)}};
}

void head_from_json(const json& j, LinearHead& h, const std::string& name) {
  const auto& w = j.at("weight");
  const auto& b = j.at("bias");
  if (w.size() != static_cast<std::size_t>(h.weight.rows()) || b.size() != static_cast<std::size_t>(h.bias.size())) {
    throw InvalidInput("model snapshot: head '" + name + "' has the wrong shape");
  }
  for (Eigen::Index i = 0; i < h.weight.rows(); ++i) {
    const auto& row = w.at(static_cast<std::size_t>(i));
    if (row.size() != static_cast<std::size_t>(h.weight.cols())) {
      throw InvalidInput("model snapshot: head '" + name + "' has the wrong shape");
    }
    for (Eigen::Index c = 0; c < h.weight.cols(); ++c) h.weight(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    h.bias[i] = b.at(static_cast<std::size_t>(i)).get<double>();
  }
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

void write_trainlog_csv(std::ostream& out, const TrainLog& log, std::size_t num_refinements) {
  out << "iteration,phase,T,mu,zeta_mean,loss_midn";
  for (std::size_t k = 1; k <= num_refinements; ++k) out << ",loss_ref_" << k;
  out << ",pos_count,neg_count_before,neg_count_after\n";
  for (const IterationLog& r : log.rows) {
    out << r.iteration << ',' << (r.phase == Phase::kNormal ? "normal" : "finetune") << ',' << format_number(r.t)
        << ',' << format_number(r.mu) << ',' << format_number(r.zeta_mean) << ',' << format_number(r.loss_midn);
    for (double l : r.loss_ref) out << ',' << format_number(l);
    out << ',' << r.pos_count << ',' << r.neg_before << ',' << r.neg_after << '\n';
  }
}

void write_timing_csv(std::ostream& out, const TrainLog& log) {
  out << "iteration,wallclock_ms\n";
  for (const IterationLog& r : log.rows) out << r.iteration << ',' << format_number(r.wallclock_ms) << '\n';
}

void save_model(const std::filesystem::path& path, const ToyModel& model, const ExperimentConfig& config) {
  json j;
  j["format"] = "opis-toy-model";
  j["version"] = 1;
  j["num_classes"] = model.num_classes();
  j["feature_dim"] = model.feature_dim();
  j["num_refinements"] = model.num_refinements();
  j["config"] = to_config_text(config);
  j["cls"] = head_to_json(model.cls);
  j["det"] = head_to_json(model.det);
  j["refine"] = json::array();
  for (const LinearHead& h : model.refine) j["refine"].push_back(head_to_json(h));

  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write model snapshot '" + path.string() + "'");
  out << j.dump(1) << '\n';
}

ModelSnapshot load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read model snapshot '" + path.string() + "'");
  json j;
  try {
    in >> j;
    if (j.at("format").get<std::string>() != "opis-toy-model") throw InvalidInput("not an opis model snapshot");
    ModelSnapshot snap{ToyModel::zeros(j.at("num_classes").get<std::size_t>(), j.at("feature_dim").get<std::size_t>(),
                                       j.at("num_refinements").get<std::size_t>()),
                       parse_config(j.at("config").get<std::string>())};
    head_from_json(j.at("cls"), snap.model.cls, "cls");
    head_from_json(j.at("det"), snap.model.det, "det");
    const auto& refine = j.at("refine");
    if (refine.size() != snap.model.refine.size()) throw InvalidInput("model snapshot: refinement count mismatch");
    for (std::size_t k = 0; k < refine.size(); ++k) {
      head_from_json(refine[k], snap.model.refine[k], "refine_" + std::to_string(k + 1));
    }
    return snap;
  } catch (const json::exception& e) {
    throw InvalidInput("malformed model snapshot '" + path.string() + "': " + e.what());
  }
}

void write_detections_jsonl(std::ostream& out, std::span<const SceneDetection> dets) {
  for (const SceneDetection& d : dets) {
    json j = {{"scene_id", d.scene_id}, {"class_id", d.det.class_id}, {"score", d.det.score},
              {"x1", d.det.box.x1},     {"y1", d.det.box.y1},         {"x2", d.det.box.x2},
              {"y2", d.det.box.y2}};
    out << j.dump() << '\n';
  }
}

void write_metrics_json(std::ostream& out, const EvalReport& report) {
  json ap = json::array();
  for (const auto& v : report.per_class_ap) ap.push_back(v ? json(*v) : json(nullptr));
  json j = {{"per_class_ap", std::move(ap)}, {"mAP", report.map}, {"CorLoc", report.corloc}};
  out << j.dump(2) << '\n';
}

}  // namespace opis
