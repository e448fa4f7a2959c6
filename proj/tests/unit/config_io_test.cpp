#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "opis/config.hpp"
#include "opis/io.hpp"

namespace opis {
namespace {

TEST(ParseConfig, EmptyTextGivesDefaults) {
  const ExperimentConfig c = parse_config("");
  EXPECT_EQ(c.train.iterations, 4000u);
  EXPECT_EQ(c.train.method, Method::kOpis);
  EXPECT_EQ(c.train.schedule.mu_s, 20.0);
  EXPECT_EQ(c.num_eval_scenes, 100u);
}

TEST(ParseConfig, ReadsEverySection) {
  const ExperimentConfig c = parse_config(
      "[data]\nclasses = 3\nproposals = 40\n"
      "[model]\nrefinements = 2\n"
      "[schedule]\niterations = 50\nlearning_rate = 0.02\n"
      "[sampler]\nmu_s = 12\nbins = 5\n"
      "[reweight]\nbeta = 0.25\ngamma = 0.5\n"
      "[train]\nseed = 77\nmethod = pib_only\n"
      "[eval]\nnms_iou = 0.4\n");
  EXPECT_EQ(c.train.data.num_classes, 3u);
  EXPECT_EQ(c.train.data.num_proposals, 40u);
  EXPECT_EQ(c.train.num_refinements, 2u);
  EXPECT_EQ(c.train.iterations, 50u);
  EXPECT_EQ(c.train.learning_rate, 0.02);
  EXPECT_EQ(c.train.schedule.mu_s, 12.0);
  EXPECT_EQ(c.train.schedule.n_bins, 5u);
  EXPECT_EQ(c.train.schedule.beta, 0.25);
  EXPECT_EQ(c.train.schedule.gamma, 0.5);
  EXPECT_EQ(c.train.seed, 77u);
  EXPECT_EQ(c.train.method, Method::kPibOnly);
  EXPECT_EQ(c.nms_iou, 0.4);
}

std::string error_key(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<no error>";
}

TEST(ParseConfig, UnknownKeysAndSectionsAreNamed) {
  EXPECT_EQ(error_key("[sampler]\nmu_z = 3\n"), "sampler.mu_z");
  EXPECT_EQ(error_key("[optimizer]\nlr = 3\n"), "optimizer.lr");
  EXPECT_EQ(error_key("stray = 1\n"), "stray");
}

TEST(ParseConfig, BadValuesAreNamed) {
  EXPECT_EQ(error_key("[schedule]\niterations = many\n"), "schedule.iterations");
  EXPECT_EQ(error_key("[schedule]\niterations = -5\n"), "schedule.iterations");
  EXPECT_EQ(error_key("[train]\nmethod = oicr\n"), "train.method");
  EXPECT_EQ(error_key("[reweight]\nbeta = 0.5x\n"), "reweight.beta");
}

TEST(ParseConfig, ValidatesRanges) {
  EXPECT_THROW(parse_config("[sampler]\nmu_s = 2\n"), InvalidInput);
  EXPECT_THROW(parse_config("[sampler]\nignore_iou = 0.6\n"), InvalidInput);
}

TEST(ConfigText, RoundTrips) {
  ExperimentConfig c;
  c.train.seed = 123;
  c.train.learning_rate = 0.1 + 0.2;
  c.train.method = Method::kPirOnly;
  c.train.data.clutter_rate = 0.55;
  const std::string text = to_config_text(c);
  EXPECT_EQ(to_config_text(parse_config(text)), text);
  EXPECT_EQ(parse_config(text).train.learning_rate, 0.1 + 0.2);
}

TEST(LoadConfig, MissingFileNamesPath) {
  try {
    load_config("/definitely/not/here.ini");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("/definitely/not/here.ini"), std::string::npos);
  }
}

TEST(FormatNumber, ShortestRoundTrip) {
  EXPECT_EQ(format_number(0.5), "0.5");
  EXPECT_EQ(format_number(20.0), "20");
  const double v = 0.1 + 0.2;
  EXPECT_EQ(std::stod(format_number(v)), v);
}

TEST(TrainlogCsv, HeaderAndRows) {
  TrainLog log;
  IterationLog row;
  row.iteration = 3;
  row.phase = Phase::kFinetune;
  row.t = 0.25;
  row.mu = 16;
  row.loss_midn = 1.5;
  row.loss_ref = {0.1, 0.2};
  row.pos_count = 4;
  row.neg_before = 9;
  row.neg_after = 7;
  log.rows.push_back(row);
  std::ostringstream out;
  write_trainlog_csv(out, log, 2);
  EXPECT_EQ(out.str(),
            "iteration,phase,T,mu,zeta_mean,loss_midn,loss_ref_1,loss_ref_2,pos_count,neg_count_before,"
            "neg_count_after\n3,finetune,0.25,16,1,1.5,0.1,0.2,4,9,7\n");
}

TEST(ModelSnapshot, RoundTrips) {
  const auto path = std::filesystem::temp_directory_path() / "opis_model_roundtrip.json";
  ExperimentConfig c;
  c.train.data.num_classes = 3;
  c.train.data.feature_dim = 5;
  c.train.num_refinements = 2;
  const ToyModel m = ToyModel::random(3, 5, 2, 0.7, 4);
  save_model(path, m, c);
  const ModelSnapshot snap = load_model(path);
  EXPECT_EQ(snap.model.cls.weight, m.cls.weight);
  EXPECT_EQ(snap.model.det.bias, m.det.bias);
  EXPECT_EQ(snap.model.refine[1].weight, m.refine[1].weight);
  EXPECT_EQ(to_config_text(snap.config), to_config_text(c));
  std::filesystem::remove(path);
}

TEST(ModelSnapshot, RejectsGarbage) {
  const auto path = std::filesystem::temp_directory_path() / "opis_model_garbage.json";
  std::ofstream(path) << "{\"format\": \"something-else\"}";
  EXPECT_THROW(load_model(path), InvalidInput);
  std::ofstream(path) << "not json";
  EXPECT_THROW(load_model(path), InvalidInput);
  std::filesystem::remove(path);
}

TEST(MetricsJson, NullForUndefinedClasses) {
  EvalReport r;
  r.per_class_ap = {0.5, std::nullopt};
  r.map = 0.5;
  r.corloc = 0.25;
  std::ostringstream out;
  write_metrics_json(out, r);
  EXPECT_NE(out.str().find("null"), std::string::npos);
  EXPECT_NE(out.str().find("\"CorLoc\": 0.25"), std::string::npos);
}

}  // namespace
}  // namespace opis
