#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace opis::cli;

  CLI::App app{"opis: progressive instance balancing on synthetic detection scenes"};
  app.require_subcommand(1);

  std::string config_path = "opis.ini";
  std::string out = "out";
  std::string model_path;
  std::uint64_t seed = 1;
  std::string method;
  std::size_t iterations = 0;
  std::size_t iteration = 0;
  std::vector<std::string> methods{"baseline", "pib_only", "pir_only", "opis"};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};

  auto add_overrides = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "Root seed");
    cmd->add_option("--method", method, "baseline | pib_only | pir_only | opis");
    cmd->add_option("--iterations-override", iterations, "Total training iterations")->check(CLI::PositiveNumber);
  };

  auto* train = app.add_subcommand("train", "Train a model and write its log and snapshot");
  train->add_option("--config", config_path)->required();
  train->add_option("--out", out, "Output directory");
  add_overrides(train);

  auto* eval = app.add_subcommand("eval", "Evaluate a model snapshot on regenerated scenes");
  eval->add_option("--model", model_path)->required();
  eval->add_option("--seed", seed, "Dataset seed");
  eval->add_option("--out", out, "Output directory");

  auto* compare = app.add_subcommand("compare", "Train and evaluate methods x seeds");
  compare->add_option("--config", config_path)->required();
  compare->add_option("--methods", methods)->delimiter(',');
  compare->add_option("--seeds", seeds)->delimiter(',');
  compare->add_option("--out", out, "Output CSV path");
  compare->add_option("--iterations-override", iterations)->check(CLI::PositiveNumber);

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check on a random model and scene");
  gradcheck->add_option("--seed", seed);

  auto* demo = app.add_subcommand("sample-demo", "Trace negative sampling on one scene");
  demo->add_option("--config", config_path)->required();
  demo->add_option("--iteration", iteration)->required();
  add_overrides(demo);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  Overrides ov;
  auto collect = [&](CLI::App* cmd) {
    if (cmd->count("--seed") > 0) ov.seed = seed;
    if (cmd->count("--method") > 0) ov.method = method;
    if (cmd->count("--iterations-override") > 0) ov.iterations = iterations;
  };

  if (*train) {
    collect(train);
    return cmd_train(config_path, out, ov, std::cout, std::cerr);
  }
  if (*eval) return cmd_eval(model_path, seed, out, std::cout, std::cerr);
  if (*compare) {
    if (compare->count("--iterations-override") > 0) ov.iterations = iterations;
    const std::string path = compare->count("--out") > 0 ? out : "compare.csv";
    return cmd_compare(config_path, methods, seeds, path, ov, std::cout, std::cerr);
  }
  if (*gradcheck) return cmd_gradcheck(seed, std::cout, std::cerr);
  collect(demo);
  return cmd_sample_demo(config_path, iteration, ov, std::cout, std::cerr);
}
