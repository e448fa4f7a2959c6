#include "opis/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <algorithm>
#include <charconv>
#include <concepts>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

namespace opis {

namespace {

namespace pt = boost::property_tree;

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) throw ConfigError(key, "invalid value '" + text + "' for " + key);
  return value;
}

struct Binding {
  std::string section;
  std::string key;
  std::function<void(const std::string& full_key, const std::string& value)> set;
  std::function<std::string()> get;

  std::string full() const { return section + "." + key; }
};

Binding bind(std::string section, std::string key, double& ref) {
  return {std::move(section), std::move(key),
          [&ref](const std::string& k, const std::string& v) { ref = parse_number<double>(k, v); },
          [&ref] { return format_double(ref); }};
}

template <std::unsigned_integral T>
Binding bind(std::string section, std::string key, T& ref) {
  return {std::move(section), std::move(key),
          [&ref](const std::string& k, const std::string& v) { ref = parse_number<T>(k, v); },
          [&ref] { return std::to_string(ref); }};
}

Binding bind(std::string section, std::string key, Method& ref) {
  return {std::move(section), std::move(key),
          [&ref](const std::string& k, const std::string& v) {
            try {
              ref = parse_method(v);
            } catch (const InvalidInput& e) {
              throw ConfigError(k, k + ": " + e.what());
            }
          },
          [&ref] { return to_string(ref); }};
}

std::vector<Binding> bindings(ExperimentConfig& c) {
  TrainConfig& t = c.train;
  GenConfig& d = t.data;
  ScheduleState& s = t.schedule;
  return {
      bind("data", "classes", d.num_classes),
      bind("data", "feature_dim", d.feature_dim),
      bind("data", "proposals", d.num_proposals),
      bind("data", "min_objects", d.min_objects),
      bind("data", "max_objects", d.max_objects),
      bind("data", "image_size", d.image_size),
      bind("data", "min_object_size", d.min_object_size),
      bind("data", "max_object_size", d.max_object_size),
      bind("data", "clutter_rate", d.clutter_rate),
      bind("data", "jitter_scale", d.jitter_scale),
      bind("data", "feature_noise", d.feature_noise),
      bind("data", "train_scenes", t.num_train_scenes),
      bind("data", "eval_scenes", c.num_eval_scenes),
      bind("model", "refinements", t.num_refinements),
      bind("model", "init_std", t.init_std),
      bind("schedule", "iterations", t.iterations),
      bind("schedule", "finetune_fraction", t.finetune_fraction),
      bind("schedule", "learning_rate", t.learning_rate),
      bind("schedule", "lr_decay", t.lr_decay),
      bind("schedule", "momentum", t.momentum),
      bind("schedule", "weight_decay", t.weight_decay),
      bind("sampler", "mu_s", s.mu_s),
      bind("sampler", "alpha", s.alpha),
      bind("sampler", "neglect_base", s.neglect_base),
      bind("sampler", "ignore_iou", s.ignore_iou),
      bind("sampler", "positive_iou", s.positive_iou),
      bind("sampler", "bins", s.n_bins),
      bind("reweight", "beta", s.beta),
      bind("reweight", "gamma", s.gamma),
      bind("train", "seed", t.seed),
      bind("train", "method", t.method),
      bind("train", "batch_size", t.batch_size),
      bind("eval", "nms_iou", c.nms_iou),
      bind("eval", "score_floor", c.score_floor),
  };
}

}  // namespace

void ExperimentConfig::validate() const {
  train.validate();
  if (num_eval_scenes < 1) throw ConfigError("data.eval_scenes", "data.eval_scenes must be >= 1");
  if (!(nms_iou > 0.0 && nms_iou < 1.0)) throw ConfigError("eval.nms_iou", "eval.nms_iou must lie in (0, 1)");
  if (!(score_floor >= 0.0 && score_floor < 1.0)) {
    throw ConfigError("eval.score_floor", "eval.score_floor must lie in [0, 1)");
  }
}

ExperimentConfig parse_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("", std::string("malformed config: ") + e.message() + " (line " +
                              std::to_string(e.line()) + ")");
  }

  ExperimentConfig config;
  const std::vector<Binding> table = bindings(config);
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError(section, "unknown config key '" + section + "' outside any section");
    }
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      auto it = std::find_if(table.begin(), table.end(), [&](const Binding& b) { return b.full() == full; });
      if (it == table.end()) throw ConfigError(full, "unknown config key '" + full + "'");
      it->set(full, value.get_value<std::string>());
    }
  }
  try {
    config.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidInput& e) {
    std::string msg = e.what();
    throw ConfigError(msg.substr(0, msg.find(':')), msg);
  }
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot read config file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string to_config_text(const ExperimentConfig& config) {
  ExperimentConfig copy = config;
  const std::vector<Binding> table = bindings(copy);
  std::ostringstream out;
  std::string section;
  for (const Binding& b : table) {
    if (b.section != section) {
      if (!section.empty()) out << '\n';
      section = b.section;
      out << '[' << section << "]\n";
    }
    out << b.key << " = " << b.get() << '\n';
  }
  return out.str();
}

}  // namespace opis
