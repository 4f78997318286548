#include "dirhoi/config.hpp"

#include <charconv>
#include <concepts>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "dirhoi/errors.hpp"

namespace dirhoi {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Every serialized field, in file order. The same walk drives parsing and
// printing so the two cannot drift apart.
template <class Config, class Visit>
void visit_fields(Config& c, Visit&& f) {
  auto& m = c.model;
  f("model.grid_rows", m.grid_rows);
  f("model.grid_cols", m.grid_cols);
  f("model.raw_features", m.raw_features);
  f("model.dim", m.dim);
  f("model.ffn_dim", m.ffn_dim);
  f("model.num_queries", m.num_queries);
  f("model.max_sca_queries", m.max_sca_queries);
  f("model.encoder_layers", m.encoder_layers);
  f("model.detection_layers", m.detection_layers);
  f("model.interaction_layers", m.interaction_layers);
  f("model.pose_layers", m.pose_layers);
  f("model.heads", m.heads);
  f("model.human_heads", m.grouping.human);
  f("model.object_heads", m.grouping.object);
  f("model.global_heads", m.grouping.global);
  f("model.keypoints", m.keypoints);
  f("model.object_classes", m.object_classes);
  f("model.verb_classes", m.verb_classes);
  f("model.layer_norm_eps", m.layer_norm_eps);
  f("model.positional_encoding", m.positional_encoding);
  f("model.use_sca", m.use_sca);
  f("model.sca_queries", m.sca_queries);
  f("model.sca_gt_masks", m.sca_gt_masks);
  f("model.use_ipe", m.use_ipe);
  f("model.fusion", m.fusion);
  f("model.use_ipa_mask", m.use_ipa_mask);
  f("model.use_pose_loss", m.use_pose_loss);
  f("model.isolate_learnable", m.isolate_learnable);

  auto& l = c.loss;
  f("loss.alpha", l.alpha);
  f("loss.beta", l.beta);
  f("loss.gamma", l.gamma);
  f("loss.box", l.box);
  f("loss.giou", l.giou);
  f("loss.cls", l.cls);
  f("loss.verb", l.verb);
  f("loss.focal_alpha", l.focal_alpha);
  f("loss.focal_gamma", l.focal_gamma);
  f("loss.background_weight", l.background_weight);

  auto& d = c.data;
  f("data.seed", c.data_seed);
  f("data.grid_rows", d.grid_rows);
  f("data.grid_cols", d.grid_cols);
  f("data.raw_features", d.raw_features);
  f("data.keypoints", d.keypoints);
  f("data.object_classes", d.object_classes);
  f("data.verb_classes", d.verb_classes);
  f("data.train_scenes", d.train_scenes);
  f("data.test_scenes", d.test_scenes);
  f("data.feature_noise", d.feature_noise);
  f("data.pose_label_noise", d.pose_label_noise);
  f("data.rare_class_weight", d.rare_class_weight);

  f("optim.optimizer", c.optimizer);
  f("optim.learning_rate", c.learning_rate);
  f("optim.momentum", c.momentum);
  f("optim.weight_decay", c.weight_decay);
  f("optim.adam_beta1", c.adam_beta1);
  f("optim.adam_beta2", c.adam_beta2);
  f("optim.adam_eps", c.adam_eps);
  f("optim.grad_clip", c.grad_clip);

  f("train.seed", c.seed);
  f("train.epochs", c.epochs);
  f("train.decay_epoch", c.decay_epoch);
  f("train.batch_size", c.batch_size);
  f("train.validation_scenes", c.validation_scenes);
  f("train.eval_every", c.eval_every);
  f("train.top_k", c.top_k);
}

template <class T>
concept Count = std::unsigned_integral<T> && !std::same_as<T, bool>;

template <Count T>
std::string to_text(T v) {
  return std::to_string(v);
}
std::string to_text(bool v) { return v ? "true" : "false"; }
std::string to_text(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}
std::string to_text(Fusion v) { return v == Fusion::kEarly ? "early" : "late"; }
std::string to_text(Optimizer v) { return v == Optimizer::kMomentum ? "momentum" : "adamw"; }

template <class T>
bool from_chars_all(const std::string& text, T& out) {
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

template <Count T>
bool from_text(const std::string& s, T& out) {
  return from_chars_all(s, out);
}
bool from_text(const std::string& s, double& out) { return from_chars_all(s, out); }
bool from_text(const std::string& s, bool& out) {
  if (s == "true") return out = true, true;
  if (s == "false") return out = false, true;
  return false;
}
bool from_text(const std::string& s, Fusion& out) {
  if (s == "early") return out = Fusion::kEarly, true;
  if (s == "late") return out = Fusion::kLate, true;
  return false;
}
bool from_text(const std::string& s, Optimizer& out) {
  if (s == "momentum") return out = Optimizer::kMomentum, true;
  if (s == "adamw") return out = Optimizer::kAdamW, true;
  return false;
}

}  // namespace

TrainConfig TrainConfig::desk() { return TrainConfig{}; }

TrainConfig TrainConfig::paper() {
  TrainConfig c;
  c.model = ModelConfig::paper();
  c.optimizer = Optimizer::kAdamW;
  c.epochs = 90;
  c.decay_epoch = 60;
  return c;
}

TrainConfig TrainConfig::trend() {
  TrainConfig c;
  c.model.grid_rows = c.data.grid_rows = 8;
  c.model.grid_cols = c.data.grid_cols = 8;
  c.model.dim = 32;
  c.model.ffn_dim = 64;
  c.data.train_scenes = 550;
  c.data.test_scenes = 200;
  c.optimizer = Optimizer::kAdamW;
  c.learning_rate = 1e-3;
  c.grad_clip = 1.0;
  c.epochs = 30;
  c.decay_epoch = 24;
  c.batch_size = 1;
  return c;
}

void TrainConfig::validate() const {
  model.validate();
  data.validate();
  if (model.grid_rows != data.grid_rows || model.grid_cols != data.grid_cols)
    throw ConfigError("model and data grids differ");
  if (model.raw_features != data.raw_features)
    throw ConfigError("model and data feature channels differ");
  if (model.keypoints != data.keypoints || model.object_classes != data.object_classes ||
      model.verb_classes != data.verb_classes)
    throw ConfigError("model and data label spaces differ");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (eval_every == 0) throw ConfigError("eval_every must be positive");
  if (validation_scenes >= data.train_scenes)
    throw ConfigError("validation_scenes must leave training scenes");
  if (grad_clip < 0.0 || weight_decay < 0.0) throw ConfigError("negative regularizer");
}

TrainConfig parse_config(const std::string& text, const TrainConfig& base) {
  TrainConfig config = base;
  std::map<std::string, std::size_t> seen;
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError(line, "expected key = value");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (auto it = seen.find(key); it != seen.end())
      throw ParseError(line, "duplicate key '" + key + "' (first on line " +
                                 std::to_string(it->second) + ")");
    seen[key] = line;
    bool known = false;
    visit_fields(config, [&](const char* name, auto& field) {
      if (known || key != name) return;
      known = true;
      if (!from_text(value, field))
        throw ParseError(line, "bad value '" + value + "' for " + key);
    });
    if (!known) throw ParseError(line, "unknown key '" + key + "'");
  }
  return config;
}

std::string serialize_config(const TrainConfig& config) {
  std::ostringstream os;
  TrainConfig copy = config;
  visit_fields(copy, [&](const char* name, auto& field) {
    os << name << " = " << to_text(field) << '\n';
  });
  return os.str();
}

TrainConfig load_config(const std::filesystem::path& path, const TrainConfig& base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), base);
}

TrainConfig profile_config(const std::string& name) {
  if (name == "desk") return TrainConfig::desk();
  if (name == "trend") return TrainConfig::trend();
  if (name == "paper") return TrainConfig::paper();
  throw ConfigError("unknown profile '" + name + "'");
}

void save_config(const TrainConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << serialize_config(config);
}

const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> names{
      "baseline",    "sca",          "ipe",            "late-fusion", "early-fusion",
      "no-ipa-mask", "no-pose-loss", "no-sca-queries", "no-gt-boxes"};
  return names;
}

void apply_variant(ModelConfig& m, const std::string& name) {
  m.use_sca = false;
  m.sca_queries = true;
  m.sca_gt_masks = true;
  m.use_ipe = false;
  m.fusion = Fusion::kEarly;
  m.use_ipa_mask = true;
  m.use_pose_loss = true;
  if (name == "baseline") {
    m.use_ipa_mask = false;
    m.use_pose_loss = false;
  } else if (name == "sca") {
    m.use_sca = true;
  } else if (name == "ipe") {
    m.use_ipe = true;
  } else if (name == "late-fusion") {
    m.use_sca = true;
    m.use_ipe = true;
    m.fusion = Fusion::kLate;
  } else if (name == "early-fusion") {
    m.use_sca = true;
    m.use_ipe = true;
  } else if (name == "no-ipa-mask") {
    m.use_ipe = true;
    m.use_ipa_mask = false;
  } else if (name == "no-pose-loss") {
    m.use_ipe = true;
    m.use_pose_loss = false;
  } else if (name == "no-sca-queries") {
    m.use_sca = true;
    m.sca_queries = false;
  } else if (name == "no-gt-boxes") {
    m.use_sca = true;
    m.sca_gt_masks = false;
  } else {
    throw ConfigError("unknown variant '" + name + "'");
  }
}

}  // namespace dirhoi
