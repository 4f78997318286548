#include "dirhoi/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "dirhoi/errors.hpp"

namespace dirhoi {
namespace {

BBox row_box(const Tensor& boxes, std::size_t row) {
  return {boxes.at(row, 0), boxes.at(row, 1), boxes.at(row, 2), boxes.at(row, 3)};
}

std::mt19937_64 epoch_engine(std::uint64_t seed, std::size_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x5eedu};
  return std::mt19937_64(seq);
}

}  // namespace

double OptimizerState::clip_gradients(ParameterSet& params, double max_norm) {
  double squared = 0.0;
  for (auto& [name, tensor] : params.entries())
    for (double g : tensor.grad()) squared += g * g;
  const double norm = std::sqrt(squared);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto& [name, tensor] : params.entries())
      for (double& g : tensor.mutable_grad()) g *= factor;
  }
  return norm;
}

void OptimizerState::step(ParameterSet& params, double learning_rate) {
  auto& entries = params.entries();
  if (first_.size() != entries.size()) {
    first_.assign(entries.size(), {});
    second_.assign(entries.size(), {});
    for (std::size_t i = 0; i < entries.size(); ++i) {
      first_[i].assign(entries[i].second.numel(), 0.0);
      if (config_.optimizer == Optimizer::kAdamW) second_[i].assign(entries[i].second.numel(), 0.0);
    }
  }
  ++steps_;
  const double c = config_.weight_decay;
  if (config_.optimizer == Optimizer::kMomentum) {
    for (std::size_t i = 0; i < entries.size(); ++i) {
      auto values = entries[i].second.mutable_values();
      const auto grad = entries[i].second.grad();
      auto& velocity = first_[i];
      for (std::size_t j = 0; j < values.size(); ++j) {
        velocity[j] = config_.momentum * velocity[j] + grad[j] + c * values[j];
        values[j] -= learning_rate * velocity[j];
      }
    }
    return;
  }
  const double b1 = config_.adam_beta1;
  const double b2 = config_.adam_beta2;
  const double t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(b1, t);
  const double correction2 = 1.0 - std::pow(b2, t);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto values = entries[i].second.mutable_values();
    const auto grad = entries[i].second.grad();
    auto& m = first_[i];
    auto& v = second_[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * grad[j];
      v[j] = b2 * v[j] + (1.0 - b2) * grad[j] * grad[j];
      const double update = (m[j] / correction1) / (std::sqrt(v[j] / correction2) + config_.adam_eps);
      values[j] -= learning_rate * (update + c * values[j]);
    }
  }
}

double learning_rate_at(const TrainConfig& config, std::size_t epoch) {
  return epoch >= config.decay_epoch ? 0.1 * config.learning_rate : config.learning_rate;
}

std::vector<std::pair<std::string, double>> loss_terms(const LossBreakdown& loss) {
  std::vector<std::pair<std::string, double>> terms;
  auto add_set = [&](const std::string& prefix, const SetLoss& set) {
    if (!set.total.defined()) return;
    terms.emplace_back(prefix + ".box", set.box.item());
    terms.emplace_back(prefix + ".giou", set.giou.item());
    terms.emplace_back(prefix + ".cls", set.cls.item());
    terms.emplace_back(prefix + ".verb", set.verb.item());
  };
  add_set("learnable", loss.learnable_terms);
  add_set("sca", loss.sca_terms);
  terms.emplace_back("pose", loss.pose.item());
  terms.emplace_back("total", loss.total.item());
  return terms;
}

LossBreakdown scene_step(const Model& model, const Scene& scene, const TrainConfig& config,
                         double grad_scale) {
  const auto targets = scene_targets(scene, config.model.verb_classes);
  ForwardInputs inputs;
  inputs.features = scene_features(scene, config.data);
  inputs.training = true;
  inputs.gt_pairs = box_pairs(targets);
  const ModelOutput out = model.forward(inputs);
  LossBreakdown loss = total_loss(out, targets, config.loss, config.model);
  for (const auto& [name, value] : loss_terms(loss)) {
    if (!std::isfinite(value))
      throw NumericError("non-finite loss term '" + name + "' on scene " +
                         std::to_string(scene.id));
  }
  backward(scale(loss.total, grad_scale));
  return loss;
}

EvalScene predict_scene(const Model& model, const Scene& scene, const GeneratorConfig& data,
                        std::size_t top_k) {
  ForwardInputs inputs;
  inputs.features = scene_features(scene, data);
  const ModelOutput out = model.forward(inputs);

  EvalScene result;
  result.predictions = score_triplets(out, top_k);
  for (const auto& pair : scene.pairs) {
    result.gt.push_back({scene.persons[pair.person].box, scene.objects[pair.object].box,
                         scene.objects[pair.object].object_class, pair.verbs});
  }
  for (const auto& object : scene.objects) {
    if (std::find(result.object_classes.begin(), result.object_classes.end(),
                  object.object_class) == result.object_classes.end())
      result.object_classes.push_back(object.object_class);
  }
  std::sort(result.object_classes.begin(), result.object_classes.end());

  if (out.keypoints.defined()) {
    for (const auto& pair : scene.pairs) {
      const auto& gt = result.gt[&pair - scene.pairs.data()];
      double best_overlap = -1.0;
      std::size_t best = out.learnable_rows;
      for (std::size_t q = 0; q < out.learnable_rows; ++q) {
        const double overlap = std::min(iou(row_box(out.human_boxes, q), gt.human),
                                        iou(row_box(out.object_boxes, q), gt.object));
        if (overlap >= kIouThreshold && overlap > best_overlap) {
          best_overlap = overlap;
          best = q;
        }
      }
      if (best < out.learnable_rows)
        result.keypoint_error.push_back(
            keypoint_row_error(out.keypoints, best, scene.persons[pair.person].keypoints));
    }
  }
  return result;
}

EvalReport evaluate_model(const Model& model, std::span<const Scene> scenes,
                          const DatasetSplit& split, std::size_t top_k) {
  std::vector<EvalScene> evals;
  evals.reserve(scenes.size());
  for (const auto& scene : scenes) evals.push_back(predict_scene(model, scene, split.config, top_k));
  return evaluate(evals, split.config.verb_classes, split.config.object_classes,
                  split.rare_categories);
}

std::string metric_line(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["lr"] = r.learning_rate;
  j["loss"] = r.loss;
  j["loss_learnable"] = r.learnable;
  j["loss_sca"] = r.sca;
  j["loss_pose"] = r.pose;
  if (r.evaluated) j["val_map"] = r.validation_map;
  return j.dump();
}

TrainResult train(Model& model, const TrainConfig& config, const DatasetSplit& split,
                  const TrainHooks& hooks) {
  config.validate();
  if (!(model.config() == config.model)) throw ConfigError("model built from a different config");
  if (split.train.size() <= config.validation_scenes)
    throw ConfigError("not enough training scenes for the validation hold-out");

  const std::size_t n_train = split.train.size() - config.validation_scenes;
  const std::span<const Scene> training(split.train.data(), n_train);
  const std::span<const Scene> validation(split.train.data() + n_train, config.validation_scenes);

  ParameterSet& params = model.parameters();
  OptimizerState optimizer(config);
  TrainResult result;
  std::vector<std::size_t> order(n_train);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto engine = epoch_engine(config.seed, epoch);
    std::shuffle(order.begin(), order.end(), engine);

    EpochRecord record;
    record.epoch = epoch;
    record.learning_rate = learning_rate_at(config, epoch);
    for (std::size_t start = 0; start < n_train; start += config.batch_size) {
      const std::size_t stop = std::min(n_train, start + config.batch_size);
      const double scale = 1.0 / static_cast<double>(stop - start);
      params.zero_grad();
      for (std::size_t i = start; i < stop; ++i) {
        const LossBreakdown loss = scene_step(model, training[order[i]], config, scale);
        record.loss += loss.total.item();
        record.learnable += loss.learnable.item();
        record.sca += loss.sca.item();
        record.pose += loss.pose.item();
      }
      OptimizerState::clip_gradients(params, config.grad_clip);
      optimizer.step(params, record.learning_rate);
    }
    const double n = static_cast<double>(n_train);
    record.loss /= n;
    record.learnable /= n;
    record.sca /= n;
    record.pose /= n;

    const bool last = epoch + 1 == config.epochs;
    if (!validation.empty() && ((epoch + 1) % config.eval_every == 0 || last)) {
      record.evaluated = true;
      record.validation_map = evaluate_model(model, validation, split, config.top_k).dt.full;
      if (record.validation_map > result.best_validation_map) {
        result.best_validation_map = record.validation_map;
        result.best_epoch = epoch;
        result.best_checkpoint = encode_checkpoint(params);
      }
    } else if (validation.empty() && last) {
      result.best_epoch = epoch;
      result.best_checkpoint = encode_checkpoint(params);
    }
    result.metric_log += metric_line(record) + '\n';
    result.epochs.push_back(record);
    if (hooks.on_epoch) hooks.on_epoch(record);
  }
  if (!result.best_checkpoint.empty())
    load_checkpoint(params, decode_checkpoint(result.best_checkpoint));
  params.zero_grad();
  return result;
}

void write_training_outputs(const TrainResult& result, const TrainConfig& config,
                            const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "checkpoint.bin", std::ios::binary);
    out.write(reinterpret_cast<const char*>(result.best_checkpoint.data()),
              static_cast<std::streamsize>(result.best_checkpoint.size()));
    if (!out) throw std::runtime_error("cannot write " + (dir / "checkpoint.bin").string());
  }
  {
    std::ofstream out(dir / "metrics.jsonl", std::ios::binary);
    out << result.metric_log;
    if (!out) throw std::runtime_error("cannot write " + (dir / "metrics.jsonl").string());
  }
  save_config(config, dir / "config.txt");
}

std::vector<AblationRun> ablate(const TrainConfig& config, const DatasetSplit& split,
                                const std::vector<std::string>& variants,
                                const std::vector<std::uint64_t>& seeds,
                                const std::function<void(const std::string&)>& progress) {
  std::vector<AblationRun> runs;
  for (const auto& variant : variants) {
    AblationRun run;
    run.variant = variant;
    run.seeds = seeds;
    for (std::uint64_t seed : seeds) {
      TrainConfig c = config;
      apply_variant(c.model, variant);
      c.seed = seed;
      Model model(c.model, seed);
      train(model, c, split);
      const EvalReport report = evaluate_model(model, split.test, split, c.top_k);
      run.per_seed.push_back(report.dt);
      if (progress) {
        std::ostringstream os;
        os << std::fixed << std::setprecision(2) << variant << " seed " << seed << ": DT full "
           << 100.0 * report.dt.full << " rare " << 100.0 * report.dt.rare << " non-rare "
           << 100.0 * report.dt.non_rare;
        progress(os.str());
      }
    }
    const double k = static_cast<double>(run.per_seed.size());
    for (const auto& s : run.per_seed) {
      run.mean.full += s.full / k;
      run.mean.rare += s.rare / k;
      run.mean.non_rare += s.non_rare / k;
    }
    if (!run.per_seed.empty()) {
      run.mean.full_count = run.per_seed.front().full_count;
      run.mean.rare_count = run.per_seed.front().rare_count;
      run.mean.non_rare_count = run.per_seed.front().non_rare_count;
    }
    runs.push_back(std::move(run));
  }
  return runs;
}

std::string format_ablation(const std::vector<AblationRun>& runs) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << std::left << std::setw(16) << "variant" << std::right << std::setw(8) << "full"
     << std::setw(8) << "rare" << std::setw(10) << "non-rare" << "   per-seed full\n";
  for (const auto& run : runs) {
    os << std::left << std::setw(16) << run.variant << std::right << std::setw(8)
       << 100.0 * run.mean.full << std::setw(8) << 100.0 * run.mean.rare << std::setw(10)
       << 100.0 * run.mean.non_rare << "  ";
    for (const auto& s : run.per_seed) os << ' ' << 100.0 * s.full;
    os << '\n';
  }
  return os.str();
}

}  // namespace dirhoi
