#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dirhoi/config.hpp"
#include "dirhoi/evaluation.hpp"
#include "dirhoi/losses.hpp"
#include "dirhoi/model.hpp"
#include "dirhoi/synthetic.hpp"

namespace dirhoi {

// In-place update of every parameter from its accumulated gradient.
class OptimizerState {
 public:
  explicit OptimizerState(const TrainConfig& config) : config_(config) {}

  // Scales gradients so their global L2 norm is at most `max_norm`; returns
  // the norm before clipping.
  static double clip_gradients(ParameterSet& params, double max_norm);

  void step(ParameterSet& params, double learning_rate);

 private:
  const TrainConfig& config_;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
  std::size_t steps_ = 0;
};

// Learning rate at a (0-based) epoch: base until decay_epoch, ×0.1 after.
double learning_rate_at(const TrainConfig& config, std::size_t epoch);

// Forward, loss and backward for one scene, with gradients scaled by
// `grad_scale`. Throws NumericError naming the first non-finite term.
LossBreakdown scene_step(const Model& model, const Scene& scene, const TrainConfig& config,
                         double grad_scale);

// Names of the loss terms in check order, paired with their values.
std::vector<std::pair<std::string, double>> loss_terms(const LossBreakdown& loss);

// Inference on one scene, ready for evaluate().
EvalScene predict_scene(const Model& model, const Scene& scene, const GeneratorConfig& data,
                        std::size_t top_k);

EvalReport evaluate_model(const Model& model, std::span<const Scene> scenes,
                          const DatasetSplit& split, std::size_t top_k);

struct EpochRecord {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double loss = 0.0;
  double learnable = 0.0;
  double sca = 0.0;
  double pose = 0.0;
  bool evaluated = false;
  double validation_map = 0.0;
};

std::string metric_line(const EpochRecord& record);

struct TrainResult {
  std::vector<EpochRecord> epochs;
  std::vector<std::uint8_t> best_checkpoint;  // highest validation DT mAP
  std::size_t best_epoch = 0;
  double best_validation_map = -1.0;
  std::string metric_log;  // one JSON object per line
};

struct TrainHooks {
  std::function<void(const EpochRecord&)> on_epoch;
};

// Trains a fresh model. The model passed in ends holding the best
// checkpoint's weights.
TrainResult train(Model& model, const TrainConfig& config, const DatasetSplit& split,
                  const TrainHooks& hooks = {});

// Writes checkpoint.bin, metrics.jsonl and config.txt into `dir`.
void write_training_outputs(const TrainResult& result, const TrainConfig& config,
                            const std::filesystem::path& dir);

struct AblationRun {
  std::string variant;
  std::vector<std::uint64_t> seeds;
  std::vector<ModeSummary> per_seed;  // DT-mode summaries on the test split
  ModeSummary mean;
};

// Trains every variant for every seed on one shared dataset and evaluates
// on the test split.
std::vector<AblationRun> ablate(const TrainConfig& config, const DatasetSplit& split,
                                const std::vector<std::string>& variants,
                                const std::vector<std::uint64_t>& seeds,
                                const std::function<void(const std::string&)>& progress = {});

std::string format_ablation(const std::vector<AblationRun>& runs);

}  // namespace dirhoi
