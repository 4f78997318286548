#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dirhoi/losses.hpp"
#include "dirhoi/model.hpp"
#include "dirhoi/synthetic.hpp"

namespace dirhoi {

enum class Optimizer { kMomentum, kAdamW };

struct TrainConfig {
  ModelConfig model = ModelConfig::desk();
  LossWeights loss;
  GeneratorConfig data;
  std::uint64_t data_seed = 7;
  std::uint64_t seed = 0;

  Optimizer optimizer = Optimizer::kMomentum;
  double learning_rate = 1e-4;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 0.1;  // global L2 norm; 0 disables
  std::size_t epochs = 60;
  std::size_t decay_epoch = 40;  // learning rate ×0.1 from this epoch on
  std::size_t batch_size = 4;

  std::size_t validation_scenes = 50;  // held out from the end of the training list
  std::size_t eval_every = 5;
  std::size_t top_k = 32;

  static TrainConfig desk();
  // 90 epochs with decay at 60, paper model profile.
  static TrainConfig paper();
  // Small grid and width for multi-seed ablations on one CPU core.
  static TrainConfig trend();

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// Flat "key = value" text, one field per line, '#' starts a comment. Keys
// are dotted (model.dim, loss.box, data.train_scenes, optim.learning_rate).
// Parsing starts from `base` (the desk profile by default); unknown keys and
// malformed values throw ParseError with the line number.
TrainConfig parse_config(const std::string& text, const TrainConfig& base = TrainConfig::desk());
std::string serialize_config(const TrainConfig& config);

TrainConfig load_config(const std::filesystem::path& path,
                        const TrainConfig& base = TrainConfig::desk());

// "desk", "trend" or "paper"; throws ConfigError otherwise.
TrainConfig profile_config(const std::string& name);
void save_config(const TrainConfig& config, const std::filesystem::path& path);

// Named ablation variants: baseline, sca, ipe, late-fusion, early-fusion,
// no-ipa-mask, no-pose-loss, no-sca-queries, no-gt-boxes. early-fusion is
// the full model.
const std::vector<std::string>& variant_names();
// Sets the variant switches of `model`; other fields are left alone.
void apply_variant(ModelConfig& model, const std::string& name);

}  // namespace dirhoi
