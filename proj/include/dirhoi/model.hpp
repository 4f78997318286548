#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dirhoi/attention.hpp"
#include "dirhoi/hoi.hpp"
#include "dirhoi/parameters.hpp"
#include "dirhoi/tensor.hpp"

namespace dirhoi {

enum class Fusion { kEarly, kLate };

struct ModelConfig {
  std::size_t grid_rows = 16;
  std::size_t grid_cols = 16;
  std::size_t raw_features = 8;
  std::size_t dim = 64;
  std::size_t ffn_dim = 128;
  std::size_t num_queries = 16;
  std::size_t max_sca_queries = 8;
  std::size_t encoder_layers = 2;
  std::size_t detection_layers = 2;
  std::size_t interaction_layers = 2;
  std::size_t pose_layers = 2;
  std::size_t heads = 8;
  HeadGrouping grouping{2, 2, 4};
  std::size_t keypoints = 5;
  std::size_t object_classes = 4;
  std::size_t verb_classes = 6;
  double layer_norm_eps = 1e-5;
  bool positional_encoding = true;

  // Variant switches.
  bool use_sca = true;        // shunted cross-attention during training
  bool sca_queries = true;    // false: shunt the learnable queries instead
  bool sca_gt_masks = true;   // false: masks from the rows' own predicted boxes
  bool use_ipe = true;        // pose decoder + keypoint head
  Fusion fusion = Fusion::kEarly;
  bool use_ipa_mask = true;   // IPA keypoint weights in the pose loss
  bool use_pose_loss = true;
  // Learnable rows never attend to SCA rows in decoder self-attention.
  bool isolate_learnable = true;

  // H=W=16, D=64, T=8, 2+2+2+2 layers, K=5, N_q=16.
  static ModelConfig desk();
  // D=256, N_q=64, CDN-S depths; documentation only at this scale.
  static ModelConfig paper();

  // Throws ConfigError on inconsistent settings.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct ForwardInputs {
  Tensor features;  // (H·W)×raw_features
  bool training = false;
  std::vector<BoxPair> gt_pairs;  // used only when training
  AttentionRecorder* recorder = nullptr;
};

struct ModelOutput {
  std::size_t learnable_rows = 0;
  std::size_t sca_rows = 0;

  Tensor human_boxes;    // rows×4, (cx, cy, w, h) after sigmoid
  Tensor object_boxes;   // rows×4
  Tensor object_logits;  // rows×(C+1); last column is background
  Tensor verb_logits;    // rows×V
  Tensor keypoints;      // rows×2K, x/y interleaved, after sigmoid (IPE only)
  Tensor keypoint_weights;  // rows×K softmax weights (training with IPA only)

  Tensor detection_embedding;    // Q^int
  Tensor appearance_embedding;   // C^a
  Tensor pose_embedding;         // C^p
  Tensor interaction_embedding;  // C^int (early fusion; C^a otherwise)
  Tensor interaction_queries;    // what the interaction decoder consumed
  Tensor pose_queries;           // what the pose decoder consumed

  // Shunted masks used in the interaction decoder, applied to rows
  // [mask_first_row, mask_first_row + masks.size()).
  ShuntedMaskSet masks;
  std::size_t mask_first_row = 0;
};

class Model {
 public:
  Model(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }
  std::size_t parameter_count() const { return params_.scalar_count(); }

  ModelOutput forward(const ForwardInputs& inputs) const;

  // Encoder memory E for a scene's raw patch features.
  Tensor encode(const Tensor& features) const;

  // Q^s rows (one per pair, capped at max_sca_queries) and their masks.
  std::pair<Tensor, ShuntedMaskSet> build_sca_queries(
      const std::vector<BoxPair>& pairs) const;

  // Fixed 2-D sinusoidal code of every patch, (H·W)×D.
  const Tensor& positional_code() const { return positions_; }

 private:
  void build_parameters();
  void add_linear(const std::string& name, std::size_t in, std::size_t out,
                  bool bias = true);
  void add_attention(const std::string& name);
  void add_norm(const std::string& name);
  void add_ffn(const std::string& name);
  void add_decoder(const std::string& name, std::size_t layers);

  Tensor linear(const std::string& name, const Tensor& x) const;
  Tensor norm(const std::string& name, const Tensor& x) const;
  Tensor ffn(const std::string& name, const Tensor& x) const;
  Tensor self_attention(const std::string& name, const Tensor& x,
                        const Tensor& pos,
                        const std::vector<std::size_t>& visible) const;
  Tensor decoder(const std::string& name, std::size_t layers,
                 const Tensor& queries, const Tensor& memory,
                 const std::vector<std::size_t>& visible,
                 const AttentionOptions& cross_template,
                 AttentionRecorder* recorder, std::size_t record_offset) const;

  ModelConfig config_;
  ParameterSet params_;
  Tensor positions_;
};

// Sinusoidal code of a scalar in [0, 1]: sin/cos pairs at `freqs`
// frequencies spaced geometrically from π to 16π.
void sinusoid(double x, std::size_t freqs, double* out);

}  // namespace dirhoi
