#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dirhoi/hoi.hpp"
#include "dirhoi/model.hpp"
#include "dirhoi/tensor.hpp"

namespace dirhoi {

struct LossWeights {
  double alpha = 1.0;   // learnable-query set loss
  double beta = 1.0;    // SCA-query set loss
  double gamma = 1.0;   // pose loss
  double box = 2.5;     // lambda_b, L1
  double giou = 1.0;    // lambda_u
  double cls = 1.0;     // lambda_c
  double verb = 1.0;    // lambda_a
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;
  double background_weight = 0.1;  // class weight of the no-object target

  bool operator==(const LossWeights&) const = default;
};

// ---- matching -------------------------------------------------------------------

struct CostMatrix {
  std::size_t rows = 0;  // ground-truth pairs
  std::size_t cols = 0;  // queries
  std::vector<double> values;

  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

struct MatchResult {
  std::vector<std::size_t> query_of_gt;  // injective gt -> query
  double cost = 0.0;                     // sum of matched entries, in gt order
};

// Minimum-cost injective assignment of every row to a column. Requires
// rows <= cols and finite costs.
MatchResult hungarian_match(const CostMatrix& cost);
MatchResult hungarian_match(const Tensor& cost);

// Pairwise cost between GT pairs and output rows [first, first + count):
//   box·(L1_h + L1_o) + giou·(GIoU-loss_h + GIoU-loss_o)
//   - cls·p(class) + verb·mean_v focal(verb_v)
CostMatrix matching_cost(const ModelOutput& out, std::size_t first, std::size_t count,
                         const std::vector<PairTarget>& targets, const LossWeights& w);

// ---- loss terms -------------------------------------------------------------------

// Σ over rows of GIoU-loss(pred_i, gt_i); pred rows×4 (cx, cy, w, h).
Tensor giou_loss_sum(const Tensor& pred, std::span<const BBox> gt);

// Σ_i w_i·CE(logits_i, target_i) / Σ_i w_i.
Tensor weighted_cross_entropy(const Tensor& logits, std::span<const std::size_t> target,
                              std::span<const double> weight);

// Σ over all elements of the sigmoid focal loss.
Tensor sigmoid_focal_loss(const Tensor& logits, std::span<const double> targets,
                          double alpha, double gamma);

struct SetLoss {
  Tensor total;
  Tensor box;   // L_b
  Tensor giou;  // L_u
  Tensor cls;   // L_c
  Tensor verb;  // L_a
};

// Set loss over rows [first, first + count) given row_of_gt[g] = matched row
// offset (relative to first) for each target g.
SetLoss loss_set(const ModelOutput& out, std::size_t first, std::size_t count,
                 const std::vector<PairTarget>& targets,
                 std::span<const std::size_t> row_of_gt, const LossWeights& w);

// (1/rows)·Σ_matched Σ_k w_k·(|dx_k| + |dy_k|). `weights` rows×K, or undefined
// for uniform weight 1.
Tensor pose_loss(const Tensor& keypoints, const Tensor& weights,
                 const std::vector<PairTarget>& targets,
                 std::span<const std::size_t> row_of_gt, std::size_t keypoint_count);

struct LossBreakdown {
  Tensor total;
  Tensor learnable;  // L_l
  Tensor sca;        // L_s
  Tensor pose;       // L_p
  SetLoss learnable_terms;
  SetLoss sca_terms;
  MatchResult match;  // learnable rows
};

// α·learnable + β·sca + γ·pose.
Tensor weighted_total(const Tensor& learnable, const Tensor& sca, const Tensor& pose,
                      const LossWeights& w);

// L = α·L_l + β·L_s + γ·L_p with variant switches taken from the model config.
LossBreakdown total_loss(const ModelOutput& out, const std::vector<PairTarget>& targets,
                         const LossWeights& w, const ModelConfig& config);

}  // namespace dirhoi
