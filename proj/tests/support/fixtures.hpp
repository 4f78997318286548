#pragma once

#include <random>
#include <vector>

#include "dirhoi/hoi.hpp"
#include "dirhoi/model.hpp"
#include "dirhoi/tensor.hpp"

namespace dirhoi::testing {

// A model small enough for finite differences over every parameter.
inline ModelConfig tiny_config() {
  ModelConfig c;
  c.grid_rows = 4;
  c.grid_cols = 4;
  c.dim = 16;
  c.ffn_dim = 16;
  c.num_queries = 4;
  c.max_sca_queries = 2;
  c.encoder_layers = 1;
  c.detection_layers = 1;
  c.interaction_layers = 1;
  c.pose_layers = 1;
  return c;
}

inline Tensor random_features(const ModelConfig& c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.5);
  std::vector<double> v(c.grid_rows * c.grid_cols * c.raw_features);
  for (auto& x : v) x = n(rng);
  return Tensor({c.grid_rows * c.grid_cols, c.raw_features}, std::move(v));
}

// Two annotated pairs with distinct boxes, classes, verbs and keypoints.
inline std::vector<PairTarget> sample_targets(std::size_t keypoints = 5, std::size_t verbs = 6) {
  std::vector<PairTarget> t(2);
  t[0].human = {0.3, 0.55, 0.25, 0.5};
  t[0].object = {0.55, 0.6, 0.15, 0.15};
  t[0].object_class = 1;
  t[1].human = {0.75, 0.5, 0.2, 0.45};
  t[1].object = {0.7, 0.2, 0.2, 0.12};
  t[1].object_class = 0;
  for (std::size_t g = 0; g < 2; ++g) {
    t[g].verbs.assign(verbs, 0);
    t[g].verbs[g] = 1;
    t[g].verbs[verbs - 1 - g] = 1;
    for (std::size_t k = 0; k < keypoints; ++k) {
      const double x = t[g].human.x0() + t[g].human.w * (0.2 + 0.15 * static_cast<double>(k));
      const double y = t[g].human.y0() + t[g].human.h * (0.1 + 0.2 * static_cast<double>(k));
      t[g].keypoints.push_back({x, y});
      t[g].pose_label.push_back({x + 0.01, y - 0.01});
    }
  }
  return t;
}

}  // namespace dirhoi::testing
