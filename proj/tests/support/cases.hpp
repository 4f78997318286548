#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "dirhoi/evaluation.hpp"
#include "dirhoi/losses.hpp"

namespace dirhoi::testing {

// Entries on a 1/64 grid keep every partial sum exact.
inline CostMatrix dyadic_matrix(std::size_t n, std::size_t m, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(-256, 256);
  CostMatrix c{n, m, std::vector<double>(n * m)};
  for (auto& v : c.values) v = d(rng) / 64.0;
  return c;
}

inline BBox jitter(const BBox& b, std::mt19937_64& rng, double amount) {
  std::uniform_real_distribution<double> u(-amount, amount);
  return {b.cx + u(rng) * b.w, b.cy + u(rng) * b.h, b.w * (1.0 + u(rng)), b.h * (1.0 + u(rng))};
}

inline BBox random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return {0.2 + 0.6 * u(rng), 0.2 + 0.6 * u(rng), 0.1 + 0.3 * u(rng), 0.1 + 0.3 * u(rng)};
}

// A handful of scenes with at most 3 GT pairs and 5 predictions in total,
// mostly in category (verb 0, class 0) with some distractors.
inline std::vector<EvalScene> micro_case(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> scenes_n(1, 3), gt_n(0, 3), pred_n(1, 5), coin(0, 3);
  std::vector<EvalScene> scenes(static_cast<std::size_t>(scenes_n(rng)));
  std::size_t gt_left = static_cast<std::size_t>(gt_n(rng));
  std::size_t pred_left = static_cast<std::size_t>(pred_n(rng));
  // Distinct confidences.
  std::vector<double> conf{0.95, 0.83, 0.71, 0.62, 0.48, 0.37, 0.22, 0.11};
  std::shuffle(conf.begin(), conf.end(), rng);
  std::size_t next_conf = 0;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    auto& sc = scenes[s];
    const bool last = s + 1 == scenes.size();
    const bool has_class0 = coin(rng) != 0;
    sc.object_classes = {2};
    if (has_class0) sc.object_classes.push_back(0);
    const std::size_t n_gt = last ? gt_left : std::min<std::size_t>(gt_left, static_cast<std::size_t>(coin(rng)) % 2);
    gt_left -= n_gt;
    for (std::size_t g = 0; g < n_gt; ++g) {
      GtPair p{random_box(rng), random_box(rng), has_class0 ? 0 : 2, {0}};
      if (coin(rng) == 0) p.verbs.push_back(1);
      sc.gt.push_back(p);
    }
    const std::size_t n_pred = last ? pred_left : std::min<std::size_t>(pred_left, static_cast<std::size_t>(coin(rng)));
    pred_left -= n_pred;
    for (std::size_t i = 0; i < n_pred; ++i) {
      HOITriplet t;
      const int kind = coin(rng);
      if (!sc.gt.empty() && kind < 3) {
        const auto& g = sc.gt[std::uniform_int_distribution<std::size_t>(0, sc.gt.size() - 1)(rng)];
        t.human = jitter(g.human, rng, kind == 0 ? 0.4 : 0.08);
        t.object = jitter(g.object, rng, 0.08);
      } else {
        t.human = random_box(rng);
        t.object = random_box(rng);
      }
      t.object_class = coin(rng) == 3 ? 2 : 0;
      t.verb = coin(rng) == 3 ? 1 : 0;
      t.confidence = conf[next_conf++];
      t.query = i;
      sc.predictions.push_back(t);
    }
  }
  return scenes;
}

}  // namespace dirhoi::testing
