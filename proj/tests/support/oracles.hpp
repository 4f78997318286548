#pragma once

// Slow, obviously-correct reference implementations used as test oracles.
// Nothing here calls into the library code it is checking.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "dirhoi/evaluation.hpp"
#include "dirhoi/geometry.hpp"
#include "dirhoi/synthetic.hpp"

namespace dirhoi::testing {

// Minimum over every injective row -> column assignment.
inline double brute_force_assignment(const std::vector<double>& cost, std::size_t rows,
                                     std::size_t cols) {
  std::vector<std::size_t> perm(cols);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) total += cost[r * cols + perm[r]];
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Overlap of two boxes by counting cells of an n×n raster of the unit square.
inline double pixel_iou(const BBox& a, const BBox& b, std::size_t n = 2000) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const double y = (static_cast<double>(r) + 0.5) / static_cast<double>(n);
    for (std::size_t c = 0; c < n; ++c) {
      const double x = (static_cast<double>(c) + 0.5) / static_cast<double>(n);
      const bool in_a = x >= a.cx - a.w / 2 && x <= a.cx + a.w / 2 && y >= a.cy - a.h / 2 &&
                        y <= a.cy + a.h / 2;
      const bool in_b = x >= b.cx - b.w / 2 && x <= b.cx + b.w / 2 && y >= b.cy - b.h / 2 &&
                        y <= b.cy + b.h / 2;
      inter += (in_a && in_b) ? 1 : 0;
      uni += (in_a || in_b) ? 1 : 0;
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline double corner_iou(const BBox& a, const BBox& b) {
  const double ix = std::max(0.0, std::min(a.cx + a.w / 2, b.cx + b.w / 2) -
                                      std::max(a.cx - a.w / 2, b.cx - b.w / 2));
  const double iy = std::max(0.0, std::min(a.cy + a.h / 2, b.cy + b.h / 2) -
                                      std::max(a.cy - a.h / 2, b.cy - b.h / 2));
  const double inter = ix * iy;
  return inter / (a.w * a.h + b.w * b.h - inter);
}

// Patches whose center lies in the closed box, counted cell by cell.
inline std::size_t centers_inside(const BBox& b, std::size_t rows, std::size_t cols) {
  std::size_t n = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double x = (c + 0.5) / static_cast<double>(cols);
      const double y = (r + 0.5) / static_cast<double>(rows);
      if (x >= b.cx - b.w / 2 && x <= b.cx + b.w / 2 && y >= b.cy - b.h / 2 &&
          y <= b.cy + b.h / 2)
        ++n;
    }
  }
  return n;
}

// Verb rules written out again from their definitions.
inline std::vector<int> reference_verbs(const Person& person, const SceneObject& object) {
  const auto& b = person.box;
  const auto& o = object.box;
  const auto& k = person.keypoints;
  const double left = b.cx - b.w / 2, right = b.cx + b.w / 2;
  const double top = b.cy - b.h / 2, bottom = b.cy + b.h / 2;
  std::vector<int> out;
  if (left <= o.cx && o.cx <= right && top <= o.cy && o.cy <= bottom)
    out.push_back(0);
  else if (o.cy < top)
    out.push_back(2);
  else
    out.push_back(1);

  const int c = object.object_class;
  const bool wrist_raised = k[1].y < k[0].y || k[2].y < k[0].y;
  if ((c == 0 || c == 3) && wrist_raised) out.push_back(3);

  bool reach = false;
  if (o.cx >= b.cx)
    reach = k[1].x > right || k[2].x > right;
  else
    reach = k[1].x < left || k[2].x < left;
  if ((c == 1 || c == 2) && reach) out.push_back(4);

  const double line = top + 0.8 * b.h;
  if ((c == 0 || c == 2) && (k[3].y < line || k[4].y < line)) out.push_back(5);
  std::sort(out.begin(), out.end());
  return out;
}

// AP of one category by sweeping a confidence threshold over every distinct
// score: at each threshold the kept predictions are matched greedily from
// scratch, and AP is the area under the interpolated precision/recall curve.
// Assumes distinct confidences within a category.
inline double brute_force_ap(const std::vector<EvalScene>& scenes, int verb, int cls,
                             bool known_object) {
  auto included = [&](const EvalScene& s) {
    if (!known_object) return true;
    return std::find(s.object_classes.begin(), s.object_classes.end(), cls) !=
           s.object_classes.end();
  };
  auto is_gt = [&](const GtPair& g) {
    return g.object_class == cls && std::find(g.verbs.begin(), g.verbs.end(), verb) != g.verbs.end();
  };
  std::size_t n_gt = 0;
  std::vector<double> thresholds;
  for (const auto& s : scenes) {
    if (!included(s)) continue;
    for (const auto& g : s.gt) n_gt += is_gt(g) ? 1 : 0;
    for (const auto& p : s.predictions)
      if (p.verb == verb && p.object_class == cls) thresholds.push_back(p.confidence);
  }
  if (n_gt == 0) return 0.0;
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());

  std::vector<double> recall, precision;
  for (double tau : thresholds) {
    std::size_t kept = 0, hits = 0;
    for (const auto& s : scenes) {
      if (!included(s)) continue;
      std::vector<std::size_t> order;
      for (std::size_t i = 0; i < s.predictions.size(); ++i) {
        const auto& p = s.predictions[i];
        if (p.verb == verb && p.object_class == cls && p.confidence >= tau) order.push_back(i);
      }
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return s.predictions[a].confidence > s.predictions[b].confidence;
      });
      std::vector<bool> taken(s.gt.size(), false);
      for (std::size_t i : order) {
        ++kept;
        const auto& p = s.predictions[i];
        int best = -1;
        double best_overlap = 0.5;
        for (std::size_t g = 0; g < s.gt.size(); ++g) {
          if (taken[g] || !is_gt(s.gt[g])) continue;
          const double ov = std::min(corner_iou(p.human, s.gt[g].human),
                                     corner_iou(p.object, s.gt[g].object));
          if (ov >= best_overlap && (best < 0 || ov > best_overlap)) {
            best = static_cast<int>(g);
            best_overlap = ov;
          }
        }
        if (best >= 0) {
          taken[static_cast<std::size_t>(best)] = true;
          ++hits;
        }
      }
    }
    recall.push_back(static_cast<double>(hits) / static_cast<double>(n_gt));
    precision.push_back(static_cast<double>(hits) / static_cast<double>(kept));
  }

  std::vector<double> levels = recall;
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  double ap = 0.0, prev = 0.0;
  for (double r : levels) {
    if (r <= 0.0) continue;
    double p_max = 0.0;
    for (std::size_t i = 0; i < recall.size(); ++i)
      if (recall[i] >= r) p_max = std::max(p_max, precision[i]);
    ap += (r - prev) * p_max;
    prev = r;
  }
  return ap;
}

}  // namespace dirhoi::testing
