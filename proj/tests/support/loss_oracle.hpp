#pragma once

// Plain-double recomputation of the training loss from a model output and a
// GT-to-row assignment, without any tensor ops.

#include <algorithm>
#include <cmath>
#include <vector>

#include "dirhoi/hoi.hpp"
#include "dirhoi/losses.hpp"
#include "dirhoi/model.hpp"

namespace dirhoi::testing {

inline double reference_giou(const BBox& p_in, const BBox& g) {
  BBox p = p_in;
  p.w = std::max(p.w, 1e-6);
  p.h = std::max(p.h, 1e-6);
  const double px0 = p.cx - p.w / 2, px1 = p.cx + p.w / 2, py0 = p.cy - p.h / 2, py1 = p.cy + p.h / 2;
  const double gx0 = g.cx - g.w / 2, gx1 = g.cx + g.w / 2, gy0 = g.cy - g.h / 2, gy1 = g.cy + g.h / 2;
  const double iw = std::max(0.0, std::min(px1, gx1) - std::max(px0, gx0));
  const double ih = std::max(0.0, std::min(py1, gy1) - std::max(py0, gy0));
  const double inter = iw * ih;
  const double uni = p.w * p.h + g.w * g.h - inter;
  const double enc = (std::max(px1, gx1) - std::min(px0, gx0)) * (std::max(py1, gy1) - std::min(py0, gy0));
  return inter / uni - (enc - uni) / enc;
}

inline double reference_focal(double logit, double target, double alpha, double gamma) {
  const double p = 1.0 / (1.0 + std::exp(-logit));
  if (target > 0.5) return -alpha * std::pow(1.0 - p, gamma) * std::log(p);
  return -(1.0 - alpha) * std::pow(p, gamma) * std::log(1.0 - p);
}

inline BBox row_bbox(const Tensor& t, std::size_t r) {
  return {t.at(r, 0), t.at(r, 1), t.at(r, 2), t.at(r, 3)};
}

inline double reference_softmax(const Tensor& logits, std::size_t r, std::size_t k) {
  double z = 0.0;
  for (std::size_t j = 0; j < logits.dim(1); ++j) z += std::exp(logits.at(r, j));
  return std::exp(logits.at(r, k)) / z;
}

struct ReferenceSet {
  double box = 0, giou = 0, cls = 0, verb = 0, total = 0;
};

inline ReferenceSet reference_set(const ModelOutput& out, std::size_t first, std::size_t count,
                                  const std::vector<PairTarget>& t,
                                  const std::vector<std::size_t>& row_of_gt, const LossWeights& w) {
  ReferenceSet s;
  const double norm = std::max<double>(1.0, static_cast<double>(t.size()));
  const std::size_t classes = out.object_logits.dim(1);
  std::vector<int> target(count, static_cast<int>(classes) - 1);
  for (std::size_t g = 0; g < t.size(); ++g) {
    const std::size_t r = first + row_of_gt[g];
    target[row_of_gt[g]] = t[g].object_class;
    const BBox h = row_bbox(out.human_boxes, r), o = row_bbox(out.object_boxes, r);
    s.box += std::fabs(h.cx - t[g].human.cx) + std::fabs(h.cy - t[g].human.cy) +
             std::fabs(h.w - t[g].human.w) + std::fabs(h.h - t[g].human.h);
    s.box += std::fabs(o.cx - t[g].object.cx) + std::fabs(o.cy - t[g].object.cy) +
             std::fabs(o.w - t[g].object.w) + std::fabs(o.h - t[g].object.h);
    s.giou += (1.0 - reference_giou(h, t[g].human)) + (1.0 - reference_giou(o, t[g].object));
    for (std::size_t v = 0; v < t[g].verbs.size(); ++v)
      s.verb += reference_focal(out.verb_logits.at(r, v), t[g].verbs[v], w.focal_alpha, w.focal_gamma);
  }
  s.box /= norm;
  s.giou /= norm;
  s.verb /= norm;
  double ce = 0.0, weight = 0.0;
  for (std::size_t q = 0; q < count; ++q) {
    const bool bg = target[q] == static_cast<int>(classes) - 1;
    const double wq = bg ? w.background_weight : 1.0;
    ce += -wq * std::log(reference_softmax(out.object_logits, first + q,
                                           static_cast<std::size_t>(target[q])));
    weight += wq;
  }
  s.cls = ce / weight;
  s.total = w.box * s.box + w.giou * s.giou + w.cls * s.cls + w.verb * s.verb;
  return s;
}

// (1/rows)·Σ_g Σ_k w_k·(|dx| + |dy|) over the listed rows.
inline double reference_pose(const ModelOutput& out, const std::vector<PairTarget>& t,
                             const std::vector<std::size_t>& rows, bool weighted) {
  const std::size_t k = t.empty() ? 0 : t[0].pose_label.size();
  double total = 0.0;
  for (std::size_t g = 0; g < t.size(); ++g) {
    for (std::size_t j = 0; j < k; ++j) {
      const double wk = weighted ? out.keypoint_weights.at(rows[g], j) : 1.0;
      total += wk * (std::fabs(out.keypoints.at(rows[g], 2 * j) - t[g].pose_label[j].x) +
                     std::fabs(out.keypoints.at(rows[g], 2 * j + 1) - t[g].pose_label[j].y));
    }
  }
  return total / static_cast<double>(out.keypoints.dim(0));
}

struct ReferenceTotal {
  double learnable = 0, sca = 0, pose = 0, total = 0;
};

// `match` is the learnable-row assignment; SCA rows follow GT order.
inline ReferenceTotal reference_total(const ModelOutput& out, const std::vector<PairTarget>& t,
                                      const std::vector<std::size_t>& match, const LossWeights& w,
                                      const ModelConfig& c) {
  ReferenceTotal r;
  r.learnable = reference_set(out, 0, out.learnable_rows, t, match, w).total;
  std::vector<PairTarget> sca_t(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(out.sca_rows));
  std::vector<std::size_t> identity(out.sca_rows);
  for (std::size_t i = 0; i < identity.size(); ++i) identity[i] = i;
  if (c.use_sca && c.sca_queries && out.sca_rows > 0)
    r.sca = reference_set(out, out.learnable_rows, out.sca_rows, sca_t, identity, w).total;
  if (c.use_ipe && c.use_pose_loss) {
    std::vector<PairTarget> pt = t;
    std::vector<std::size_t> rows = match;
    for (std::size_t j = 0; j < out.sca_rows; ++j) {
      pt.push_back(sca_t[j]);
      rows.push_back(out.learnable_rows + j);
    }
    r.pose = reference_pose(out, pt, rows, c.use_ipa_mask);
  }
  r.total = w.alpha * r.learnable + w.beta * r.sca + w.gamma * r.pose;
  return r;
}

}  // namespace dirhoi::testing
