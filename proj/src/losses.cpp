#include "dirhoi/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dirhoi/errors.hpp"

namespace dirhoi {

// ---- Hungarian ------------------------------------------------------------------

namespace {

MatchResult solve_assignment(const CostMatrix& cost) {
  const std::size_t n = cost.rows, m = cost.cols;
  MatchResult result;
  if (n == 0) return result;

  // Shortest augmenting path with potentials; 1-based, column 0 is a sentinel.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  result.query_of_gt.assign(n, 0);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) result.query_of_gt[p[j] - 1] = j - 1;
  }
  for (std::size_t i = 0; i < n; ++i) result.cost += cost(i, result.query_of_gt[i]);
  return result;
}

}  // namespace

MatchResult hungarian_match(const CostMatrix& cost) {
  const std::size_t n = cost.rows, m = cost.cols;
  if (cost.values.size() != n * m) throw DimensionError("cost matrix size mismatch");
  if (n > m) {
    throw DimensionError("cannot match " + std::to_string(n) + " targets to " +
                         std::to_string(m) + " queries");
  }
  double magnitude = 1.0;
  for (double v : cost.values) {
    if (!std::isfinite(v)) throw NumericError("matching cost is not finite");
    magnitude += std::fabs(v);
  }
  const MatchResult best = solve_assignment(cost);
  if (n == 0) return best;

  // Among optimal assignments pick the lexicographically smallest query list:
  // fix targets in order to the lowest query that still admits the optimum.
  const double slack = 1e-12 * magnitude;
  MatchResult result;
  std::vector<char> taken(m, 0);
  double fixed = 0.0;
  for (std::size_t g = 0; g < n; ++g) {
    for (std::size_t q = 0; q < m; ++q) {
      if (taken[q]) continue;
      CostMatrix rest{n - g - 1, 0, {}};
      std::vector<std::size_t> free_cols;
      for (std::size_t j = 0; j < m; ++j)
        if (!taken[j] && j != q) free_cols.push_back(j);
      rest.cols = free_cols.size();
      for (std::size_t i = g + 1; i < n; ++i)
        for (std::size_t j : free_cols) rest.values.push_back(cost(i, j));
      const double total = fixed + cost(g, q) + solve_assignment(rest).cost;
      if (total <= best.cost + slack) {
        taken[q] = 1;
        fixed += cost(g, q);
        result.query_of_gt.push_back(q);
        break;
      }
    }
    if (result.query_of_gt.size() != g + 1) return best;
  }
  for (std::size_t i = 0; i < n; ++i) result.cost += cost(i, result.query_of_gt[i]);
  return result;
}

MatchResult hungarian_match(const Tensor& cost) {
  if (cost.rank() != 2) throw DimensionError("cost must be a matrix");
  CostMatrix c{cost.dim(0), cost.dim(1),
               std::vector<double>(cost.values().begin(), cost.values().end())};
  return hungarian_match(c);
}

// ---- elementwise helpers ----------------------------------------------------------

namespace {

double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Focal loss of one element and its derivative w.r.t. the logit.
double focal_element(double x, double t, double alpha, double gamma, double* dx) {
  const double p = stable_sigmoid(x);
  const double log_p = -softplus(-x);
  const double log_q = -softplus(x);
  double loss = 0.0, d = 0.0;
  if (t > 0.0) {
    const double q_pow = std::pow(1.0 - p, gamma);
    loss += -t * alpha * q_pow * log_p;
    d += t * alpha * q_pow * (gamma * p * log_p - (1.0 - p));
  }
  if (t < 1.0) {
    const double p_pow = std::pow(p, gamma);
    loss += -(1.0 - t) * (1.0 - alpha) * p_pow * log_q;
    d += (1.0 - t) * (1.0 - alpha) * p_pow * (p - gamma * (1.0 - p) * log_q);
  }
  if (dx) *dx = d;
  return loss;
}

BBox box_row(const Tensor& boxes, std::size_t r) {
  return {boxes.at(r, 0), boxes.at(r, 1), boxes.at(r, 2), boxes.at(r, 3)};
}

double l1(const BBox& a, const BBox& b) {
  return std::fabs(a.cx - b.cx) + std::fabs(a.cy - b.cy) + std::fabs(a.w - b.w) +
         std::fabs(a.h - b.h);
}

}  // namespace

CostMatrix matching_cost(const ModelOutput& out, std::size_t first, std::size_t count,
                         const std::vector<PairTarget>& targets, const LossWeights& w) {
  CostMatrix c{targets.size(), count, std::vector<double>(targets.size() * count)};
  const std::size_t classes = out.object_logits.dim(1);
  const std::size_t verbs = out.verb_logits.dim(1);
  std::vector<double> prob(classes);
  for (std::size_t q = 0; q < count; ++q) {
    const std::size_t r = first + q;
    const BBox h = box_row(out.human_boxes, r);
    const BBox o = box_row(out.object_boxes, r);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < classes; ++k) mx = std::max(mx, out.object_logits.at(r, k));
    double total = 0.0;
    for (std::size_t k = 0; k < classes; ++k) {
      prob[k] = std::exp(out.object_logits.at(r, k) - mx);
      total += prob[k];
    }
    for (auto& pk : prob) pk /= total;
    for (std::size_t g = 0; g < targets.size(); ++g) {
      const auto& t = targets[g];
      double verb_cost = 0.0;
      for (std::size_t v = 0; v < verbs; ++v) {
        verb_cost += focal_element(out.verb_logits.at(r, v), t.verbs[v] ? 1.0 : 0.0,
                                   w.focal_alpha, w.focal_gamma, nullptr);
      }
      verb_cost /= static_cast<double>(verbs);
      const double box_cost = l1(h, t.human) + l1(o, t.object);
      const double giou_cost = giou_loss(h, t.human) + giou_loss(o, t.object);
      const double cls_cost = -prob[static_cast<std::size_t>(t.object_class)];
      c.values[g * count + q] =
          w.box * box_cost + w.giou * giou_cost + w.cls * cls_cost + w.verb * verb_cost;
    }
  }
  return c;
}

Tensor giou_loss_sum(const Tensor& pred, std::span<const BBox> gt) {
  if (pred.rank() != 2 || pred.dim(1) != 4 || pred.dim(0) != gt.size()) {
    throw DimensionError("giou_loss_sum expects rows×4 predictions, one per target");
  }
  const std::size_t n = gt.size();
  std::vector<double> grad(n * 4);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::array<double, 4> d{};
    total += giou_loss_grad(box_row(pred, i), gt[i], d);
    std::copy(d.begin(), d.end(), grad.begin() + static_cast<std::ptrdiff_t>(i * 4));
  }
  return Tensor::from_op({1}, {total}, {pred}, [grad = std::move(grad)](detail::Node& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < grad.size(); ++i) g[i] += self.grad[0] * grad[i];
  });
}

Tensor weighted_cross_entropy(const Tensor& logits, std::span<const std::size_t> target,
                              std::span<const double> weight) {
  if (logits.rank() != 2 || logits.dim(0) != target.size() || weight.size() != target.size()) {
    throw DimensionError("cross entropy: one target and weight per logit row required");
  }
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  const double wsum = std::accumulate(weight.begin(), weight.end(), 0.0);
  if (n == 0 || !(wsum > 0.0)) return Tensor::scalar(0.0);
  auto x = logits.values();
  std::vector<double> grad(n * k);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (target[i] >= k) throw DimensionError("cross entropy target out of range");
    const double* row = x.data() + i * k;
    const double mx = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
    const double lse = mx + std::log(z);
    total += weight[i] * (lse - row[target[i]]);
    for (std::size_t j = 0; j < k; ++j) {
      const double s = std::exp(row[j] - lse);
      grad[i * k + j] = weight[i] * (s - (j == target[i] ? 1.0 : 0.0)) / wsum;
    }
  }
  return Tensor::from_op({1}, {total / wsum}, {logits}, [grad = std::move(grad)](detail::Node& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < grad.size(); ++i) g[i] += self.grad[0] * grad[i];
  });
}

Tensor sigmoid_focal_loss(const Tensor& logits, std::span<const double> targets,
                          double alpha, double gamma) {
  if (targets.size() != logits.numel()) {
    throw DimensionError("focal loss: target count differs from logit count");
  }
  auto x = logits.values();
  std::vector<double> grad(x.size());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    total += focal_element(x[i], targets[i], alpha, gamma, &grad[i]);
  }
  return Tensor::from_op({1}, {total}, {logits}, [grad = std::move(grad)](detail::Node& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < grad.size(); ++i) g[i] += self.grad[0] * grad[i];
  });
}

// ---- set and pose losses ------------------------------------------------------------

namespace {

Tensor box_targets(const std::vector<PairTarget>& targets, bool human) {
  std::vector<double> v;
  v.reserve(targets.size() * 4);
  for (const auto& t : targets) {
    const auto a = (human ? t.human : t.object).as_array();
    v.insert(v.end(), a.begin(), a.end());
  }
  return Tensor({targets.size(), 4}, std::move(v));
}

}  // namespace

SetLoss loss_set(const ModelOutput& out, std::size_t first, std::size_t count,
                 const std::vector<PairTarget>& targets,
                 std::span<const std::size_t> row_of_gt, const LossWeights& w) {
  const std::size_t n_gt = targets.size();
  if (row_of_gt.size() != n_gt) throw DimensionError("one matched row per target required");
  const double norm = static_cast<double>(std::max<std::size_t>(n_gt, 1));
  const std::size_t classes = out.object_logits.dim(1);
  const std::size_t verbs = out.verb_logits.dim(1);

  SetLoss s;
  std::vector<std::size_t> rows(n_gt);
  for (std::size_t g = 0; g < n_gt; ++g) {
    if (row_of_gt[g] >= count) throw DimensionError("matched row outside the query group");
    rows[g] = first + row_of_gt[g];
  }
  if (n_gt > 0) {
    const Tensor ph = gather_rows(out.human_boxes, rows);
    const Tensor po = gather_rows(out.object_boxes, rows);
    s.box = scale(add(abs_sum(sub(ph, box_targets(targets, true))),
                      abs_sum(sub(po, box_targets(targets, false)))),
                  1.0 / norm);
    std::vector<BBox> gh, go;
    for (const auto& t : targets) {
      gh.push_back(t.human);
      go.push_back(t.object);
    }
    s.giou = scale(add(giou_loss_sum(ph, gh), giou_loss_sum(po, go)), 1.0 / norm);
  } else {
    s.box = Tensor::scalar(0.0);
    s.giou = Tensor::scalar(0.0);
  }

  std::vector<std::size_t> cls_target(count, classes - 1);
  std::vector<double> cls_weight(count, w.background_weight);
  std::vector<double> verb_target(n_gt * verbs, 0.0);
  for (std::size_t g = 0; g < n_gt; ++g) {
    const std::size_t r = row_of_gt[g];
    cls_target[r] = static_cast<std::size_t>(targets[g].object_class);
    cls_weight[r] = 1.0;
    for (std::size_t v = 0; v < verbs; ++v) verb_target[g * verbs + v] = targets[g].verbs[v] ? 1.0 : 0.0;
  }
  s.cls = weighted_cross_entropy(slice(out.object_logits, 0, first, first + count), cls_target,
                                 cls_weight);
  // Verb supervision only on matched rows; the rest learn background.
  s.verb = n_gt == 0 ? Tensor::scalar(0.0)
                     : scale(sigmoid_focal_loss(gather_rows(out.verb_logits, rows), verb_target,
                                                w.focal_alpha, w.focal_gamma),
                             1.0 / norm);
  s.total = add(add(scale(s.box, w.box), scale(s.giou, w.giou)),
                add(scale(s.cls, w.cls), scale(s.verb, w.verb)));
  return s;
}

Tensor pose_loss(const Tensor& keypoints, const Tensor& weights,
                 const std::vector<PairTarget>& targets,
                 std::span<const std::size_t> row_of_gt, std::size_t keypoint_count) {
  const std::size_t rows = keypoints.dim(0);
  const std::size_t k2 = 2 * keypoint_count;
  if (keypoints.dim(1) != k2) throw DimensionError("keypoint tensor width is not 2K");
  if (row_of_gt.size() != targets.size()) throw DimensionError("one row per target required");
  if (targets.empty()) return Tensor::scalar(0.0);

  std::vector<std::size_t> idx(row_of_gt.begin(), row_of_gt.end());
  std::vector<double> label;
  label.reserve(targets.size() * k2);
  for (const auto& t : targets) {
    if (t.pose_label.size() != keypoint_count) throw DimensionError("pose label has wrong K");
    for (const auto& p : t.pose_label) {
      label.push_back(p.x);
      label.push_back(p.y);
    }
  }
  const Tensor diff =
      abs(sub(gather_rows(keypoints, idx), Tensor({targets.size(), k2}, std::move(label))));

  Tensor weighted;
  if (weights.defined()) {
    // Expand K weights to the interleaved x/y layout.
    std::vector<double> expand(keypoint_count * k2, 0.0);
    for (std::size_t k = 0; k < keypoint_count; ++k) {
      expand[k * k2 + 2 * k] = 1.0;
      expand[k * k2 + 2 * k + 1] = 1.0;
    }
    const Tensor w2 = matmul(gather_rows(weights, idx), Tensor({keypoint_count, k2}, std::move(expand)));
    weighted = mul(diff, w2);
  } else {
    weighted = diff;
  }
  return scale(sum(weighted), 1.0 / static_cast<double>(rows));
}

LossBreakdown total_loss(const ModelOutput& out, const std::vector<PairTarget>& targets,
                         const LossWeights& w, const ModelConfig& config) {
  LossBreakdown b;
  const std::size_t n_l = out.learnable_rows;
  if (targets.size() > n_l) {
    throw DimensionError("scene has more pairs than learnable queries");
  }
  b.match = hungarian_match(matching_cost(out, 0, n_l, targets, w));
  b.learnable_terms = loss_set(out, 0, n_l, targets, b.match.query_of_gt, w);
  b.learnable = b.learnable_terms.total;

  const std::size_t n_s = out.sca_rows;
  std::vector<PairTarget> sca_targets(targets.begin(),
                                      targets.begin() + static_cast<std::ptrdiff_t>(n_s));
  if (config.use_sca && config.sca_queries && n_s > 0) {
    std::vector<std::size_t> identity(n_s);
    std::iota(identity.begin(), identity.end(), std::size_t{0});
    b.sca_terms = loss_set(out, n_l, n_s, sca_targets, identity, w);
    b.sca = b.sca_terms.total;
  } else {
    b.sca = Tensor::scalar(0.0);
  }

  if (config.use_ipe && config.use_pose_loss && out.keypoints.defined()) {
    std::vector<PairTarget> pose_targets = targets;
    std::vector<std::size_t> rows(b.match.query_of_gt.begin(), b.match.query_of_gt.end());
    for (std::size_t j = 0; j < n_s; ++j) {
      pose_targets.push_back(sca_targets[j]);
      rows.push_back(n_l + j);
    }
    const Tensor weights = config.use_ipa_mask ? out.keypoint_weights : Tensor();
    b.pose = pose_loss(out.keypoints, weights, pose_targets, rows, config.keypoints);
  } else {
    b.pose = Tensor::scalar(0.0);
  }

  b.total = weighted_total(b.learnable, b.sca, b.pose, w);
  return b;
}

Tensor weighted_total(const Tensor& learnable, const Tensor& sca, const Tensor& pose,
                      const LossWeights& w) {
  return add(add(scale(learnable, w.alpha), scale(sca, w.beta)), scale(pose, w.gamma));
}

}  // namespace dirhoi
