#include "dirhoi/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "dirhoi/errors.hpp"

namespace dirhoi {
namespace {

BBox row_box(const Tensor& boxes, std::size_t row) {
  return {boxes.at(row, 0), boxes.at(row, 1), boxes.at(row, 2), boxes.at(row, 3)};
}

struct Ranked {
  double confidence;
  std::size_t scene;
  std::size_t index;
};

double mean_of(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  double total = 0.0;
  for (double v : values) total += v;
  return total / static_cast<double>(values.size());
}

ModeSummary summarize(const std::vector<double>& ap, const std::vector<std::size_t>& gt_count,
                      const std::vector<bool>& rare) {
  std::vector<double> full, rare_ap, common_ap;
  for (std::size_t i = 0; i < ap.size(); ++i) {
    if (gt_count[i] == 0) continue;
    full.push_back(ap[i]);
    (rare[i] ? rare_ap : common_ap).push_back(ap[i]);
  }
  return {mean_of(full), mean_of(rare_ap), mean_of(common_ap),
          full.size(),   rare_ap.size(),   common_ap.size()};
}

}  // namespace

std::vector<HOITriplet> score_triplets(const ModelOutput& out, std::size_t top_k) {
  const std::size_t rows = out.learnable_rows;
  const std::size_t classes = out.object_logits.dim(1) - 1;
  const std::size_t verbs = out.verb_logits.dim(1);
  std::vector<HOITriplet> all;
  all.reserve(rows * verbs);
  for (std::size_t q = 0; q < rows; ++q) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c <= classes; ++c) top = std::max(top, out.object_logits.at(q, c));
    double denom = 0.0;
    for (std::size_t c = 0; c <= classes; ++c) denom += std::exp(out.object_logits.at(q, c) - top);
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c)
      if (out.object_logits.at(q, c) > out.object_logits.at(q, best)) best = c;
    const double p_object = std::exp(out.object_logits.at(q, best) - top) / denom;
    const BBox human = row_box(out.human_boxes, q);
    const BBox object = row_box(out.object_boxes, q);
    for (std::size_t v = 0; v < verbs; ++v) {
      const double p_verb = 1.0 / (1.0 + std::exp(-out.verb_logits.at(q, v)));
      all.push_back({human, object, static_cast<int>(best), static_cast<int>(v),
                     p_object * p_verb, q});
    }
  }
  // Candidates are generated in (query, verb) order, so a stable sort keeps
  // that order among equal confidences.
  std::stable_sort(all.begin(), all.end(), [](const HOITriplet& a, const HOITriplet& b) {
    return a.confidence > b.confidence;
  });
  if (all.size() > top_k) all.resize(top_k);
  return all;
}

double average_precision(const std::vector<bool>& tp, std::size_t gt_count) {
  if (gt_count == 0) return 0.0;
  const std::size_t n = tp.size();
  std::vector<double> precision(n), recall(n);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (tp[i]) ++hits;
    precision[i] = static_cast<double>(hits) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(hits) / static_cast<double>(gt_count);
  }
  // Precision envelope, then area under the stepwise curve.
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0;
  double previous_recall = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (recall[i] > previous_recall) {
      ap += (recall[i] - previous_recall) * precision[i];
      previous_recall = recall[i];
    }
  }
  return ap;
}

double category_ap(std::span<const EvalScene> scenes, int verb, int object_class, EvalMode mode,
                   std::size_t* gt_count) {
  std::vector<Ranked> ranked;
  std::vector<std::vector<std::size_t>> gt_of_scene(scenes.size());
  std::size_t total_gt = 0;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    const auto& scene = scenes[s];
    if (mode == EvalMode::kKnownObject &&
        std::find(scene.object_classes.begin(), scene.object_classes.end(), object_class) ==
            scene.object_classes.end())
      continue;
    for (std::size_t g = 0; g < scene.gt.size(); ++g) {
      const auto& pair = scene.gt[g];
      if (pair.object_class == object_class &&
          std::find(pair.verbs.begin(), pair.verbs.end(), verb) != pair.verbs.end())
        gt_of_scene[s].push_back(g);
    }
    total_gt += gt_of_scene[s].size();
    for (std::size_t i = 0; i < scene.predictions.size(); ++i) {
      const auto& p = scene.predictions[i];
      if (p.verb == verb && p.object_class == object_class) ranked.push_back({p.confidence, s, i});
    }
  }
  if (gt_count != nullptr) *gt_count = total_gt;
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& a, const Ranked& b) { return a.confidence > b.confidence; });

  std::vector<std::vector<bool>> used(scenes.size());
  for (std::size_t s = 0; s < scenes.size(); ++s) used[s].assign(gt_of_scene[s].size(), false);
  std::vector<bool> tp(ranked.size(), false);
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    const auto& scene = scenes[ranked[r].scene];
    const auto& p = scene.predictions[ranked[r].index];
    const auto& candidates = gt_of_scene[ranked[r].scene];
    double best_overlap = -1.0;
    std::size_t best = candidates.size();
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      if (used[ranked[r].scene][k]) continue;
      const auto& g = scene.gt[candidates[k]];
      const double overlap = std::min(iou(p.human, g.human), iou(p.object, g.object));
      if (overlap >= kIouThreshold && overlap > best_overlap) {
        best_overlap = overlap;
        best = k;
      }
    }
    if (best < candidates.size()) {
      used[ranked[r].scene][best] = true;
      tp[r] = true;
    }
  }
  return average_precision(tp, total_gt);
}

EvalReport evaluate(std::span<const EvalScene> scenes, std::size_t verb_classes,
                    std::size_t object_classes, const std::vector<bool>& rare_categories) {
  const std::size_t categories = verb_classes * object_classes;
  if (rare_categories.size() != categories)
    throw DimensionError("rare flags do not cover every category");
  EvalReport report;
  report.verb_classes = verb_classes;
  report.object_classes = object_classes;
  report.gt_count.assign(categories, 0);
  report.ap_default.assign(categories, 0.0);
  report.ap_known_object.assign(categories, 0.0);
  report.rare = rare_categories;
  for (std::size_t v = 0; v < verb_classes; ++v) {
    for (std::size_t c = 0; c < object_classes; ++c) {
      const std::size_t idx = v * object_classes + c;
      const int verb = static_cast<int>(v);
      const int cls = static_cast<int>(c);
      report.ap_default[idx] = category_ap(scenes, verb, cls, EvalMode::kDefault,
                                           &report.gt_count[idx]);
      report.ap_known_object[idx] = category_ap(scenes, verb, cls, EvalMode::kKnownObject);
    }
  }
  report.dt = summarize(report.ap_default, report.gt_count, report.rare);
  report.ko = summarize(report.ap_known_object, report.gt_count, report.rare);

  double total = 0.0;
  for (const auto& scene : scenes) {
    for (double e : scene.keypoint_error) {
      total += e;
      ++report.keypoint_matches;
    }
  }
  report.keypoint_error =
      report.keypoint_matches == 0 ? 0.0 : total / static_cast<double>(report.keypoint_matches);
  return report;
}

double keypoint_row_error(const Tensor& keypoints, std::size_t row, const KeypointSet& gt) {
  if (keypoints.dim(1) != 2 * gt.size()) throw DimensionError("keypoint width mismatch");
  double total = 0.0;
  for (std::size_t k = 0; k < gt.size(); ++k) {
    total += std::abs(keypoints.at(row, 2 * k) - gt[k].x);
    total += std::abs(keypoints.at(row, 2 * k + 1) - gt[k].y);
  }
  return total / static_cast<double>(2 * gt.size());
}

double keypoint_error(const Tensor& keypoints, const std::vector<KeypointSet>& gt,
                      std::span<const std::size_t> query_of_gt) {
  if (query_of_gt.size() != gt.size()) throw DimensionError("one query per person expected");
  if (gt.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t g = 0; g < gt.size(); ++g)
    total += keypoint_row_error(keypoints, query_of_gt[g], gt[g]);
  return total / static_cast<double>(gt.size());
}

std::string format_report(const EvalReport& report) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "mode  full    rare    non-rare   (categories " << report.dt.full_count << ", rare "
     << report.dt.rare_count << ")\n";
  os << "DT  " << std::setw(7) << 100.0 * report.dt.full << ' ' << std::setw(7)
     << 100.0 * report.dt.rare << ' ' << std::setw(7) << 100.0 * report.dt.non_rare << '\n';
  os << "KO  " << std::setw(7) << 100.0 * report.ko.full << ' ' << std::setw(7)
     << 100.0 * report.ko.rare << ' ' << std::setw(7) << 100.0 * report.ko.non_rare << '\n';
  os << std::setprecision(4) << "keypoint L1 " << report.keypoint_error << " over "
     << report.keypoint_matches << " humans\n";
  os << std::setprecision(2) << "\nverb obj    gt  rare   AP(DT)  AP(KO)\n";
  for (std::size_t v = 0; v < report.verb_classes; ++v) {
    for (std::size_t c = 0; c < report.object_classes; ++c) {
      const std::size_t i = v * report.object_classes + c;
      if (report.gt_count[i] == 0) continue;
      os << std::setw(4) << v << std::setw(4) << c << std::setw(6) << report.gt_count[i]
         << std::setw(6) << (report.rare[i] ? "yes" : "no") << std::setw(9)
         << 100.0 * report.ap_default[i] << std::setw(8) << 100.0 * report.ap_known_object[i]
         << '\n';
    }
  }
  return os.str();
}

std::vector<std::pair<std::string, double>> report_records(const EvalReport& report) {
  std::vector<std::pair<std::string, double>> records{
      {"dt.full", report.dt.full},
      {"dt.rare", report.dt.rare},
      {"dt.non_rare", report.dt.non_rare},
      {"ko.full", report.ko.full},
      {"ko.rare", report.ko.rare},
      {"ko.non_rare", report.ko.non_rare},
      {"categories", static_cast<double>(report.dt.full_count)},
      {"rare_categories", static_cast<double>(report.dt.rare_count)},
      {"keypoint_error", report.keypoint_error},
      {"keypoint_matches", static_cast<double>(report.keypoint_matches)},
  };
  for (std::size_t v = 0; v < report.verb_classes; ++v) {
    for (std::size_t c = 0; c < report.object_classes; ++c) {
      const std::size_t i = v * report.object_classes + c;
      if (report.gt_count[i] == 0) continue;
      const std::string key = ".v" + std::to_string(v) + ".o" + std::to_string(c);
      records.emplace_back("ap.dt" + key, report.ap_default[i]);
      records.emplace_back("ap.ko" + key, report.ap_known_object[i]);
    }
  }
  return records;
}

void write_report_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "metric,value\n" << std::setprecision(17);
  for (const auto& [key, value] : report_records(report)) out << key << ',' << value << '\n';
}

}  // namespace dirhoi
