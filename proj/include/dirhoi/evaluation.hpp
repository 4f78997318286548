#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dirhoi/geometry.hpp"
#include "dirhoi/model.hpp"

namespace dirhoi {

struct HOITriplet {
  BBox human;
  BBox object;
  int object_class = 0;
  int verb = 0;
  double confidence = 0.0;
  std::size_t query = 0;
};

inline constexpr std::size_t kDefaultTopK = 32;

// confidence = max non-background object probability × sigmoid(verb logit),
// over the learnable rows. Keeps the top_k highest, ties broken by query
// index, then verb index.
std::vector<HOITriplet> score_triplets(const ModelOutput& out, std::size_t top_k = kDefaultTopK);

struct GtPair {
  BBox human;
  BBox object;
  int object_class = 0;
  std::vector<int> verbs;
};

struct EvalScene {
  std::vector<HOITriplet> predictions;
  std::vector<GtPair> gt;
  std::vector<int> object_classes;     // every class present in the scene
  std::vector<double> keypoint_error;  // per matched human
};

enum class EvalMode { kDefault, kKnownObject };

inline constexpr double kIouThreshold = 0.5;

// One score-sorted detection list for a category: tp[i] says whether the
// i-th most confident prediction found an unmatched GT.
double average_precision(const std::vector<bool>& tp, std::size_t gt_count);

// AP of one (verb, object class) category. Returns gt_count through the
// out-parameter; AP is 0 when there is no GT.
double category_ap(std::span<const EvalScene> scenes, int verb, int object_class, EvalMode mode,
                   std::size_t* gt_count = nullptr);

struct ModeSummary {
  double full = 0.0;
  double rare = 0.0;
  double non_rare = 0.0;
  std::size_t full_count = 0;
  std::size_t rare_count = 0;
  std::size_t non_rare_count = 0;
};

struct EvalReport {
  std::size_t verb_classes = 0;
  std::size_t object_classes = 0;
  std::vector<std::size_t> gt_count;  // per category verb·C + class
  std::vector<double> ap_default;
  std::vector<double> ap_known_object;
  std::vector<bool> rare;
  ModeSummary dt;
  ModeSummary ko;
  double keypoint_error = 0.0;
  std::size_t keypoint_matches = 0;
};

// Means run over categories with at least one GT pair; `rare_categories`
// comes from training-set counts.
EvalReport evaluate(std::span<const EvalScene> scenes, std::size_t verb_classes,
                    std::size_t object_classes, const std::vector<bool>& rare_categories);

// Mean over matched humans of the per-coordinate L1 error. `keypoints` is
// rows×2K; query_of_gt[g] names the row matched to person g.
double keypoint_error(const Tensor& keypoints, const std::vector<KeypointSet>& gt,
                      std::span<const std::size_t> query_of_gt);

// Per-keypoint-coordinate mean L1 of one row against one person.
double keypoint_row_error(const Tensor& keypoints, std::size_t row, const KeypointSet& gt);

std::string format_report(const EvalReport& report);
// Flat (key, value) records: summary metrics then ap.<mode>.v<verb>.o<class>.
std::vector<std::pair<std::string, double>> report_records(const EvalReport& report);
void write_report_csv(const EvalReport& report, const std::filesystem::path& path);

}  // namespace dirhoi
