#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dirhoi/geometry.hpp"
#include "dirhoi/hoi.hpp"
#include "dirhoi/tensor.hpp"

namespace dirhoi {

// Keypoint order used by the generator.
enum KeypointIndex : std::size_t {
  kHead = 0,
  kLeftWrist = 1,
  kRightWrist = 2,
  kLeftAnkle = 3,
  kRightAnkle = 4,
};

// Verb vocabulary. The first three encode the spatial relation and are a
// partition (exactly one per pair); the last three need the pose together
// with the object class.
enum Verb : int {
  kHold = 0,    // object center inside the person box
  kBeside = 1,  // neither inside nor above
  kAbove = 2,   // object center above the person's top edge
  kThrow = 3,   // class 0 or 3, a wrist above the head
  kReach = 4,   // class 1 or 2, a wrist beyond the box edge on the object's side
  kKick = 5,    // class 0 or 2, an ankle lifted into the upper 80% of the box
};

struct GeneratorConfig {
  std::size_t grid_rows = 16;
  std::size_t grid_cols = 16;
  std::size_t raw_features = 8;
  std::size_t keypoints = 5;
  std::size_t object_classes = 4;
  std::size_t verb_classes = 6;
  std::size_t train_scenes = 500;
  std::size_t test_scenes = 200;
  double feature_noise = 0.05;
  double pose_label_noise = 0.01;
  // Sampling weight of the last object class; the others share the rest.
  double rare_class_weight = 0.03;

  void validate() const;
  bool operator==(const GeneratorConfig&) const = default;
};

struct Person {
  BBox box;
  KeypointSet keypoints;   // exact
  KeypointSet pose_label;  // exact + N(0, pose_label_noise²), clamped
};

struct SceneObject {
  BBox box;
  int object_class = 0;
};

struct Interaction {
  std::size_t person = 0;
  std::size_t object = 0;
  std::vector<int> verbs;  // ascending verb ids
};

struct Scene {
  std::uint64_t id = 0;
  std::vector<double> features;  // (H·W)×F row-major
  std::vector<Person> persons;
  std::vector<SceneObject> objects;
  std::vector<Interaction> pairs;
};

// Training instances of a (verb, object class) category index verb·C + class.
inline std::size_t hoi_category(int verb, int object_class, std::size_t object_classes) {
  return static_cast<std::size_t>(verb) * object_classes + static_cast<std::size_t>(object_class);
}

inline constexpr std::size_t kRareThreshold = 10;

struct DatasetSplit {
  GeneratorConfig config;
  std::uint64_t seed = 0;
  std::vector<Scene> train;
  std::vector<Scene> test;
  std::vector<std::size_t> verb_counts;  // training instances per verb
  std::vector<std::size_t> hoi_counts;   // training instances per category
  std::vector<bool> rare_verbs;          // fewer than kRareThreshold
  std::vector<bool> rare_categories;     // fewer than kRareThreshold

  // Recomputes the frequency tables and rare flags from `train`.
  void refresh_statistics();
};

DatasetSplit generate(std::uint64_t seed, const GeneratorConfig& config);

// Labels implied by the geometry of one person-object pair.
std::vector<int> interaction_verbs(const Person& person, const SceneObject& object);

// Re-renders the patch features of a scene from its annotations.
std::vector<double> render_features(const Scene& scene, const GeneratorConfig& config,
                                    std::uint64_t noise_seed);

std::vector<PairTarget> scene_targets(const Scene& scene, std::size_t verb_classes);
Tensor scene_features(const Scene& scene, const GeneratorConfig& config);

}  // namespace dirhoi
