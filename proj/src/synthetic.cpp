#include "dirhoi/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "dirhoi/errors.hpp"

namespace dirhoi {
namespace {

constexpr std::size_t kKeypoints = 5;
constexpr std::size_t kVerbs = 6;
constexpr std::size_t kClasses = 4;
constexpr std::size_t kChannels = 8;

enum class Pose { kNeutral, kRaise, kReach, kKick };
enum class Relation { kHold, kBeside, kAbove };

struct Rng {
  explicit Rng(std::uint64_t seed) : engine(seed) {}
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine);
  }
  double normal(double sigma) { return std::normal_distribution<double>(0.0, sigma)(engine); }
  std::size_t pick(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine);
  }
  bool coin(double p) { return uniform(0.0, 1.0) < p; }
  std::mt19937_64 engine;
};

std::uint64_t mix(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

BBox shift_inside(BBox b) {
  b.cx = std::clamp(b.cx, 0.5 * b.w + 0.01, 1.0 - 0.5 * b.w - 0.01);
  b.cy = std::clamp(b.cy, 0.5 * b.h + 0.01, 1.0 - 0.5 * b.h - 0.01);
  return b;
}

// Keypoints in box-relative units (0..1 across the person box).
KeypointSet pose_keypoints(const BBox& person, Pose pose, int side, Rng& rng) {
  std::array<Keypoint, kKeypoints> rel{{{0.5, 0.1}, {0.2, 0.55}, {0.8, 0.55}, {0.35, 0.95},
                                        {0.65, 0.95}}};
  const std::size_t wrist = side > 0 ? kRightWrist : kLeftWrist;
  const std::size_t ankle = side > 0 ? kRightAnkle : kLeftAnkle;
  switch (pose) {
    case Pose::kNeutral:
      break;
    case Pose::kRaise:
      rel[wrist] = {side > 0 ? 0.7 : 0.3, -0.08};
      break;
    case Pose::kReach:
      rel[wrist] = {side > 0 ? 1.2 : -0.2, 0.4};
      break;
    case Pose::kKick:
      rel[ankle] = {side > 0 ? 0.95 : 0.05, 0.6};
      break;
  }
  KeypointSet points(kKeypoints);
  for (std::size_t k = 0; k < kKeypoints; ++k) {
    const double u = rel[k].x + rng.uniform(-0.03, 0.03);
    const double v = rel[k].y + rng.uniform(-0.03, 0.03);
    points[k] = {person.x0() + u * person.w, person.y0() + v * person.h};
  }
  clamp_keypoints(points);
  return points;
}

BBox sample_person(Rng& rng) {
  BBox b;
  b.w = rng.uniform(0.2, 0.3);
  b.h = rng.uniform(0.4, 0.55);
  b.cx = rng.uniform(0.5 * b.w + 0.02, 1.0 - 0.5 * b.w - 0.02);
  b.cy = rng.uniform(0.5 * b.h + 0.12, 1.0 - 0.5 * b.h - 0.02);
  return b;
}

BBox place_object(const BBox& person, Relation relation, int side, Rng& rng) {
  BBox o;
  o.w = rng.uniform(0.12, 0.22);
  o.h = rng.uniform(0.12, 0.22);
  switch (relation) {
    case Relation::kHold:
      o.cx = person.cx + rng.uniform(-0.2, 0.2) * person.w;
      o.cy = person.cy + rng.uniform(-0.15, 0.2) * person.h;
      break;
    case Relation::kBeside:
      o.cx = side > 0 ? person.x1() + 0.5 * o.w + rng.uniform(0.0, 0.06)
                      : person.x0() - 0.5 * o.w - rng.uniform(0.0, 0.06);
      o.cy = person.cy + rng.uniform(-0.1, 0.3) * person.h;
      break;
    case Relation::kAbove:
      o.cx = person.cx + rng.uniform(-0.25, 0.25) * person.w;
      o.cy = person.y0() - 0.5 * o.h - rng.uniform(0.0, 0.04);
      break;
  }
  return shift_inside(o);
}

int sample_class(double rare_weight, Rng& rng) {
  const double u = rng.uniform(0.0, 1.0);
  if (u < rare_weight) return static_cast<int>(kClasses - 1);
  const double common = (1.0 - rare_weight) / static_cast<double>(kClasses - 1);
  return std::min(static_cast<int>((u - rare_weight) / common), static_cast<int>(kClasses - 2));
}

double soft_inside(const BBox& b, double x, double y) {
  constexpr double tau = 0.02;
  auto s = [](double t) { return 1.0 / (1.0 + std::exp(-t / tau)); };
  return s(x - b.x0()) * s(b.x1() - x) * s(y - b.y0()) * s(b.y1() - y);
}

double bump(const Keypoint& p, double x, double y) {
  constexpr double sigma = 0.045;
  const double dx = x - p.x;
  const double dy = y - p.y;
  return std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
}

Scene make_scene(std::uint64_t id, const GeneratorConfig& config, Rng& rng,
                 std::uint64_t noise_seed) {
  Scene scene;
  scene.id = id;
  const std::size_t n_persons = rng.coin(0.6) ? 1 : 2;
  const std::size_t n_distractors = rng.coin(0.5) ? 0 : 1;

  for (std::size_t p = 0; p < n_persons; ++p) {
    BBox person = sample_person(rng);
    for (int attempt = 0; attempt < 20 && p > 0; ++attempt) {
      if (iou(person, scene.persons[0].box) < 0.05) break;
      person = sample_person(rng);
    }
    const int side = rng.coin(0.5) ? 1 : -1;
    const auto relation = static_cast<Relation>(rng.pick(3));
    const auto pose = static_cast<Pose>(rng.pick(4));
    SceneObject object{place_object(person, relation, side, rng),
                       sample_class(config.rare_class_weight, rng)};
    // The object side drives which limb moves; recompute it from geometry.
    const int object_side = object.box.cx >= person.cx ? 1 : -1;

    Person subject;
    subject.box = person;
    subject.keypoints = pose_keypoints(person, pose, object_side, rng);
    subject.pose_label = subject.keypoints;
    for (auto& k : subject.pose_label) {
      k.x += rng.normal(config.pose_label_noise);
      k.y += rng.normal(config.pose_label_noise);
    }
    clamp_keypoints(subject.pose_label);

    scene.persons.push_back(subject);
    scene.objects.push_back(object);
    Interaction pair{p, p, interaction_verbs(subject, object)};
    scene.pairs.push_back(pair);
  }
  for (std::size_t d = 0; d < n_distractors; ++d) {
    BBox o;
    o.w = rng.uniform(0.1, 0.18);
    o.h = rng.uniform(0.1, 0.18);
    o.cx = rng.uniform(0.5 * o.w + 0.01, 1.0 - 0.5 * o.w - 0.01);
    o.cy = rng.uniform(0.5 * o.h + 0.01, 1.0 - 0.5 * o.h - 0.01);
    scene.objects.push_back({o, sample_class(config.rare_class_weight, rng)});
  }
  scene.features = render_features(scene, config, noise_seed);
  return scene;
}

std::vector<Scene> make_scenes(std::uint64_t seed, std::uint64_t stream, std::size_t count,
                               const GeneratorConfig& config) {
  std::vector<Scene> scenes;
  scenes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(mix(seed, stream, i));
    const std::uint64_t id = (stream << 32) | i;
    scenes.push_back(make_scene(id, config, rng, mix(seed, stream + 100, i)));
  }
  return scenes;
}

}  // namespace

void GeneratorConfig::validate() const {
  if (keypoints != kKeypoints) throw ConfigError("generator needs exactly 5 keypoints");
  if (verb_classes != kVerbs) throw ConfigError("generator needs exactly 6 verb classes");
  if (object_classes != kClasses) throw ConfigError("generator needs exactly 4 object classes");
  if (raw_features != kChannels) throw ConfigError("generator renders exactly 8 channels");
  if (grid_rows == 0 || grid_cols == 0) throw ConfigError("empty patch grid");
  if (!(rare_class_weight > 0.0 && rare_class_weight < 1.0))
    throw ConfigError("rare_class_weight must lie in (0, 1)");
  if (feature_noise < 0.0 || pose_label_noise < 0.0) throw ConfigError("negative noise level");
}

std::vector<int> interaction_verbs(const Person& person, const SceneObject& object) {
  const BBox& p = person.box;
  const BBox& o = object.box;
  const auto& kp = person.keypoints;
  std::vector<int> verbs;

  const bool inside = o.cx >= p.x0() && o.cx <= p.x1() && o.cy >= p.y0() && o.cy <= p.y1();
  if (inside) {
    verbs.push_back(kHold);
  } else if (o.cy < p.y0()) {
    verbs.push_back(kAbove);
  } else {
    verbs.push_back(kBeside);
  }

  const int c = object.object_class;
  const double wrist_top = std::min(kp[kLeftWrist].y, kp[kRightWrist].y);
  if ((c == 0 || c == 3) && wrist_top < kp[kHead].y) verbs.push_back(kThrow);

  const bool right = o.cx >= p.cx;
  const bool extended = right ? std::max(kp[kLeftWrist].x, kp[kRightWrist].x) > p.x1()
                              : std::min(kp[kLeftWrist].x, kp[kRightWrist].x) < p.x0();
  if ((c == 1 || c == 2) && extended) verbs.push_back(kReach);

  const double ankle_top = std::min(kp[kLeftAnkle].y, kp[kRightAnkle].y);
  if ((c == 0 || c == 2) && ankle_top < p.y0() + 0.8 * p.h) verbs.push_back(kKick);

  std::sort(verbs.begin(), verbs.end());
  return verbs;
}

std::vector<double> render_features(const Scene& scene, const GeneratorConfig& config,
                                    std::uint64_t noise_seed) {
  const std::size_t rows = config.grid_rows;
  const std::size_t cols = config.grid_cols;
  std::vector<double> f(rows * cols * kChannels, 0.0);
  Rng rng(noise_seed);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double x = (static_cast<double>(c) + 0.5) / static_cast<double>(cols);
      const double y = (static_cast<double>(r) + 0.5) / static_cast<double>(rows);
      double* cell = &f[(r * cols + c) * kChannels];
      for (const auto& person : scene.persons) {
        const double s = soft_inside(person.box, x, y);
        cell[0] = std::max(cell[0], s);
        cell[6] += s * person.box.w;
        cell[7] += s * person.box.h;
        const auto& kp = person.keypoints;
        cell[4] += bump(kp[kLeftWrist], x, y) + bump(kp[kRightWrist], x, y);
        cell[5] += bump(kp[kHead], x, y) + bump(kp[kLeftAnkle], x, y) +
                   bump(kp[kRightAnkle], x, y);
      }
      for (const auto& object : scene.objects) {
        const double s = soft_inside(object.box, x, y);
        const double angle = 0.5 * std::numbers::pi * object.object_class;
        cell[1] = std::max(cell[1], s);
        cell[2] += s * std::cos(angle);
        cell[3] += s * std::sin(angle);
        cell[6] += s * object.box.w;
        cell[7] += s * object.box.h;
      }
      for (std::size_t ch = 0; ch < kChannels; ++ch) cell[ch] += rng.normal(config.feature_noise);
    }
  }
  return f;
}

void DatasetSplit::refresh_statistics() {
  const std::size_t verbs = config.verb_classes;
  const std::size_t classes = config.object_classes;
  verb_counts.assign(verbs, 0);
  hoi_counts.assign(verbs * classes, 0);
  for (const auto& scene : train) {
    for (const auto& pair : scene.pairs) {
      const int cls = scene.objects[pair.object].object_class;
      for (int v : pair.verbs) {
        ++verb_counts[static_cast<std::size_t>(v)];
        ++hoi_counts[hoi_category(v, cls, classes)];
      }
    }
  }
  rare_verbs.assign(verbs, false);
  rare_categories.assign(verbs * classes, false);
  for (std::size_t v = 0; v < verbs; ++v) rare_verbs[v] = verb_counts[v] < kRareThreshold;
  for (std::size_t i = 0; i < hoi_counts.size(); ++i)
    rare_categories[i] = hoi_counts[i] < kRareThreshold;
}

DatasetSplit generate(std::uint64_t seed, const GeneratorConfig& config) {
  config.validate();
  DatasetSplit split;
  split.config = config;
  split.seed = seed;
  split.train = make_scenes(seed, 1, config.train_scenes, config);
  split.test = make_scenes(seed, 2, config.test_scenes, config);
  split.refresh_statistics();
  return split;
}

std::vector<PairTarget> scene_targets(const Scene& scene, std::size_t verb_classes) {
  std::vector<PairTarget> targets;
  targets.reserve(scene.pairs.size());
  for (const auto& pair : scene.pairs) {
    const auto& person = scene.persons[pair.person];
    const auto& object = scene.objects[pair.object];
    PairTarget t;
    t.human = person.box;
    t.object = object.box;
    t.object_class = object.object_class;
    t.verbs.assign(verb_classes, 0);
    for (int v : pair.verbs) t.verbs[static_cast<std::size_t>(v)] = 1;
    t.pose_label = person.pose_label;
    t.keypoints = person.keypoints;
    targets.push_back(std::move(t));
  }
  return targets;
}

Tensor scene_features(const Scene& scene, const GeneratorConfig& config) {
  return Tensor({config.grid_rows * config.grid_cols, config.raw_features}, scene.features);
}

}  // namespace dirhoi
