#pragma once

#include <cstdint>
#include <vector>

#include "dirhoi/geometry.hpp"

namespace dirhoi {

struct BoxPair {
  BBox human;
  BBox object;
};

// Supervision for one annotated human-object pair.
struct PairTarget {
  BBox human;
  BBox object;
  int object_class = 0;
  std::vector<std::uint8_t> verbs;  // multi-hot over verb classes
  KeypointSet pose_label;           // pseudo-label used by the pose loss
  KeypointSet keypoints;            // exact keypoints, for evaluation only
};

inline std::vector<BoxPair> box_pairs(const std::vector<PairTarget>& targets) {
  std::vector<BoxPair> out;
  out.reserve(targets.size());
  for (const auto& t : targets) out.push_back({t.human, t.object});
  return out;
}

}  // namespace dirhoi
