#pragma once

#include <filesystem>
#include <iosfwd>

#include "dirhoi/synthetic.hpp"

namespace dirhoi {

// Line-delimited JSON. Line 1 is a header
//   {"format": "dirhoi-annotations", "version": 1, "seed": .., "config": {..}}
// and every following line is one scene:
//   {"split": "train"|"test", "id": .., "features": "<base64 f64 LE>",
//    "persons": [{"box": [cx,cy,w,h], "keypoints": [[x,y],..], "pose_label": [[x,y],..]}],
//    "objects": [{"box": [..], "class": c}],
//    "pairs": [{"person": i, "object": j, "verbs": [..]}]}
inline constexpr int kAnnotationVersion = 1;

void write_annotations(const DatasetSplit& split, std::ostream& out);
DatasetSplit read_annotations(std::istream& in);

void save_annotations(const DatasetSplit& split, const std::filesystem::path& path);
DatasetSplit load_annotations(const std::filesystem::path& path);

}  // namespace dirhoi
