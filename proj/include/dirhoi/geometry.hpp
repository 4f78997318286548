#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace dirhoi {

// Center-format box in normalized image coordinates.
struct BBox {
  double cx = 0.5;
  double cy = 0.5;
  double w = 1.0;
  double h = 1.0;

  double x0() const { return cx - 0.5 * w; }
  double y0() const { return cy - 0.5 * h; }
  double x1() const { return cx + 0.5 * w; }
  double y1() const { return cy + 0.5 * h; }
  double area() const { return w * h; }

  std::array<double, 4> as_array() const { return {cx, cy, w, h}; }
  static BBox from_corners(double x0, double y0, double x1, double y1);

  bool operator==(const BBox&) const = default;
};

// Positive extent and some overlap with the unit square.
bool is_valid(const BBox& b);

double iou(const BBox& a, const BBox& b);
double giou(const BBox& a, const BBox& b);

// Smallest extent a predicted box is clamped to before GIoU.
inline constexpr double kMinBoxExtent = 1e-6;

// 1 - GIoU with pred extents clamped to kMinBoxExtent. Range [0, 2).
double giou_loss(const BBox& pred, const BBox& gt);

// Same value plus d(loss)/d(cx, cy, w, h) of pred.
double giou_loss_grad(const BBox& pred, const BBox& gt,
                      std::array<double, 4>& d_pred);

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Keypoint&) const = default;
};

using KeypointSet = std::vector<Keypoint>;

// Clamps every coordinate into [0, 1].
void clamp_keypoints(KeypointSet& points);

// H×W binary grid in row-major order over patch rows.
struct PatchMask {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> cells;

  std::size_t count() const;
  bool operator==(const PatchMask&) const = default;
};

// Patch (r, c) is on iff its center lies inside the box (closed interval).
// If no center is covered, the patch nearest the box center is switched on.
PatchMask rasterize_mask(const BBox& box, std::size_t rows, std::size_t cols);

}  // namespace dirhoi
