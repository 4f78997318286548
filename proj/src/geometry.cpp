#include "dirhoi/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dirhoi {

BBox BBox::from_corners(double x0, double y0, double x1, double y1) {
  return {0.5 * (x0 + x1), 0.5 * (y0 + y1), x1 - x0, y1 - y0};
}

bool is_valid(const BBox& b) {
  if (!(b.w > 0.0) || !(b.h > 0.0)) return false;
  if (!std::isfinite(b.cx) || !std::isfinite(b.cy)) return false;
  return b.x1() > 0.0 && b.x0() < 1.0 && b.y1() > 0.0 && b.y0() < 1.0;
}

namespace {

double overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

BBox clamp_extent(BBox b) {
  b.w = std::max(b.w, kMinBoxExtent);
  b.h = std::max(b.h, kMinBoxExtent);
  return b;
}

}  // namespace

double iou(const BBox& a, const BBox& b) {
  const double inter =
      overlap(a.x0(), a.x1(), b.x0(), b.x1()) * overlap(a.y0(), a.y1(), b.y0(), b.y1());
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

double giou(const BBox& a, const BBox& b) {
  const double inter =
      overlap(a.x0(), a.x1(), b.x0(), b.x1()) * overlap(a.y0(), a.y1(), b.y0(), b.y1());
  const double uni = a.area() + b.area() - inter;
  const double cw = std::max(a.x1(), b.x1()) - std::min(a.x0(), b.x0());
  const double ch = std::max(a.y1(), b.y1()) - std::min(a.y0(), b.y0());
  const double enclosing = cw * ch;
  return inter / uni - (enclosing - uni) / enclosing;
}

double giou_loss(const BBox& pred, const BBox& gt) {
  return 1.0 - giou(clamp_extent(pred), gt);
}

double giou_loss_grad(const BBox& pred_in, const BBox& gt,
                      std::array<double, 4>& d_pred) {
  const BBox a = clamp_extent(pred_in);
  const double ax0 = a.x0(), ax1 = a.x1(), ay0 = a.y0(), ay1 = a.y1();
  const double bx0 = gt.x0(), bx1 = gt.x1(), by0 = gt.y0(), by1 = gt.y1();

  const double iw = std::max(0.0, std::min(ax1, bx1) - std::max(ax0, bx0));
  const double ih = std::max(0.0, std::min(ay1, by1) - std::max(ay0, by0));
  const double inter = iw * ih;
  const double area_a = a.w * a.h;
  const double uni = area_a + gt.w * gt.h - inter;
  const double cw = std::max(ax1, bx1) - std::min(ax0, bx0);
  const double ch = std::max(ay1, by1) - std::min(ay0, by0);
  const double enc = cw * ch;
  const double g = inter / uni - 1.0 + uni / enc;

  // Partials of giou w.r.t. intersection, pred area and enclosing area.
  const double d_inter = 1.0 / uni + inter / (uni * uni) - 1.0 / enc;
  const double d_area = -inter / (uni * uni) + 1.0 / enc;
  const double d_enc = -uni / (enc * enc);

  // Corner partials: x0, x1, y0, y1 of pred.
  double gx0 = 0.0, gx1 = 0.0, gy0 = 0.0, gy1 = 0.0;
  if (iw > 0.0) {
    const double c = d_inter * ih;
    if (ax1 <= bx1) gx1 += c;
    if (ax0 >= bx0) gx0 -= c;
  }
  if (ih > 0.0) {
    const double c = d_inter * iw;
    if (ay1 <= by1) gy1 += c;
    if (ay0 >= by0) gy0 -= c;
  }
  gx1 += d_area * a.h;
  gx0 -= d_area * a.h;
  gy1 += d_area * a.w;
  gy0 -= d_area * a.w;
  if (ax1 >= bx1) gx1 += d_enc * ch;
  if (ax0 <= bx0) gx0 -= d_enc * ch;
  if (ay1 >= by1) gy1 += d_enc * cw;
  if (ay0 <= by0) gy0 -= d_enc * cw;

  // loss = 1 - giou; x0 = cx - w/2, x1 = cx + w/2.
  d_pred[0] = -(gx0 + gx1);
  d_pred[1] = -(gy0 + gy1);
  d_pred[2] = pred_in.w > kMinBoxExtent ? -0.5 * (gx1 - gx0) : 0.0;
  d_pred[3] = pred_in.h > kMinBoxExtent ? -0.5 * (gy1 - gy0) : 0.0;
  return 1.0 - g;
}

void clamp_keypoints(KeypointSet& points) {
  for (auto& p : points) {
    p.x = std::clamp(p.x, 0.0, 1.0);
    p.y = std::clamp(p.y, 0.0, 1.0);
  }
}

std::size_t PatchMask::count() const {
  return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), 1));
}

PatchMask rasterize_mask(const BBox& box, std::size_t rows, std::size_t cols) {
  PatchMask mask{rows, cols, std::vector<std::uint8_t>(rows * cols, 0)};
  bool any = false;
  for (std::size_t r = 0; r < rows; ++r) {
    const double y = (static_cast<double>(r) + 0.5) / static_cast<double>(rows);
    if (y < box.y0() || y > box.y1()) continue;
    for (std::size_t c = 0; c < cols; ++c) {
      const double x = (static_cast<double>(c) + 0.5) / static_cast<double>(cols);
      if (x < box.x0() || x > box.x1()) continue;
      mask.cells[r * cols + c] = 1;
      any = true;
    }
  }
  if (!any && rows * cols > 0) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const double dx = (static_cast<double>(c) + 0.5) / static_cast<double>(cols) - box.cx;
        const double dy = (static_cast<double>(r) + 0.5) / static_cast<double>(rows) - box.cy;
        const double d = dx * dx + dy * dy;
        if (d < best_d) {
          best_d = d;
          best = r * cols + c;
        }
      }
    }
    mask.cells[best] = 1;
  }
  return mask;
}

}  // namespace dirhoi
