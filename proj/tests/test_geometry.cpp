#include <doctest.h>

#include <array>
#include <cmath>
#include <random>

#include "dirhoi/geometry.hpp"
#include "support/oracles.hpp"

using namespace dirhoi;

namespace {

BBox random_box(std::mt19937_64& rng, double min_extent = 0.02) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x0 = u(rng) * 0.5, y0 = u(rng) * 0.5;
  const double x1 = x0 + min_extent + u(rng) * 0.45;
  const double y1 = y0 + min_extent + u(rng) * 0.45;
  return BBox::from_corners(x0, y0, x1, y1);
}

}  // namespace

TEST_SUITE("geometry") {
  TEST_CASE("iou examples") {
    const BBox a{0.4, 0.4, 0.2, 0.3};
    CHECK(iou(a, a) == 1.0);
    CHECK(iou(a, BBox{0.9, 0.9, 0.1, 0.1}) == 0.0);

    // Corner-format [0.25, 0.75]² and [0.5, 1.0]².
    const BBox p = BBox::from_corners(0.25, 0.25, 0.75, 0.75);
    const BBox q = BBox::from_corners(0.5, 0.5, 1.0, 1.0);
    CHECK(std::fabs(iou(p, q) - testing::pixel_iou(p, q)) <= 1e-3);
    CHECK(iou(p, q) == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
  }

  TEST_CASE("iou and giou are symmetric, giou never exceeds iou") {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 1000; ++i) {
      const BBox a = random_box(rng), b = random_box(rng);
      CHECK(iou(a, b) == iou(b, a));
      CHECK(giou(a, b) == giou(b, a));
      CHECK(giou(a, b) <= iou(a, b) + 1e-12);
      CHECK(giou(a, b) > -1.0);
      CHECK(iou(a, b) >= 0.0);
      CHECK(iou(a, b) <= 1.0);
    }
  }

  TEST_CASE("giou equals iou when the enclosing box is the union") {
    // Nested boxes: the enclosure is the outer box, which is also the union.
    const BBox outer = BBox::from_corners(0.1, 0.1, 0.7, 0.8);
    const BBox inner = BBox::from_corners(0.2, 0.3, 0.5, 0.6);
    CHECK(giou(outer, inner) == doctest::Approx(iou(outer, inner)).epsilon(1e-15));
    // Side-by-side boxes sharing an edge and full height.
    const BBox left = BBox::from_corners(0.1, 0.2, 0.4, 0.6);
    const BBox right = BBox::from_corners(0.3, 0.2, 0.8, 0.6);
    CHECK(giou(left, right) == doctest::Approx(iou(left, right)).epsilon(1e-12));
  }

  TEST_CASE("giou loss examples") {
    const BBox a{0.3, 0.6, 0.2, 0.1};
    CHECK(giou_loss(a, a) == 0.0);
    const double far = giou_loss(BBox{0.001, 0.001, 0.001, 0.001}, BBox{0.999, 0.999, 0.001, 0.001});
    CHECK(far > 1.99);
    CHECK(far < 2.0);
    // Degenerate predictions are clamped, not rejected.
    const double degenerate = giou_loss(BBox{0.5, 0.5, 0.0, -0.2}, a);
    CHECK(std::isfinite(degenerate));
    CHECK(degenerate <= 2.0);
  }

  TEST_CASE("giou loss gradient matches finite differences") {
    std::mt19937_64 rng(23);
    for (int i = 0; i < 200; ++i) {
      const BBox pred = random_box(rng, 0.05), gt = random_box(rng, 0.05);
      std::array<double, 4> d{};
      const double value = giou_loss_grad(pred, gt, d);
      CHECK(value == doctest::Approx(giou_loss(pred, gt)).epsilon(1e-15));
      std::array<double, 4> num{};
      for (int k = 0; k < 4; ++k) {
        auto up = pred.as_array(), down = pred.as_array();
        up[k] += 1e-6;
        down[k] -= 1e-6;
        num[k] = (giou_loss({up[0], up[1], up[2], up[3]}, gt) -
                  giou_loss({down[0], down[1], down[2], down[3]}, gt)) / 2e-6;
      }
      double diff = 0.0, scale = 0.0;
      for (int k = 0; k < 4; ++k) {
        diff += (d[k] - num[k]) * (d[k] - num[k]);
        scale = std::max(scale, std::max(d[k] * d[k], num[k] * num[k]));
      }
      if (scale > 0.0) CHECK(std::sqrt(diff / scale) <= 1e-4);
    }
  }

  TEST_CASE("rasterize examples") {
    const PatchMask full = rasterize_mask(BBox{0.5, 0.5, 1.0, 1.0}, 5, 7);
    CHECK(full.count() == 35);

    const PatchMask quad = rasterize_mask(BBox::from_corners(0.0, 0.0, 0.5, 0.5), 4, 4);
    const std::vector<std::uint8_t> expected{1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
    CHECK(quad.cells == expected);

    const PatchMask tiny = rasterize_mask(BBox{0.51, 0.52, 0.01, 0.01}, 16, 16);
    CHECK(tiny.count() == 1);
    // Nearest center to (0.51, 0.52) is patch (8, 8).
    CHECK(tiny.cells[8 * 16 + 8] == 1);
  }

  TEST_CASE("rasterize count matches brute-force center test") {
    std::mt19937_64 rng(29);
    std::uniform_int_distribution<std::size_t> extent(1, 20);
    for (int i = 0; i < 500; ++i) {
      const BBox b = random_box(rng, 0.01);
      const std::size_t rows = extent(rng), cols = extent(rng);
      const PatchMask m = rasterize_mask(b, rows, cols);
      REQUIRE(m.cells.size() == rows * cols);
      const std::size_t expected = testing::centers_inside(b, rows, cols);
      CHECK(m.count() == std::max<std::size_t>(expected, 1));
      for (auto c : m.cells) CHECK((c == 0 || c == 1));
    }
  }

  TEST_CASE("keypoint clamping") {
    KeypointSet k{{-0.2, 0.5}, {1.3, 1.0}, {0.4, -1e-9}};
    clamp_keypoints(k);
    CHECK(k[0] == Keypoint{0.0, 0.5});
    CHECK(k[1] == Keypoint{1.0, 1.0});
    CHECK(k[2] == Keypoint{0.4, 0.0});
  }

  TEST_CASE("box validity") {
    CHECK(is_valid(BBox{0.5, 0.5, 0.2, 0.2}));
    CHECK_FALSE(is_valid(BBox{0.5, 0.5, 0.0, 0.2}));
    CHECK_FALSE(is_valid(BBox{2.0, 2.0, 0.2, 0.2}));
  }
}
