#include <cmath>

#include "doctest.h"
#include "dgmm/error.hpp"
#include "dgmm/image.hpp"
#include "support.hpp"

using namespace dgmm;

TEST_CASE("roi pixels are indexed in row-major order") {
  PixelDomain d(2, 3, {0, 1, 1, 1, 0, 1});
  REQUIRE(d.size() == 4);
  CHECK(d.grid_offset(0) == 1);
  CHECK(d.grid_offset(3) == 5);
  CHECK(d.roi_index(4) == -1);
  CHECK(d.roi_index(3) == 2);
}

TEST_CASE("domain without roi pixels is rejected") {
  CHECK_THROWS_AS(PixelDomain(2, 2, {0, 0, 0, 0}), Error);
  CHECK_THROWS_AS(PixelDomain(2, 2, {1, 1, 1}), Error);
}

TEST_CASE("non-finite values inside the roi are rejected, outside ignored") {
  PixelDomain d(1, 2, {1, 0});
  CHECK_NOTHROW(MultiChannelImage(d, 1, {1.0, std::nan("")}));
  try {
    MultiChannelImage(PixelDomain::full(1, 2), 1, {1.0, INFINITY});
    FAIL("expected NonFinite");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFinite);
  }
}

TEST_CASE("responsibility rows must lie on the simplex") {
  const auto d = PixelDomain::full(1, 2);
  CHECK_NOTHROW(ResponsibilityField(d, 2, {0.3, 0.7, 1.0, 0.0}));
  CHECK_THROWS_AS(ResponsibilityField(d, 2, {0.3, 0.6, 1.0, 0.0}), Error);
  CHECK_THROWS_AS(ResponsibilityField(d, 2, {-0.1, 1.1, 1.0, 0.0}), Error);
}

TEST_CASE("argmax labeling") {
  const auto d = PixelDomain::full(1, 3);
  const ResponsibilityField w(d, 3, {0.1, 0.7, 0.2, 0.5, 0.5, 0.0, 0.0, 0.0, 1.0});
  const auto mask = argmax_labeling(w);
  CHECK(mask.labels() == std::vector<int>{1, 0, 2});

  SUBCASE("one-hot rows give a constant mask") {
    const ResponsibilityField hot(d, 3, {0, 0, 1, 0, 0, 1, 0, 0, 1});
    CHECK(argmax_labeling(hot).labels() == std::vector<int>{2, 2, 2});
  }
}

TEST_CASE("argmax is invariant under monotone row transforms") {
  testing::Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto d = testing::random_domain(rng, 4, 5);
    const auto w = testing::random_field(rng, d, 4, 0.0);
    std::vector<double> squared(w.weights().size());
    for (std::size_t i = 0; i < d.size(); ++i) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += squared[i * 4 + k] = w(i, k) * w(i, k);
      for (int k = 0; k < 4; ++k) squared[i * 4 + k] /= s;
    }
    CHECK(argmax_labeling(w) == argmax_labeling(ResponsibilityField(d, 4, squared)));
  }
}

TEST_CASE("normalize image") {
  const auto n = normalize_image(testing::line_image({1.0, 3.0}));
  CHECK(n.sample(0)[0] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(n.sample(1)[0] == doctest::Approx(1.0).epsilon(1e-12));

  try {
    normalize_image(testing::line_image({5.0, 5.0}));
    FAIL("expected ZeroVariance");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroVariance);
  }
}

TEST_CASE("normalize uses roi pixels only and zeroes the rest") {
  PixelDomain d(1, 3, {1, 0, 1});
  const auto n = normalize_image(MultiChannelImage(d, 1, {1.0, 1000.0, 3.0}));
  CHECK(n.at(0, 0, 1) == 0.0);
  CHECK(n.sample(0)[0] == doctest::Approx(-1.0));
  CHECK(n.sample(1)[0] == doctest::Approx(1.0));
}

TEST_CASE("normalize is idempotent") {
  testing::Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const auto d = testing::random_domain(rng, 5, 6);
    if (d.size() < 2) continue;
    const auto img = testing::random_image(rng, d, 3, 4.0);
    const auto once = normalize_image(img);
    const auto twice = normalize_image(once);
    for (std::size_t i = 0; i < once.samples().size(); ++i) {
      CHECK(twice.samples()[i] == doctest::Approx(once.samples()[i]).epsilon(1e-6));
    }
  }
}

TEST_CASE("pixel list round trip preserves values exactly") {
  testing::Rng rng(3);
  const auto d = testing::random_domain(rng, 6, 7);
  const auto img = testing::random_image(rng, d, 2);
  const auto back = image_from_samples(d, 2, img.samples());
  CHECK(back.samples() == img.samples());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto off = d.grid_offset(i);
    const int r = static_cast<int>(off / d.width());
    const int c = static_cast<int>(off % d.width());
    CHECK(back.at(1, r, c) == img.at(1, r, c));
  }
}

TEST_CASE("mask grid round trip") {
  PixelDomain d(2, 2, {1, 0, 1, 1});
  const SegmentationMask m(d, 3, {2, 0, 1});
  const auto grid = m.to_grid();
  CHECK(grid == std::vector<std::uint8_t>{2, 0, 0, 1});
  CHECK(SegmentationMask::from_grid(d, 3, grid) == m);
  CHECK_THROWS_AS(SegmentationMask(d, 2, {2, 0, 1}), Error);
}
