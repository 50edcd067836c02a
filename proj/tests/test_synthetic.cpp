#include <cmath>

#include "doctest.h"
#include "dgmm/error.hpp"
#include "dgmm/synthetic.hpp"

using namespace dgmm;
using doctest::Approx;

namespace {

SyntheticSpec base_spec(RegionPattern pattern, std::uint64_t seed) {
  SyntheticSpec s;
  s.classes = 3;
  s.channels = 2;
  s.height = 40;
  s.width = 30;
  s.means = {0, 10, 5, -5, 20, 0};
  s.stds = {1, 2, 0.5, 1, 1.5, 3};
  s.pattern = pattern;
  s.seed = seed;
  return s;
}

ErrorCode spec_code(const SyntheticSpec& s) {
  try {
    generate_synthetic(s);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("spec accepted");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("generation is deterministic in the seed") {
  for (auto p : {RegionPattern::VoronoiBlobs, RegionPattern::NestedRings, RegionPattern::HalfPlanes}) {
    const auto a = generate_synthetic(base_spec(p, 5));
    const auto b = generate_synthetic(base_spec(p, 5));
    const auto c = generate_synthetic(base_spec(p, 6));
    CHECK(a.image.values() == b.image.values());
    CHECK(a.ground_truth == b.ground_truth);
    CHECK(a.image.values() != c.image.values());
    CHECK(region_layout(base_spec(p, 5)) == a.ground_truth.labels());
  }
}

TEST_CASE("every class appears and values follow the class statistics") {
  for (auto p : {RegionPattern::VoronoiBlobs, RegionPattern::NestedRings, RegionPattern::HalfPlanes}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto spec = base_spec(p, seed);
      const auto s = generate_synthetic(spec);
      for (int k = 0; k < spec.classes; ++k) {
        long n = 0;
        std::vector<double> sum(spec.channels, 0.0);
        for (std::size_t i = 0; i < s.image.pixel_count(); ++i) {
          if (s.ground_truth[i] != k) continue;
          ++n;
          for (int j = 0; j < spec.channels; ++j) sum[j] += s.image.sample(i)[j];
        }
        REQUIRE(n > 0);
        for (int j = 0; j < spec.channels; ++j) {
          const double sd = spec.stds[k * spec.channels + j];
          CHECK(std::abs(sum[j] / n - spec.means[k * spec.channels + j]) < 4.0 * sd / std::sqrt(double(n)));
        }
      }
    }
  }
}

TEST_CASE("tiny stds reproduce the class means") {
  auto spec = base_spec(RegionPattern::VoronoiBlobs, 3);
  spec.stds.assign(6, 1e-9);
  const auto s = generate_synthetic(spec);
  for (std::size_t i = 0; i < s.image.pixel_count(); ++i) {
    for (int j = 0; j < 2; ++j) {
      CHECK(std::abs(s.image.sample(i)[j] - spec.means[s.ground_truth[i] * 2 + j]) < 1e-3);
    }
  }
}

TEST_CASE("noise flips roughly the requested fraction of pixels") {
  auto spec = base_spec(RegionPattern::HalfPlanes, 4);
  spec.height = spec.width = 100;
  spec.stds.assign(6, 1e-9);
  spec.noise = 0.2;
  const auto s = generate_synthetic(spec);
  long flipped = 0;
  for (std::size_t i = 0; i < s.image.pixel_count(); ++i) {
    flipped += std::abs(s.image.sample(i)[0] - spec.means[s.ground_truth[i] * 2]) > 1e-3;
  }
  const double rate = flipped / 10000.0;
  CHECK(std::abs(rate - 0.2) < 4.0 * std::sqrt(0.2 * 0.8 / 10000.0));
}

TEST_CASE("spec text round trip") {
  auto spec = base_spec(RegionPattern::NestedRings, 77);
  spec.noise = 0.125;
  const auto back = parse_synthetic_spec(format_synthetic_spec(spec));
  CHECK(back.classes == spec.classes);
  CHECK(back.channels == spec.channels);
  CHECK(back.height == spec.height);
  CHECK(back.width == spec.width);
  CHECK(back.means == spec.means);
  CHECK(back.stds == spec.stds);
  CHECK(back.pattern == spec.pattern);
  CHECK(back.noise == spec.noise);
  CHECK(back.seed == spec.seed);
  const auto parsed = parse_synthetic_spec("# comment\nclasses=2\nmeans=0,1\nstds=1,1\npattern=half_planes\n");
  CHECK(parsed.classes == 2);
  CHECK(parsed.pattern == RegionPattern::HalfPlanes);
}

TEST_CASE("invalid specs") {
  auto s = base_spec(RegionPattern::VoronoiBlobs, 0);
  s.stds[2] = 0.0;
  CHECK(spec_code(s) == ErrorCode::SpecInvalid);
  s = base_spec(RegionPattern::VoronoiBlobs, 0);
  s.means.pop_back();
  CHECK(spec_code(s) == ErrorCode::SpecInvalid);
  s = base_spec(RegionPattern::VoronoiBlobs, 0);
  s.classes = 1;
  CHECK(spec_code(s) == ErrorCode::SpecInvalid);
  s = base_spec(RegionPattern::VoronoiBlobs, 0);
  s.noise = 0.7;
  CHECK(spec_code(s) == ErrorCode::SpecInvalid);
  CHECK_THROWS_AS(parse_synthetic_spec("colour=blue\n"), Error);
  CHECK_THROWS_AS(parse_region_pattern("spirals"), Error);
}
