#include <cmath>

#include "doctest.h"
#include "dgmm/evaluation.hpp"
#include "dgmm/gmm.hpp"
#include "dgmm/svgmm.hpp"
#include "dgmm/synthetic.hpp"
#include "support.hpp"

using namespace dgmm;
using doctest::Approx;

namespace {

std::vector<double> constant_rows(const std::vector<double>& pi, std::size_t n) {
  std::vector<double> rows;
  for (std::size_t i = 0; i < n; ++i) rows.insert(rows.end(), pi.begin(), pi.end());
  return rows;
}

SyntheticSpec separated_spec(std::uint64_t seed) {
  SyntheticSpec s;
  s.classes = 2;
  s.channels = 1;
  s.height = 24;
  s.width = 24;
  s.means = {0.0, 10.0};
  s.stds = {0.5, 0.5};
  s.pattern = RegionPattern::HalfPlanes;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("constant proportions reproduce the GMM nll exactly") {
  testing::Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const auto img = testing::random_image(rng, testing::random_domain(rng, 6, 6), 2);
    MixtureParams p;
    p.components = testing::random_components(rng, 3, 2);
    p.weights = testing::random_simplex_rows(rng, 1, 3, 0.1);
    const SpatialMixtureParams v{constant_rows(p.weights, img.pixel_count()), p.components};
    CHECK(nll_v(img, v) == nll(img, p));
  }
}

TEST_CASE("one-hot proportions at the generating class") {
  const auto img = testing::line_image({0.0, 3.0});
  const SpatialMixtureParams p{{1, 0, 0, 1}, {{{0.0}, {1.0}}, {{3.0}, {1.0}}}};
  CHECK(nll_v(img, p) == Approx(0.918939).epsilon(1e-6));
}

TEST_CASE("nll_v matches direct summation") {
  testing::Rng rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const auto img = testing::random_image(rng, testing::random_domain(rng, 3, 3, 1.0), 1);
    const auto comps = testing::random_components(rng, 3, 1);
    const auto rows = testing::random_simplex_rows(rng, img.pixel_count(), 3, 0.1);
    const double ref = testing::naive_nll(img, comps, [&](std::size_t i, int k) { return rows[i * 3 + k]; });
    CHECK(std::abs(nll_v(img, {rows, comps}) - ref) < 1e-9);
  }
}

TEST_CASE("e-step with spatial proportions") {
  const auto img = testing::line_image({0.5});
  const std::vector<DiagGaussian> comps{{{0.0}, {1.0}}, {{1.0}, {1.0}}};
  CHECK(e_step_v(img, {{1.0, 0.0}, comps})(0, 0) == 1.0);
  const auto w = e_step_v(img, {{0.9, 0.1}, comps});
  CHECK(w(0, 0) == Approx(0.9));
  const auto u = e_step_v(img, {{0.5, 0.5}, {{{0.0}, {1.0}}, {{2.0}, {1.0}}}});
  const auto g = e_step(img, MixtureParams{{0.5, 0.5}, {{{0.0}, {1.0}}, {{2.0}, {1.0}}}});
  CHECK(u.weights() == g.weights());
}

TEST_CASE("m-step copies w and matches the GMM moments") {
  const auto img = testing::line_image({0.0, 1.0, 2.0, 3.0});
  const ResponsibilityField w(img.domain(), 2, {1, 0, 1, 0, 0, 1, 0, 1});
  const auto p = m_step_v(img, w);
  CHECK(p.proportions == w.weights());
  CHECK(p.components[0].mean[0] == Approx(0.5));
  CHECK(p.components[1].var[0] == Approx(0.25));

  testing::Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const auto d = testing::random_domain(rng, 4, 4);
    const auto im = testing::random_image(rng, d, 2);
    const auto rw = testing::random_field(rng, d, 3);
    const auto a = m_step_v(im, rw);
    const auto b = m_step(im, rw);
    CHECK(a.proportions == rw.weights());
    for (int k = 0; k < 3; ++k) {
      CHECK(a.components[k].mean == b.components[k].mean);
      CHECK(a.components[k].var == b.components[k].var);
    }
  }
}

TEST_CASE("for fixed components the best row is one-hot at the densest class") {
  testing::Rng rng(31);
  const auto img = testing::random_image(rng, PixelDomain::full(1, 1), 1);
  const auto comps = testing::random_components(rng, 3, 1);
  int best = 0;
  for (int k = 1; k < 3; ++k) {
    if (log_density(comps[k], img.sample(0)) > log_density(comps[best], img.sample(0))) best = k;
  }
  std::vector<double> hot(3, 0.0);
  hot[best] = 1.0;
  const double floor = nll_v(img, {hot, comps});
  for (int trial = 0; trial < 200; ++trial) {
    CHECK(nll_v(img, {testing::random_simplex_rows(rng, 1, 3), comps}) >= floor - 1e-12);
  }
}

TEST_CASE("em_fit_v on separated data") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto sample = generate_synthetic(separated_spec(seed));
    const auto img = normalize_image(sample.image);
    const auto r = em_fit_v(img, 2, seed);
    for (std::size_t i = 1; i < r.nll_trace.size(); ++i) CHECK(r.nll_trace[i] <= r.nll_trace[i - 1] + 1e-9);
    CHECK(best_permutation_dice(r.mask(img.domain()), sample.ground_truth).mean >= 0.95);
    const auto field = r.proportions_field(img.domain());
    double sharp = 0.0;
    for (std::size_t i = 0; i < field.pixel_count(); ++i) sharp += std::max(field(i, 0), field(i, 1));
    CHECK(sharp / field.pixel_count() >= 0.99);
  }
}

TEST_CASE("em_fit_v is deterministic") {
  const auto img = normalize_image(generate_synthetic(separated_spec(3)).image);
  const auto a = em_fit_v(img, 2, 9);
  const auto b = em_fit_v(img, 2, 9);
  CHECK(a.nll_trace == b.nll_trace);
  CHECK(a.params.proportions == b.params.proportions);
}
