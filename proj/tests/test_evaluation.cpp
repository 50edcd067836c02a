#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "dgmm/error.hpp"
#include "dgmm/evaluation.hpp"
#include "support.hpp"

using namespace dgmm;
using doctest::Approx;

namespace {

SegmentationMask row_mask(int classes, std::vector<int> labels) {
  const auto width = static_cast<int>(labels.size());
  return SegmentationMask(PixelDomain::full(1, width), classes, std::move(labels));
}

SegmentationMask random_mask(testing::Rng& rng, const PixelDomain& d, int classes) {
  std::uniform_int_distribution<int> u(0, classes - 1);
  std::vector<int> labels(d.size());
  for (int& l : labels) l = u(rng);
  return SegmentationMask(d, classes, labels);
}

// Dice straight from set sizes.
double set_dice(const std::vector<int>& a, const std::vector<int>& b, int k) {
  long inter = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a[i] == k && b[i] == k;
    na += a[i] == k;
    nb += b[i] == k;
  }
  return na + nb == 0 ? 1.0 : 2.0 * inter / static_cast<double>(na + nb);
}

}  // namespace

TEST_CASE("dice examples") {
  const auto gt = row_mask(2, {0, 0, 1, 1});
  CHECK(dice(gt, gt, 0) == 1.0);
  CHECK(dice(row_mask(2, {1, 1, 0, 0}), gt, 0) == 0.0);
  CHECK(dice(row_mask(2, {0, 1, 1, 1}), gt, 0) == Approx(2.0 / 3.0));
  CHECK(dice(row_mask(2, {0, 0, 0, 1}), gt, 1) == Approx(2.0 / 3.0));
  CHECK(dice(row_mask(3, {0, 0, 1, 1}), row_mask(3, {0, 1, 1, 1}), 2) == 1.0);
  CHECK(dice(row_mask(2, {0, 1, 0, 1}), gt, 0) == 0.5);
}

TEST_CASE("swapped labels are recovered by the permutation search") {
  const auto gt = row_mask(3, {0, 0, 1, 1, 2, 2});
  const auto pred = row_mask(3, {2, 2, 0, 0, 1, 1});
  const auto id = identity_dice(pred, gt);
  CHECK(id.mean == 0.0);
  CHECK(id.is_identity());
  const auto best = best_permutation_dice(pred, gt);
  CHECK(best.mean == 1.0);
  CHECK(best.permutation == std::vector<int>{1, 2, 0});
  CHECK_FALSE(best.is_identity());
  CHECK(apply_permutation(pred, best.permutation) == gt);
}

TEST_CASE("permutation search agrees with brute force") {
  testing::Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const int classes = 2 + trial % 3;
    const auto d = testing::random_domain(rng, 6, 6);
    const auto gt = random_mask(rng, d, classes);
    const auto pred = random_mask(rng, d, classes);
    std::vector<int> perm(classes);
    std::iota(perm.begin(), perm.end(), 0);
    double best = -1.0;
    std::vector<int> arg;
    do {
      std::vector<int> relabeled(pred.labels().size());
      for (std::size_t i = 0; i < relabeled.size(); ++i) relabeled[i] = perm[pred[i]];
      double mean = 0.0;
      for (int k = 0; k < classes; ++k) mean += set_dice(relabeled, gt.labels(), k);
      mean /= classes;
      if (mean > best + 1e-15) {
        best = mean;
        arg = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    const auto report = best_permutation_dice(pred, gt);
    CHECK(report.mean == Approx(best).epsilon(1e-12));
    CHECK(report.permutation == arg);
    CHECK(report.mean >= identity_dice(pred, gt).mean);
    const auto relabeled = apply_permutation(pred, report.permutation);
    for (int k = 0; k < classes; ++k) CHECK(report.per_class[k] == Approx(dice(relabeled, gt, k)));
  }
}

TEST_CASE("dice invariances") {
  testing::Rng rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const int classes = 2 + trial % 4;
    const auto d = testing::random_domain(rng, 5, 7);
    const auto gt = random_mask(rng, d, classes);
    const auto pred = random_mask(rng, d, classes);
    // Relabeling the prediction never changes the optimum.
    std::vector<int> perm(classes);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    CHECK(best_permutation_dice(apply_permutation(pred, perm), gt).mean ==
          Approx(best_permutation_dice(pred, gt).mean).epsilon(1e-14));
    // Dice is symmetric in its arguments.
    for (int k = 0; k < classes; ++k) CHECK(dice(pred, gt, k) == dice(gt, pred, k));
    CHECK(best_permutation_dice(gt, gt).mean == 1.0);
  }
}

TEST_CASE("evaluation errors") {
  const auto a = row_mask(2, {0, 1});
  const auto b = row_mask(2, {0, 1, 1});
  CHECK_THROWS_AS(dice(a, b, 0), Error);
  std::vector<int> many(9);
  std::iota(many.begin(), many.end(), 0);
  const auto big = row_mask(9, many);
  try {
    best_permutation_dice(big, big);
    FAIL("expected TooManyClasses");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooManyClasses);
  }
}

TEST_CASE("boundary length") {
  CHECK(boundary_length(SegmentationMask(PixelDomain::full(3, 3), 2, std::vector<int>(9, 1))) == 0);
  CHECK(boundary_length(SegmentationMask(PixelDomain::full(2, 2), 2, {0, 1, 0, 1})) == 2);
  CHECK(boundary_length(SegmentationMask(PixelDomain::full(2, 2), 2, {0, 1, 1, 0})) == 4);
  // A single pixel surrounded by outside-roi cells has no pairs at all.
  PixelDomain holes(3, 3, {1, 0, 1, 0, 1, 0, 1, 0, 1});
  CHECK(boundary_length(SegmentationMask(holes, 2, {0, 1, 0, 1, 0})) == 0);

  testing::Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = testing::random_domain(rng, 6, 5);
    const auto mask = random_mask(rng, d, 3);
    long brute = 0;
    const auto grid = mask.to_grid();
    for (int r = 0; r < d.height(); ++r) {
      for (int c = 0; c < d.width(); ++c) {
        if (!d.in_roi(r, c)) continue;
        const auto at = [&](int rr, int cc) { return grid[static_cast<std::size_t>(rr) * d.width() + cc]; };
        if (c + 1 < d.width() && d.in_roi(r, c + 1) && at(r, c) != at(r, c + 1)) ++brute;
        if (r + 1 < d.height() && d.in_roi(r + 1, c) && at(r, c) != at(r + 1, c)) ++brute;
      }
    }
    CHECK(boundary_length(mask) == brute);
  }
}

TEST_CASE("report line") {
  const auto gt = row_mask(2, {0, 0, 1, 1});
  const auto line = format_report_line("img7", best_permutation_dice(row_mask(2, {1, 1, 0, 0}), gt), 1.25, 3);
  CHECK(line.rfind("img7\t", 0) == 0);
  CHECK(line.find("\t1.250000\t3") != std::string::npos);
}
