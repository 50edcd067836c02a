#pragma once

#include <string>
#include <vector>

#include "dgmm/image.hpp"

namespace dgmm {

/// Largest |K| accepted by the exhaustive permutation search.
inline constexpr int kMaxExhaustiveClasses = 8;

struct DiceReport {
  std::vector<double> per_class;
  double mean = 0.0;
  /// permutation[predicted label] = label after rearrangement.
  std::vector<int> permutation;

  bool is_identity() const;
};

/// Dice overlap of class k: 1 when both sets are empty, 0 when exactly one is.
double dice(const SegmentationMask& pred, const SegmentationMask& gt, int label);

/// Per-class Dice without relabeling.
DiceReport identity_dice(const SegmentationMask& pred, const SegmentationMask& gt);

/// Relabels pred with the permutation maximizing mean Dice; exhaustive over
/// all |K|! permutations, ties keep the lexicographically first.
DiceReport best_permutation_dice(const SegmentationMask& pred, const SegmentationMask& gt);

SegmentationMask apply_permutation(const SegmentationMask& mask, const std::vector<int>& permutation);

/// Number of 4-neighbour pixel pairs inside Ω with different labels.
long boundary_length(const SegmentationMask& mask);

/// id<TAB>dice_0,..<TAB>mean<TAB>perm<TAB>nll<TAB>boundary
std::string format_report_line(const std::string& image_id, const DiceReport& report, double nll,
                               long boundary);

}  // namespace dgmm
