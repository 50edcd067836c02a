#include "dgmm/evaluation.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "dgmm/error.hpp"

namespace dgmm {

namespace {

void check_pair(const SegmentationMask& pred, const SegmentationMask& gt) {
  if (!(pred.domain() == gt.domain())) {
    fail(ErrorCode::DomainMismatch, "prediction and ground truth live on different domains");
  }
}

int class_count(const SegmentationMask& pred, const SegmentationMask& gt) {
  return std::max(pred.classes(), gt.classes());
}

double dice_from_counts(long overlap, long pred_size, long gt_size) {
  if (pred_size + gt_size == 0) return 1.0;
  return 2.0 * static_cast<double>(overlap) / static_cast<double>(pred_size + gt_size);
}

struct Overlap {
  int classes;
  std::vector<long> table;  // table[a * classes + b] = |pred=a ∩ gt=b|
  std::vector<long> pred_size;
  std::vector<long> gt_size;
};

Overlap overlap_table(const SegmentationMask& pred, const SegmentationMask& gt) {
  const int k = class_count(pred, gt);
  Overlap o{k, std::vector<long>(static_cast<std::size_t>(k) * k, 0), std::vector<long>(k, 0),
            std::vector<long>(k, 0)};
  for (std::size_t i = 0; i < pred.labels().size(); ++i) {
    const int a = pred[i];
    const int b = gt[i];
    ++o.table[a * k + b];
    ++o.pred_size[a];
    ++o.gt_size[b];
  }
  return o;
}

DiceReport report_for(const Overlap& o, const std::vector<int>& permutation) {
  DiceReport r;
  r.permutation = permutation;
  r.per_class.assign(o.classes, 0.0);
  std::vector<int> inverse(o.classes);
  for (int a = 0; a < o.classes; ++a) inverse[permutation[a]] = a;
  for (int k = 0; k < o.classes; ++k) {
    const int a = inverse[k];
    r.per_class[k] = dice_from_counts(o.table[a * o.classes + k], o.pred_size[a], o.gt_size[k]);
  }
  r.mean = std::accumulate(r.per_class.begin(), r.per_class.end(), 0.0) / o.classes;
  return r;
}

}  // namespace

bool DiceReport::is_identity() const {
  for (std::size_t i = 0; i < permutation.size(); ++i) {
    if (permutation[i] != static_cast<int>(i)) return false;
  }
  return true;
}

double dice(const SegmentationMask& pred, const SegmentationMask& gt, int label) {
  check_pair(pred, gt);
  long overlap = 0;
  long p = 0;
  long g = 0;
  for (std::size_t i = 0; i < pred.labels().size(); ++i) {
    const bool in_p = pred[i] == label;
    const bool in_g = gt[i] == label;
    p += in_p;
    g += in_g;
    overlap += in_p && in_g;
  }
  return dice_from_counts(overlap, p, g);
}

DiceReport identity_dice(const SegmentationMask& pred, const SegmentationMask& gt) {
  check_pair(pred, gt);
  const auto o = overlap_table(pred, gt);
  std::vector<int> identity(o.classes);
  std::iota(identity.begin(), identity.end(), 0);
  return report_for(o, identity);
}

DiceReport best_permutation_dice(const SegmentationMask& pred, const SegmentationMask& gt) {
  check_pair(pred, gt);
  const int k = class_count(pred, gt);
  if (k > kMaxExhaustiveClasses) {
    fail(ErrorCode::TooManyClasses, std::to_string(k) + " classes exceed the exhaustive search limit of " +
                                        std::to_string(kMaxExhaustiveClasses));
  }
  const auto o = overlap_table(pred, gt);
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  DiceReport best = report_for(o, perm);
  while (std::next_permutation(perm.begin(), perm.end())) {
    auto candidate = report_for(o, perm);
    if (candidate.mean > best.mean) best = std::move(candidate);
  }
  return best;
}

SegmentationMask apply_permutation(const SegmentationMask& mask, const std::vector<int>& permutation) {
  if (permutation.size() < static_cast<std::size_t>(mask.classes())) {
    fail(ErrorCode::InvalidArgument, "permutation shorter than the label set");
  }
  std::vector<int> labels(mask.labels().size());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = permutation[mask[i]];
  return SegmentationMask(mask.domain(), static_cast<int>(permutation.size()), std::move(labels));
}

long boundary_length(const SegmentationMask& mask) {
  const auto& d = mask.domain();
  long cuts = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const std::size_t offset = d.grid_offset(i);
    const int col = static_cast<int>(offset % d.width());
    const int row = static_cast<int>(offset / d.width());
    if (col + 1 < d.width()) {
      const auto j = d.roi_index(offset + 1);
      if (j >= 0 && mask[static_cast<std::size_t>(j)] != mask[i]) ++cuts;
    }
    if (row + 1 < d.height()) {
      const auto j = d.roi_index(offset + d.width());
      if (j >= 0 && mask[static_cast<std::size_t>(j)] != mask[i]) ++cuts;
    }
  }
  return cuts;
}

std::string format_report_line(const std::string& image_id, const DiceReport& report, double nll,
                               long boundary) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed << image_id << '\t';
  for (std::size_t k = 0; k < report.per_class.size(); ++k) {
    out << (k ? "," : "") << report.per_class[k];
  }
  out << '\t' << report.mean << '\t';
  for (std::size_t k = 0; k < report.permutation.size(); ++k) {
    out << (k ? "," : "") << report.permutation[k];
  }
  out << '\t' << nll << '\t' << boundary;
  return out.str();
}

}  // namespace dgmm
