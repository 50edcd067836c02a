#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dgmm/image.hpp"

namespace dgmm {

enum class RegionPattern {
  VoronoiBlobs,
  NestedRings,
  HalfPlanes,
};

RegionPattern parse_region_pattern(const std::string& name);
std::string to_string(RegionPattern pattern);

struct SyntheticSpec {
  int classes = 2;
  int channels = 1;
  int height = 64;
  int width = 64;
  /// |K|×m row-major.
  std::vector<double> means;
  /// |K|×m row-major, all > 0.
  std::vector<double> stds;
  RegionPattern pattern = RegionPattern::VoronoiBlobs;
  /// Probability that a pixel draws its value from a different class.
  double noise = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// key=value lines: classes, channels, height, width, means, stds (comma
/// separated, row-major), pattern, noise, seed. '#' starts a comment.
SyntheticSpec parse_synthetic_spec(const std::string& text);
std::string format_synthetic_spec(const SyntheticSpec& spec);

struct SyntheticSample {
  MultiChannelImage image;
  SegmentationMask ground_truth;
};

/// Noise-free class layout (height×width, row-major).
std::vector<int> region_layout(const SyntheticSpec& spec);

/// Samples an image from the layout; flipped pixels take their value from
/// another class while the recorded ground truth stays clean.
SyntheticSample generate_synthetic(const SyntheticSpec& spec);

}  // namespace dgmm
