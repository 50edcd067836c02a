#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dgmm {

/// Rectangular pixel grid with a region of interest. Every per-pixel
/// container in the library indexes the ROI pixels in row-major order.
class PixelDomain {
 public:
  PixelDomain() = default;
  PixelDomain(int height, int width, std::vector<std::uint8_t> roi);

  /// Domain whose ROI covers the whole rectangle.
  static PixelDomain full(int height, int width);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t grid_size() const { return static_cast<std::size_t>(height_) * width_; }
  std::size_t size() const { return pixels_.size(); }

  bool in_roi(int row, int col) const { return roi_[static_cast<std::size_t>(row) * width_ + col] != 0; }
  const std::vector<std::uint8_t>& roi() const { return roi_; }

  /// Flat grid offset of the i-th ROI pixel.
  std::size_t grid_offset(std::size_t i) const { return pixels_[i]; }
  /// ROI index of a grid offset, or -1 outside the ROI.
  std::ptrdiff_t roi_index(std::size_t offset) const { return lookup_[offset]; }

  bool operator==(const PixelDomain& other) const {
    return height_ == other.height_ && width_ == other.width_ && roi_ == other.roi_;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> roi_;
  std::vector<std::size_t> pixels_;
  std::vector<std::ptrdiff_t> lookup_;
};

/// m co-registered channels over a PixelDomain. Values are stored as a
/// channel-major grid; the ROI samples are additionally cached as an
/// |Ω|×m row-major matrix since every mixture computation consumes that view.
class MultiChannelImage {
 public:
  MultiChannelImage() = default;
  MultiChannelImage(PixelDomain domain, int channels, std::vector<double> values);

  const PixelDomain& domain() const { return domain_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const { return domain_.size(); }

  /// Channel-major grid (m×height×width).
  const std::vector<double>& values() const { return values_; }
  double at(int channel, int row, int col) const {
    return values_[(static_cast<std::size_t>(channel) * domain_.height() + row) * domain_.width() + col];
  }

  /// Observation vector of the i-th ROI pixel.
  std::span<const double> sample(std::size_t i) const {
    return {samples_.data() + i * channels_, static_cast<std::size_t>(channels_)};
  }
  /// |Ω|×m row-major matrix of ROI observations.
  const std::vector<double>& samples() const { return samples_; }

 private:
  PixelDomain domain_;
  int channels_ = 0;
  std::vector<double> values_;
  std::vector<double> samples_;
};

/// Build an image from an |Ω|×m sample matrix; non-ROI grid entries are 0.
MultiChannelImage image_from_samples(const PixelDomain& domain, int channels,
                                     std::span<const double> samples);

/// Per-pixel class weights w_xk, |Ω|×|K| row-major, rows on the simplex.
class ResponsibilityField {
 public:
  ResponsibilityField() = default;
  ResponsibilityField(PixelDomain domain, int classes, std::vector<double> weights);

  const PixelDomain& domain() const { return domain_; }
  int classes() const { return classes_; }
  std::size_t pixel_count() const { return domain_.size(); }

  std::span<const double> row(std::size_t i) const {
    return {weights_.data() + i * classes_, static_cast<std::size_t>(classes_)};
  }
  double operator()(std::size_t i, int k) const { return weights_[i * classes_ + k]; }
  const std::vector<double>& weights() const { return weights_; }

 private:
  PixelDomain domain_;
  int classes_ = 0;
  std::vector<double> weights_;
};

class SegmentationMask {
 public:
  SegmentationMask() = default;
  SegmentationMask(PixelDomain domain, int classes, std::vector<int> labels);

  /// Reads labels at the ROI pixels of a height×width label grid.
  static SegmentationMask from_grid(const PixelDomain& domain, int classes,
                                    std::span<const std::uint8_t> grid);

  const PixelDomain& domain() const { return domain_; }
  int classes() const { return classes_; }
  const std::vector<int>& labels() const { return labels_; }
  int operator[](std::size_t i) const { return labels_[i]; }

  /// height×width label grid; pixels outside the ROI are 0.
  std::vector<std::uint8_t> to_grid() const;

  bool operator==(const SegmentationMask& other) const {
    return domain_ == other.domain_ && classes_ == other.classes_ && labels_ == other.labels_;
  }

 private:
  PixelDomain domain_;
  int classes_ = 0;
  std::vector<int> labels_;
};

/// Index of the largest weight per row; ties go to the smallest index.
SegmentationMask argmax_labeling(const ResponsibilityField& w);

/// Per-channel standardization over the ROI (population std); non-ROI
/// pixels are set to 0. Throws ZeroVariance for a channel constant on Ω.
MultiChannelImage normalize_image(const MultiChannelImage& image);

}  // namespace dgmm
