#include "dgmm/image.hpp"

#include <cmath>
#include <string>

#include "dgmm/error.hpp"

namespace dgmm {

PixelDomain::PixelDomain(int height, int width, std::vector<std::uint8_t> roi)
    : height_(height), width_(width), roi_(std::move(roi)) {
  if (height <= 0 || width <= 0) {
    fail(ErrorCode::ShapeError, "pixel domain needs positive height and width");
  }
  if (roi_.size() != grid_size()) {
    fail(ErrorCode::ShapeError, "roi has " + std::to_string(roi_.size()) + " entries, expected " +
                                    std::to_string(grid_size()));
  }
  lookup_.assign(grid_size(), -1);
  for (std::size_t i = 0; i < roi_.size(); ++i) {
    if (roi_[i] != 0) {
      roi_[i] = 1;
      lookup_[i] = static_cast<std::ptrdiff_t>(pixels_.size());
      pixels_.push_back(i);
    }
  }
  if (pixels_.empty()) {
    fail(ErrorCode::ShapeError, "roi contains no pixels");
  }
}

PixelDomain PixelDomain::full(int height, int width) {
  if (height <= 0 || width <= 0) {
    fail(ErrorCode::ShapeError, "pixel domain needs positive height and width");
  }
  return PixelDomain(height, width, std::vector<std::uint8_t>(static_cast<std::size_t>(height) * width, 1));
}

MultiChannelImage::MultiChannelImage(PixelDomain domain, int channels, std::vector<double> values)
    : domain_(std::move(domain)), channels_(channels), values_(std::move(values)) {
  if (channels_ < 1) {
    fail(ErrorCode::ShapeError, "image needs at least one channel");
  }
  const std::size_t plane = domain_.grid_size();
  if (values_.size() != plane * channels_) {
    fail(ErrorCode::ShapeError, "image has " + std::to_string(values_.size()) + " values, expected " +
                                    std::to_string(plane * channels_));
  }
  samples_.resize(domain_.size() * channels_);
  for (std::size_t i = 0; i < domain_.size(); ++i) {
    const std::size_t offset = domain_.grid_offset(i);
    for (int c = 0; c < channels_; ++c) {
      const double v = values_[c * plane + offset];
      if (!std::isfinite(v)) {
        fail(ErrorCode::NonFinite, "non-finite value at roi pixel " + std::to_string(i) + ", channel " +
                                       std::to_string(c));
      }
      samples_[i * channels_ + c] = v;
    }
  }
}

MultiChannelImage image_from_samples(const PixelDomain& domain, int channels,
                                     std::span<const double> samples) {
  if (channels < 1 || samples.size() != domain.size() * channels) {
    fail(ErrorCode::ShapeError, "sample matrix does not match domain and channel count");
  }
  const std::size_t plane = domain.grid_size();
  std::vector<double> values(plane * channels, 0.0);
  for (std::size_t i = 0; i < domain.size(); ++i) {
    for (int c = 0; c < channels; ++c) {
      values[c * plane + domain.grid_offset(i)] = samples[i * channels + c];
    }
  }
  return MultiChannelImage(domain, channels, std::move(values));
}

ResponsibilityField::ResponsibilityField(PixelDomain domain, int classes, std::vector<double> weights)
    : domain_(std::move(domain)), classes_(classes), weights_(std::move(weights)) {
  if (classes_ < 1 || weights_.size() != domain_.size() * classes_) {
    fail(ErrorCode::ShapeError, "responsibility field does not match |Omega| x |K|");
  }
  for (std::size_t i = 0; i < domain_.size(); ++i) {
    double sum = 0.0;
    for (int k = 0; k < classes_; ++k) {
      const double w = weights_[i * classes_ + k];
      if (!(w >= 0.0 && w <= 1.0)) {
        fail(ErrorCode::InvalidArgument, "responsibility outside [0,1] at pixel " + std::to_string(i));
      }
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      fail(ErrorCode::InvalidArgument, "responsibility row " + std::to_string(i) + " sums to " +
                                           std::to_string(sum));
    }
  }
}

SegmentationMask::SegmentationMask(PixelDomain domain, int classes, std::vector<int> labels)
    : domain_(std::move(domain)), classes_(classes), labels_(std::move(labels)) {
  if (labels_.size() != domain_.size()) {
    fail(ErrorCode::ShapeError, "mask has " + std::to_string(labels_.size()) + " labels for " +
                                    std::to_string(domain_.size()) + " roi pixels");
  }
  for (int label : labels_) {
    if (label < 0 || label >= classes_) {
      fail(ErrorCode::InvalidArgument, "label " + std::to_string(label) + " outside 0.." +
                                           std::to_string(classes_ - 1));
    }
  }
}

SegmentationMask SegmentationMask::from_grid(const PixelDomain& domain, int classes,
                                             std::span<const std::uint8_t> grid) {
  if (grid.size() != domain.grid_size()) {
    fail(ErrorCode::ShapeError, "label grid does not match domain");
  }
  std::vector<int> labels(domain.size());
  for (std::size_t i = 0; i < domain.size(); ++i) {
    labels[i] = grid[domain.grid_offset(i)];
  }
  return SegmentationMask(domain, classes, std::move(labels));
}

std::vector<std::uint8_t> SegmentationMask::to_grid() const {
  std::vector<std::uint8_t> grid(domain_.grid_size(), 0);
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    grid[domain_.grid_offset(i)] = static_cast<std::uint8_t>(labels_[i]);
  }
  return grid;
}

SegmentationMask argmax_labeling(const ResponsibilityField& w) {
  std::vector<int> labels(w.pixel_count());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto row = w.row(i);
    int best = 0;
    for (int k = 1; k < w.classes(); ++k) {
      if (row[k] > row[best]) best = k;
    }
    labels[i] = best;
  }
  return SegmentationMask(w.domain(), w.classes(), std::move(labels));
}

MultiChannelImage normalize_image(const MultiChannelImage& image) {
  const auto& domain = image.domain();
  const std::size_t n = image.pixel_count();
  const int m = image.channels();
  const std::size_t plane = domain.grid_size();
  std::vector<double> values(plane * m, 0.0);
  for (int c = 0; c < m; ++c) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += image.sample(i)[c];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = image.sample(i)[c] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double sd = std::sqrt(var);
    if (!(sd > 0.0) || sd <= 1e-300 || sd < std::abs(mean) * 1e-14) {
      fail(ErrorCode::ZeroVariance, "channel " + std::to_string(c) + " is constant over the roi");
    }
    for (std::size_t i = 0; i < n; ++i) {
      values[c * plane + domain.grid_offset(i)] = (image.sample(i)[c] - mean) / sd;
    }
  }
  return MultiChannelImage(domain, m, std::move(values));
}

}  // namespace dgmm
