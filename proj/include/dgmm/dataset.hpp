#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "dgmm/image.hpp"
#include "dgmm/tensor_io.hpp"

namespace dgmm {

/// Image as float64 tensor with dims (m, height, width).
TensorFile image_to_tensor(const MultiChannelImage& image);
/// ROI as uint8 tensor with dims (height, width), 1 inside Ω.
TensorFile roi_to_tensor(const PixelDomain& domain);
/// Mask as uint8 tensor with dims (height, width); pixels outside Ω hold 0.
TensorFile mask_to_tensor(const SegmentationMask& mask);

/// Responsibilities as float64 tensor with dims (K, height, width); pixels
/// outside Ω hold 0.
TensorFile responsibilities_to_tensor(const ResponsibilityField& w);

PixelDomain domain_from_tensor(const TensorFile& roi);
/// A missing ROI means the full rectangle.
MultiChannelImage image_from_tensor(const TensorFile& image, const std::optional<PixelDomain>& domain = {});
SegmentationMask mask_from_tensor(const TensorFile& mask, const PixelDomain& domain, int classes);

/// Plain key=value file tying an image to its ground truth and ROI.
/// Relative paths resolve against the manifest's directory.
struct Manifest {
  std::filesystem::path image;
  std::optional<std::filesystem::path> mask;
  std::optional<std::filesystem::path> roi;
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

struct LoadedImage {
  MultiChannelImage image;
  std::optional<TensorFile> ground_truth;
};

/// Loads the image (and ROI) named by a manifest; the ground-truth tensor
/// is returned raw because its class count is only known to the caller.
LoadedImage load_manifest_image(const Manifest& manifest);

}  // namespace dgmm
