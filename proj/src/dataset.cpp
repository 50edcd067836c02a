#include "dgmm/dataset.hpp"

#include <fstream>

#include "dgmm/error.hpp"
#include "text_util.hpp"

namespace dgmm {

TensorFile image_to_tensor(const MultiChannelImage& image) {
  const auto& d = image.domain();
  return TensorFile::from_doubles({static_cast<std::uint32_t>(image.channels()),
                                   static_cast<std::uint32_t>(d.height()),
                                   static_cast<std::uint32_t>(d.width())},
                                  image.values());
}

TensorFile roi_to_tensor(const PixelDomain& domain) {
  return TensorFile::from_bytes(
      {static_cast<std::uint32_t>(domain.height()), static_cast<std::uint32_t>(domain.width())}, domain.roi());
}

TensorFile mask_to_tensor(const SegmentationMask& mask) {
  const auto& d = mask.domain();
  return TensorFile::from_bytes({static_cast<std::uint32_t>(d.height()), static_cast<std::uint32_t>(d.width())},
                                mask.to_grid());
}

TensorFile responsibilities_to_tensor(const ResponsibilityField& w) {
  const auto& d = w.domain();
  const int classes = w.classes();
  std::vector<double> grid(static_cast<std::size_t>(classes) * d.grid_size(), 0.0);
  for (std::size_t i = 0; i < w.pixel_count(); ++i) {
    for (int k = 0; k < classes; ++k) grid[k * d.grid_size() + d.grid_offset(i)] = w(i, k);
  }
  return TensorFile::from_doubles({static_cast<std::uint32_t>(classes), static_cast<std::uint32_t>(d.height()),
                                   static_cast<std::uint32_t>(d.width())},
                                  grid);
}

PixelDomain domain_from_tensor(const TensorFile& roi) {
  if (roi.dtype != DType::UInt8 || roi.dims.size() != 2) {
    fail(ErrorCode::ShapeError, "roi must be a 2-d uint8 tensor");
  }
  return PixelDomain(static_cast<int>(roi.dims[0]), static_cast<int>(roi.dims[1]), roi.to_bytes());
}

MultiChannelImage image_from_tensor(const TensorFile& image, const std::optional<PixelDomain>& domain) {
  if (image.dtype != DType::Float64 || image.dims.size() != 3) {
    fail(ErrorCode::ShapeError, "image must be a 3-d float64 tensor (channels, height, width)");
  }
  const int h = static_cast<int>(image.dims[1]);
  const int w = static_cast<int>(image.dims[2]);
  PixelDomain d = domain ? *domain : PixelDomain::full(h, w);
  if (d.height() != h || d.width() != w) {
    fail(ErrorCode::DomainMismatch, "roi is " + std::to_string(d.height()) + "x" + std::to_string(d.width()) +
                                        ", image is " + std::to_string(h) + "x" + std::to_string(w));
  }
  return MultiChannelImage(std::move(d), static_cast<int>(image.dims[0]), image.to_doubles());
}

SegmentationMask mask_from_tensor(const TensorFile& mask, const PixelDomain& domain, int classes) {
  if (mask.dtype != DType::UInt8 || mask.dims.size() != 2) {
    fail(ErrorCode::ShapeError, "mask must be a 2-d uint8 tensor");
  }
  if (static_cast<int>(mask.dims[0]) != domain.height() || static_cast<int>(mask.dims[1]) != domain.width()) {
    fail(ErrorCode::DomainMismatch, "mask dims do not match the domain");
  }
  const auto grid = mask.to_bytes();
  return SegmentationMask::from_grid(domain, classes, grid);
}

Manifest read_manifest(const std::filesystem::path& path) {
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& value) {
    std::filesystem::path p(value);
    return p.is_absolute() ? p : base / p;
  };
  Manifest m;
  bool has_image = false;
  for (const auto& [key, value] : detail::parse_key_values(detail::read_text_file(path.string()))) {
    if (key == "image") {
      m.image = resolve(value);
      has_image = true;
    } else if (key == "mask") {
      m.mask = resolve(value);
    } else if (key == "roi") {
      m.roi = resolve(value);
    } else {
      fail(ErrorCode::InvalidConfig, path.string() + ": unknown manifest key '" + key + "'");
    }
  }
  if (!has_image) fail(ErrorCode::InvalidConfig, path.string() + ": manifest names no image");
  return m;
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out << "image=" << manifest.image.string() << "\n";
  if (manifest.mask) out << "mask=" << manifest.mask->string() << "\n";
  if (manifest.roi) out << "roi=" << manifest.roi->string() << "\n";
  if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

LoadedImage load_manifest_image(const Manifest& manifest) {
  std::optional<PixelDomain> domain;
  if (manifest.roi) domain = domain_from_tensor(read_tensor(*manifest.roi));
  LoadedImage out{image_from_tensor(read_tensor(manifest.image), domain), std::nullopt};
  if (manifest.mask) out.ground_truth = read_tensor(*manifest.mask);
  return out;
}

}  // namespace dgmm
