#include "dgmm/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "dgmm/error.hpp"
#include "text_util.hpp"

namespace dgmm {

RegionPattern parse_region_pattern(const std::string& name) {
  if (name == "voronoi_blobs") return RegionPattern::VoronoiBlobs;
  if (name == "nested_rings") return RegionPattern::NestedRings;
  if (name == "half_planes") return RegionPattern::HalfPlanes;
  fail(ErrorCode::SpecInvalid, "unknown region pattern '" + name + "'");
}

std::string to_string(RegionPattern pattern) {
  switch (pattern) {
    case RegionPattern::VoronoiBlobs: return "voronoi_blobs";
    case RegionPattern::NestedRings: return "nested_rings";
    case RegionPattern::HalfPlanes: return "half_planes";
  }
  return "?";
}

void SyntheticSpec::validate() const {
  if (classes < 2 || classes > 255) fail(ErrorCode::SpecInvalid, "classes must lie in 2..255");
  if (channels < 1) fail(ErrorCode::SpecInvalid, "channels must be positive");
  if (height < 2 || width < 2) fail(ErrorCode::SpecInvalid, "image must be at least 2x2");
  const std::size_t expected = static_cast<std::size_t>(classes) * channels;
  if (means.size() != expected) {
    fail(ErrorCode::SpecInvalid, "means need " + std::to_string(expected) + " entries");
  }
  if (stds.size() != expected) {
    fail(ErrorCode::SpecInvalid, "stds need " + std::to_string(expected) + " entries");
  }
  for (double s : stds) {
    if (!(s > 0.0) || !std::isfinite(s)) fail(ErrorCode::SpecInvalid, "stds must be positive");
  }
  for (double m : means) {
    if (!std::isfinite(m)) fail(ErrorCode::SpecInvalid, "means must be finite");
  }
  if (!(noise >= 0.0 && noise < 0.5)) fail(ErrorCode::SpecInvalid, "noise must lie in [0, 0.5)");
}

SyntheticSpec parse_synthetic_spec(const std::string& text) {
  SyntheticSpec spec;
  try {
    for (const auto& [key, value] : detail::parse_key_values(text)) {
      if (key == "classes") spec.classes = std::stoi(value);
      else if (key == "channels") spec.channels = std::stoi(value);
      else if (key == "height") spec.height = std::stoi(value);
      else if (key == "width") spec.width = std::stoi(value);
      else if (key == "means") spec.means = detail::parse_doubles(value);
      else if (key == "stds") spec.stds = detail::parse_doubles(value);
      else if (key == "pattern") spec.pattern = parse_region_pattern(value);
      else if (key == "noise") spec.noise = std::stod(value);
      else if (key == "seed") spec.seed = std::stoull(value);
      else fail(ErrorCode::SpecInvalid, "unknown key '" + key + "'");
    }
  } catch (const std::logic_error& e) {
    fail(ErrorCode::SpecInvalid, std::string("malformed value: ") + e.what());
  }
  spec.validate();
  return spec;
}

std::string format_synthetic_spec(const SyntheticSpec& spec) {
  std::ostringstream out;
  out.precision(17);
  auto join = [&](const std::vector<double>& v) {
    std::ostringstream s;
    s.precision(17);
    for (std::size_t i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
    return s.str();
  };
  out << "classes=" << spec.classes << "\nchannels=" << spec.channels << "\nheight=" << spec.height
      << "\nwidth=" << spec.width << "\nmeans=" << join(spec.means) << "\nstds=" << join(spec.stds)
      << "\npattern=" << to_string(spec.pattern) << "\nnoise=" << spec.noise << "\nseed=" << spec.seed
      << "\n";
  return out.str();
}

namespace {

std::vector<int> half_planes(const SyntheticSpec& spec, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> angle_dist(0.0, std::numbers::pi);
  const double angle = angle_dist(rng);
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const double cx = spec.width / 2.0;
  const double cy = spec.height / 2.0;
  auto project = [&](double x, double y) { return (x - cx) * c + (y - cy) * s; };
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double y : {0.0, static_cast<double>(spec.height)}) {
    for (double x : {0.0, static_cast<double>(spec.width)}) {
      lo = std::min(lo, project(x, y));
      hi = std::max(hi, project(x, y));
    }
  }
  std::vector<int> layout(static_cast<std::size_t>(spec.height) * spec.width);
  for (int r = 0; r < spec.height; ++r) {
    for (int q = 0; q < spec.width; ++q) {
      const double t = (project(q + 0.5, r + 0.5) - lo) / (hi - lo);
      layout[static_cast<std::size_t>(r) * spec.width + q] =
          std::clamp(static_cast<int>(t * spec.classes), 0, spec.classes - 1);
    }
  }
  return layout;
}

std::vector<int> nested_rings(const SyntheticSpec& spec) {
  const double cx = spec.width / 2.0;
  const double cy = spec.height / 2.0;
  const double outer = std::min(spec.height, spec.width) / 2.0;
  std::vector<int> layout(static_cast<std::size_t>(spec.height) * spec.width);
  for (int r = 0; r < spec.height; ++r) {
    for (int q = 0; q < spec.width; ++q) {
      const double radius = std::hypot(q + 0.5 - cx, r + 0.5 - cy);
      const int ring = static_cast<int>(std::floor(radius / outer * spec.classes));
      layout[static_cast<std::size_t>(r) * spec.width + q] = std::min(ring, spec.classes - 1);
    }
  }
  return layout;
}

std::vector<int> voronoi_blobs(const SyntheticSpec& spec, std::mt19937_64& rng) {
  const int sites = 3 * spec.classes;
  std::uniform_real_distribution<double> ux(0.0, spec.width);
  std::uniform_real_distribution<double> uy(0.0, spec.height);
  std::vector<double> sx(sites);
  std::vector<double> sy(sites);
  for (int i = 0; i < sites; ++i) {
    sx[i] = ux(rng);
    sy[i] = uy(rng);
  }
  std::vector<int> layout(static_cast<std::size_t>(spec.height) * spec.width);
  for (int r = 0; r < spec.height; ++r) {
    for (int q = 0; q < spec.width; ++q) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int i = 0; i < sites; ++i) {
        const double d = (q + 0.5 - sx[i]) * (q + 0.5 - sx[i]) + (r + 0.5 - sy[i]) * (r + 0.5 - sy[i]);
        if (d < best_d) {
          best_d = d;
          best = i;
        }
      }
      layout[static_cast<std::size_t>(r) * spec.width + q] = best % spec.classes;
    }
  }
  return layout;
}

std::vector<int> layout_with(const SyntheticSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  std::vector<int> layout;
  switch (spec.pattern) {
    case RegionPattern::HalfPlanes: layout = half_planes(spec, rng); break;
    case RegionPattern::NestedRings: layout = nested_rings(spec); break;
    case RegionPattern::VoronoiBlobs: layout = voronoi_blobs(spec, rng); break;
  }
  std::vector<int> area(spec.classes, 0);
  for (int label : layout) ++area[label];
  for (int k = 0; k < spec.classes; ++k) {
    if (area[k] == 0) {
      fail(ErrorCode::SpecInvalid, "class " + std::to_string(k) + " has zero area in the " +
                                       to_string(spec.pattern) + " layout");
    }
  }
  return layout;
}

}  // namespace

std::vector<int> region_layout(const SyntheticSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  return layout_with(spec, rng);
}

SyntheticSample generate_synthetic(const SyntheticSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  const auto layout = layout_with(spec, rng);
  const std::size_t plane = layout.size();
  const int m = spec.channels;
  std::bernoulli_distribution flip(spec.noise);
  std::uniform_int_distribution<int> other(0, spec.classes - 2);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> values(plane * m);
  for (std::size_t p = 0; p < plane; ++p) {
    int source = layout[p];
    if (spec.noise > 0.0 && flip(rng)) {
      const int pick = other(rng);
      source = pick >= source ? pick + 1 : pick;
    }
    for (int c = 0; c < m; ++c) {
      const double mu = spec.means[static_cast<std::size_t>(source) * m + c];
      const double sd = spec.stds[static_cast<std::size_t>(source) * m + c];
      values[c * plane + p] = mu + sd * gauss(rng);
    }
  }
  auto domain = PixelDomain::full(spec.height, spec.width);
  SyntheticSample sample{MultiChannelImage(domain, m, std::move(values)),
                         SegmentationMask(domain, spec.classes, layout)};
  return sample;
}

}  // namespace dgmm
