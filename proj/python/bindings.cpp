#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "dgmm/dataset.hpp"
#include "dgmm/deep_em.hpp"
#include "dgmm/error.hpp"
#include "dgmm/evaluation.hpp"
#include "dgmm/gmm.hpp"
#include "dgmm/svgmm.hpp"
#include "dgmm/synthetic.hpp"
#include "dgmm/tensor_io.hpp"

namespace py = pybind11;
using namespace dgmm;

namespace {

using F64 = py::array_t<double, py::array::c_style | py::array::forcecast>;
using U8 = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

PixelDomain to_domain(int h, int w, const std::optional<U8>& roi) {
  if (!roi) return PixelDomain::full(h, w);
  if (roi->ndim() != 2 || roi->shape(0) != h || roi->shape(1) != w) {
    fail(ErrorCode::DomainMismatch, "roi must be a (height, width) array matching the image");
  }
  return PixelDomain(h, w, std::vector<std::uint8_t>(roi->data(), roi->data() + roi->size()));
}

// Accepts (H, W) or (m, H, W).
MultiChannelImage to_image(const F64& a, const std::optional<U8>& roi) {
  if (a.ndim() != 2 && a.ndim() != 3) fail(ErrorCode::ShapeError, "image must be (H, W) or (m, H, W)");
  const int m = a.ndim() == 3 ? static_cast<int>(a.shape(0)) : 1;
  const int h = static_cast<int>(a.shape(a.ndim() - 2));
  const int w = static_cast<int>(a.shape(a.ndim() - 1));
  return MultiChannelImage(to_domain(h, w, roi), m, std::vector<double>(a.data(), a.data() + a.size()));
}

SegmentationMask to_mask(const U8& a, int classes, const std::optional<U8>& roi) {
  if (a.ndim() != 2) fail(ErrorCode::ShapeError, "mask must be (H, W)");
  const auto d = to_domain(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), roi);
  return SegmentationMask::from_grid(d, classes, std::span(a.data(), static_cast<std::size_t>(a.size())));
}

py::array_t<std::uint8_t> from_mask(const SegmentationMask& m) {
  const auto grid = m.to_grid();
  py::array_t<std::uint8_t> out({m.domain().height(), m.domain().width()});
  std::copy(grid.begin(), grid.end(), out.mutable_data());
  return out;
}

py::array_t<double> from_field(const ResponsibilityField& w) {
  const auto t = responsibilities_to_tensor(w);
  const auto v = t.to_doubles();
  py::array_t<double> out({static_cast<py::ssize_t>(t.dims[0]), static_cast<py::ssize_t>(t.dims[1]),
                           static_cast<py::ssize_t>(t.dims[2])});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::dict components_dict(const std::vector<double>& weights, const std::vector<DiagGaussian>& comps) {
  py::list means, vars;
  for (const auto& c : comps) {
    means.append(c.mean);
    vars.append(c.var);
  }
  py::dict d;
  d["weights"] = weights;
  d["means"] = means;
  d["vars"] = vars;
  return d;
}

EmOptions em_options(double threshold, int max_iters) {
  EmOptions o;
  o.threshold = threshold;
  o.max_iters = max_iters;
  return o;
}

struct Network {
  NetworkConfig config;
  NetworkState state;
};

}  // namespace

PYBIND11_MODULE(_dgmm, m) {
  m.doc() = "Gaussian mixture image segmentation with EM and network-parameterized responsibilities";

  static py::exception<Error> error(m, "DgmmError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(error.ptr(), (std::string(e.code_name()) + ": " + e.what()).c_str());
    }
  });

  m.def(
      "synth",
      [](int classes, int channels, int height, int width, std::vector<double> means, std::vector<double> stds,
         const std::string& pattern, double noise, std::uint64_t seed) {
        SyntheticSpec s;
        s.classes = classes;
        s.channels = channels;
        s.height = height;
        s.width = width;
        s.means = std::move(means);
        s.stds = std::move(stds);
        s.pattern = parse_region_pattern(pattern);
        s.noise = noise;
        s.seed = seed;
        const auto sample = generate_synthetic(s);
        py::array_t<double> image({channels, height, width});
        std::copy(sample.image.values().begin(), sample.image.values().end(), image.mutable_data());
        return py::make_tuple(image, from_mask(sample.ground_truth));
      },
      py::arg("classes"), py::arg("channels"), py::arg("height"), py::arg("width"), py::arg("means"),
      py::arg("stds"), py::arg("pattern") = "voronoi_blobs", py::arg("noise") = 0.0, py::arg("seed") = 0,
      "Synthetic image (m, H, W) and ground-truth mask (H, W).");

  m.def(
      "normalize",
      [](const F64& image, std::optional<U8> roi) {
        const auto n = normalize_image(to_image(image, roi));
        py::array_t<double> out({n.channels(), n.domain().height(), n.domain().width()});
        std::copy(n.values().begin(), n.values().end(), out.mutable_data());
        return out;
      },
      py::arg("image"), py::arg("roi") = py::none(), "Per-channel standardization over the roi.");

  m.def(
      "em_fit",
      [](const F64& image, int classes, std::uint64_t seed, double threshold, int max_iters, std::optional<U8> roi) {
        const auto img = to_image(image, roi);
        const auto r = em_fit(img, classes, seed, em_options(threshold, max_iters));
        auto d = components_dict(r.params.weights, r.params.components);
        d["mask"] = from_mask(argmax_labeling(r.responsibilities));
        d["responsibilities"] = from_field(r.responsibilities);
        d["nll_trace"] = r.nll_trace;
        d["iterations"] = r.iterations;
        d["converged"] = r.converged;
        return d;
      },
      py::arg("image"), py::arg("classes"), py::arg("seed") = 0, py::arg("threshold") = 1e-3,
      py::arg("max_iters") = 500, py::arg("roi") = py::none());

  m.def(
      "em_fit_v",
      [](const F64& image, int classes, std::uint64_t seed, double threshold, int max_iters, std::optional<U8> roi) {
        const auto img = to_image(image, roi);
        const auto r = em_fit_v(img, classes, seed, em_options(threshold, max_iters));
        const auto field = r.proportions_field(img.domain());
        std::vector<double> weights(classes, 0.0);
        for (std::size_t i = 0; i < field.pixel_count(); ++i) {
          for (int k = 0; k < classes; ++k) weights[k] += field(i, k) / static_cast<double>(field.pixel_count());
        }
        auto d = components_dict(weights, r.params.components);
        d["mask"] = from_mask(r.mask(img.domain()));
        d["proportions"] = from_field(field);
        d["nll_trace"] = r.nll_trace;
        d["iterations"] = r.iterations;
        d["converged"] = r.converged;
        return d;
      },
      py::arg("image"), py::arg("classes"), py::arg("seed") = 0, py::arg("threshold") = 1e-3,
      py::arg("max_iters") = 500, py::arg("roi") = py::none());

  py::class_<Network>(m, "Network")
      .def_property_readonly("parameter_count", [](const Network& n) { return n.state.parameter_count(); })
      .def_property_readonly("steps", [](const Network& n) { return n.state.step; })
      .def(
          "predict",
          [](const Network& n, const F64& image, std::optional<U8> roi) {
            const auto p = predict(n.state, n.config, to_image(image, roi));
            return py::make_tuple(from_mask(p.mask), from_field(p.responsibilities));
          },
          py::arg("image"), py::arg("roi") = py::none(), "(mask, responsibilities) for one image.");

  m.def(
      "deep_fit",
      [](const F64& image, int classes, const std::string& variant, std::uint64_t seed, int depth, int width,
         double lr, double threshold, int max_steps, int window, std::optional<U8> roi) {
        if (variant != "deepg" && variant != "deepsvg") {
          fail(ErrorCode::InvalidConfig, "variant must be deepg or deepsvg");
        }
        DeepFitOptions o;
        o.variant = variant == "deepg" ? DeepVariant::DeepG : DeepVariant::DeepSVG;
        o.lr = lr;
        o.threshold = threshold;
        o.max_steps = max_steps;
        o.window = window;
        NetworkConfig cfg;
        cfg.depth = depth;
        cfg.base_width = width;
        auto r = deep_fit_single(to_image(image, roi), classes, cfg, seed, o);
        auto d = components_dict(r.weights, r.components);
        d["mask"] = from_mask(r.mask);
        d["responsibilities"] = from_field(r.responsibilities);
        std::vector<double> trace;
        for (const auto& rec : r.trace) trace.push_back(rec.total());
        d["loss_trace"] = trace;
        d["steps"] = r.steps;
        d["converged"] = r.converged;
        d["network"] = Network{r.config, std::move(r.network)};
        return d;
      },
      py::arg("image"), py::arg("classes"), py::arg("variant") = "deepsvg", py::arg("seed") = 0,
      py::arg("depth") = 3, py::arg("width") = 16, py::arg("lr") = 1e-3, py::arg("threshold") = 1e-3,
      py::arg("max_steps") = 5000, py::arg("window") = 20, py::arg("roi") = py::none());

  m.def(
      "dice",
      [](const U8& pred, const U8& gt, int classes, bool rearrange, std::optional<U8> roi) {
        const auto p = to_mask(pred, classes, roi);
        const auto g = to_mask(gt, classes, roi);
        const auto r = rearrange ? best_permutation_dice(p, g) : identity_dice(p, g);
        py::dict d;
        d["per_class"] = r.per_class;
        d["mean"] = r.mean;
        d["permutation"] = r.permutation;
        return d;
      },
      py::arg("pred"), py::arg("gt"), py::arg("classes"), py::arg("rearrange") = true, py::arg("roi") = py::none());

  m.def(
      "boundary_length",
      [](const U8& mask, int classes, std::optional<U8> roi) { return boundary_length(to_mask(mask, classes, roi)); },
      py::arg("mask"), py::arg("classes"), py::arg("roi") = py::none());

  m.def(
      "write_tensor",
      [](const std::string& path, py::array array) {
        std::vector<std::uint32_t> dims;
        for (py::ssize_t i = 0; i < array.ndim(); ++i) dims.push_back(static_cast<std::uint32_t>(array.shape(i)));
        if (py::isinstance<py::array_t<std::uint8_t>>(array)) {
          const auto a = array.cast<U8>();
          write_tensor(path, TensorFile::from_bytes(dims, std::span(a.data(), static_cast<std::size_t>(a.size()))));
        } else {
          const auto a = array.cast<F64>();
          write_tensor(path, TensorFile::from_doubles(dims, std::span(a.data(), static_cast<std::size_t>(a.size()))));
        }
      },
      py::arg("path"), py::arg("array"), "uint8 arrays are stored as uint8, everything else as float64.");

  m.def(
      "read_tensor",
      [](const std::string& path) -> py::array {
        const auto t = read_tensor(path);
        std::vector<py::ssize_t> shape(t.dims.begin(), t.dims.end());
        if (t.dtype == DType::UInt8) {
          py::array_t<std::uint8_t> out(shape);
          const auto v = t.to_bytes();
          std::copy(v.begin(), v.end(), out.mutable_data());
          return out;
        }
        py::array_t<double> out(shape);
        const auto v = t.to_doubles();
        std::copy(v.begin(), v.end(), out.mutable_data());
        return out;
      },
      py::arg("path"));
}
