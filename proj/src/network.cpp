#include "dgmm/network.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <random>

#include "dgmm/error.hpp"

namespace dgmm {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

struct ConvSpec {
  std::string name;
  int in;
  int out;
  int kernel;
};

// Order matters: forward() walks the convolutions in exactly this order.
std::vector<ConvSpec> conv_plan(const NetworkConfig& cfg) {
  std::vector<ConvSpec> plan;
  const int d = cfg.depth;
  const int k = cfg.kernel_size;
  auto width = [&](int level) { return cfg.base_width << level; };
  for (int l = 0; l < d; ++l) {
    const int in = l == 0 ? cfg.in_channels : width(l - 1);
    plan.push_back({"enc" + std::to_string(l) + ".conv1", in, width(l), k});
    plan.push_back({"enc" + std::to_string(l) + ".conv2", width(l), width(l), k});
  }
  plan.push_back({"bottleneck.conv1", width(d - 1), width(d), k});
  plan.push_back({"bottleneck.conv2", width(d), width(d), k});
  for (int l = d - 1; l >= 0; --l) {
    const int below = width(l + 1);
    plan.push_back({"dec" + std::to_string(l) + ".conv1", below + width(l), width(l), k});
    plan.push_back({"dec" + std::to_string(l) + ".conv2", width(l), width(l), k});
  }
  plan.push_back({"head", width(0), cfg.out_channels, 1});
  return plan;
}

/// Single-image activation, channels × (height·width).
struct Act {
  int c = 0;
  int h = 0;
  int w = 0;
  std::vector<double> v;

  Act() = default;
  Act(int channels, int height, int width)
      : c(channels), h(height), w(width), v(static_cast<std::size_t>(channels) * height * width, 0.0) {}
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  ConstMapMat mat() const { return ConstMapMat(v.data(), c, static_cast<Eigen::Index>(plane())); }
  MapMat mat() { return MapMat(v.data(), c, static_cast<Eigen::Index>(plane())); }
};

RowMat im2col(const Act& in, int k) {
  const int pad = k / 2;
  RowMat col(static_cast<Eigen::Index>(in.c) * k * k, static_cast<Eigen::Index>(in.plane()));
  for (int ci = 0; ci < in.c; ++ci) {
    const double* src = in.v.data() + ci * in.plane();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* dst = col.data() + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * in.plane();
        for (int y = 0; y < in.h; ++y) {
          const int sy = y + ky - pad;
          for (int x = 0; x < in.w; ++x) {
            const int sx = x + kx - pad;
            dst[y * in.w + x] = (sy >= 0 && sy < in.h && sx >= 0 && sx < in.w) ? src[sy * in.w + sx] : 0.0;
          }
        }
      }
    }
  }
  return col;
}

void col2im(const RowMat& col, int k, Act& out) {
  const int pad = k / 2;
  for (int ci = 0; ci < out.c; ++ci) {
    double* dst = out.v.data() + ci * out.plane();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* src = col.data() + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * out.plane();
        for (int y = 0; y < out.h; ++y) {
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= out.h) continue;
          for (int x = 0; x < out.w; ++x) {
            const int sx = x + kx - pad;
            if (sx >= 0 && sx < out.w) dst[sy * out.w + sx] += src[y * out.w + x];
          }
        }
      }
    }
  }
}

std::uint64_t next_version() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

std::uint64_t fingerprint(const MultiChannelImage& image) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](std::uint64_t x) {
    for (int b = 0; b < 8; ++b) {
      h ^= (x >> (8 * b)) & 0xffu;
      h *= 1099511628211ull;
    }
  };
  mix(static_cast<std::uint64_t>(image.channels()));
  mix(static_cast<std::uint64_t>(image.domain().height()));
  mix(static_cast<std::uint64_t>(image.domain().width()));
  for (double v : image.values()) mix(std::bit_cast<std::uint64_t>(v));
  for (auto r : image.domain().roi()) mix(r);
  return h;
}

}  // namespace

namespace detail {

struct ForwardCache {
  std::uint64_t version = 0;
  std::uint64_t fingerprint = 0;
  NetworkConfig config;
  int padded_h = 0;
  int padded_w = 0;
  /// im2col of each convolution's input, in plan order.
  std::vector<RowMat> cols;
  /// Post-ReLU output of every convolution except the head.
  std::vector<Act> relu_out;
  /// Winning offset within each 2×2 window, per encoder level.
  std::vector<std::vector<std::uint8_t>> pool_argmax;
};

}  // namespace detail

Tensor4::Tensor4(int n, int c, int h, int w)
    : batch(n), channels(c), height(h), width(w),
      values(static_cast<std::size_t>(n) * c * h * w, 0.0) {
  if (n < 1 || c < 1 || h < 1 || w < 1) {
    fail(ErrorCode::ShapeError, "tensor dims must be positive");
  }
}

void NetworkConfig::validate() const {
  if (in_channels < 1 || out_channels < 1) {
    fail(ErrorCode::InvalidConfig, "network needs positive input and output channels");
  }
  if (depth < 1 || depth > 8) fail(ErrorCode::InvalidConfig, "network depth must lie in 1..8");
  if (base_width < 1) fail(ErrorCode::InvalidConfig, "base width must be positive");
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    fail(ErrorCode::InvalidConfig, "kernel size must be odd and positive");
  }
}

void NetworkState::touch() { version = next_version(); }

std::size_t NetworkState::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.size();
  return n;
}

Parameter& NetworkState::param(const std::string& name) {
  for (auto& p : params) {
    if (p.name == name) return p;
  }
  fail(ErrorCode::InvalidArgument, "no parameter named " + name);
}

const Parameter& NetworkState::param(const std::string& name) const {
  return const_cast<NetworkState*>(this)->param(name);
}

NetworkState init_network(const NetworkConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  NetworkState net;
  for (const auto& conv : conv_plan(config)) {
    const int fan_in = conv.in * conv.kernel * conv.kernel;
    // He-uniform: keeps activation variance roughly constant through the
    // ReLU stack, so the initial output already varies across the image.
    const double bound = std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> u(-bound, bound);
    Parameter w{conv.name + ".weight", {conv.out, conv.in, conv.kernel, conv.kernel}, {}, {}, {}};
    w.value.resize(static_cast<std::size_t>(conv.out) * fan_in);
    for (double& x : w.value) x = u(rng);
    Parameter b{conv.name + ".bias", {conv.out}, std::vector<double>(conv.out, 0.0), {}, {}};
    for (auto* p : {&w, &b}) {
      p->m.assign(p->size(), 0.0);
      p->v.assign(p->size(), 0.0);
    }
    net.params.push_back(std::move(w));
    net.params.push_back(std::move(b));
  }
  net.touch();
  return net;
}

Gradients zero_gradients(const NetworkState& net) {
  Gradients g;
  g.reserve(net.params.size());
  for (const auto& p : net.params) g.emplace_back(p.size(), 0.0);
  return g;
}

ForwardPass::ForwardPass() = default;
ForwardPass::~ForwardPass() = default;
ForwardPass::ForwardPass(ForwardPass&&) noexcept = default;
ForwardPass& ForwardPass::operator=(ForwardPass&&) noexcept = default;

std::vector<double> softmax_rows(std::span<const double> logits, int classes) {
  std::vector<double> out(logits.size());
  for (std::size_t r = 0; r * classes < logits.size(); ++r) {
    const double* z = logits.data() + r * classes;
    double top = z[0];
    for (int k = 1; k < classes; ++k) top = std::max(top, z[k]);
    double sum = 0.0;
    for (int k = 0; k < classes; ++k) {
      out[r * classes + k] = std::exp(z[k] - top);
      sum += out[r * classes + k];
    }
    for (int k = 0; k < classes; ++k) out[r * classes + k] /= sum;
  }
  return out;
}

namespace {

void check_state(const NetworkState& net, const NetworkConfig& config) {
  const auto plan = conv_plan(config);
  if (net.params.size() != 2 * plan.size()) {
    fail(ErrorCode::ConfigMismatch, "network state does not match the configuration");
  }
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto& w = net.params[2 * i];
    const std::vector<int> shape{plan[i].out, plan[i].in, plan[i].kernel, plan[i].kernel};
    if (w.shape != shape || w.value.size() != static_cast<std::size_t>(plan[i].out) * plan[i].in *
                                                   plan[i].kernel * plan[i].kernel ||
        net.params[2 * i + 1].value.size() != static_cast<std::size_t>(plan[i].out)) {
      fail(ErrorCode::ConfigMismatch, "parameter " + w.name + " does not match the configuration");
    }
  }
}

Act conv_forward(const Parameter& weight, const Parameter& bias, const ConvSpec& spec, const Act& in,
                 RowMat& col_out) {
  col_out = im2col(in, spec.kernel);
  Act out(spec.out, in.h, in.w);
  ConstMapMat w(weight.value.data(), spec.out, static_cast<Eigen::Index>(spec.in) * spec.kernel * spec.kernel);
  out.mat().noalias() = w * col_out;
  for (int c = 0; c < spec.out; ++c) out.mat().row(c).array() += bias.value[c];
  return out;
}

void relu_inplace(Act& a) {
  for (double& x : a.v) x = x > 0.0 ? x : 0.0;
}

Act maxpool(const Act& in, std::vector<std::uint8_t>& argmax) {
  Act out(in.c, in.h / 2, in.w / 2);
  argmax.assign(out.v.size(), 0);
  for (int c = 0; c < in.c; ++c) {
    for (int y = 0; y < out.h; ++y) {
      for (int x = 0; x < out.w; ++x) {
        const double* src = in.v.data() + c * in.plane();
        std::uint8_t best = 0;
        double best_v = src[(2 * y) * in.w + 2 * x];
        for (std::uint8_t o = 1; o < 4; ++o) {
          const double v = src[(2 * y + o / 2) * in.w + 2 * x + o % 2];
          if (v > best_v) {
            best_v = v;
            best = o;
          }
        }
        const std::size_t idx = c * out.plane() + static_cast<std::size_t>(y) * out.w + x;
        out.v[idx] = best_v;
        argmax[idx] = best;
      }
    }
  }
  return out;
}

Act upsample_concat(const Act& low, const Act& skip) {
  Act out(low.c + skip.c, skip.h, skip.w);
  for (int c = 0; c < low.c; ++c) {
    for (int y = 0; y < skip.h; ++y) {
      for (int x = 0; x < skip.w; ++x) {
        out.v[c * out.plane() + static_cast<std::size_t>(y) * out.w + x] =
            low.v[c * low.plane() + static_cast<std::size_t>(y / 2) * low.w + x / 2];
      }
    }
  }
  std::copy(skip.v.begin(), skip.v.end(), out.v.begin() + static_cast<std::ptrdiff_t>(low.c * out.plane()));
  return out;
}

}  // namespace

ForwardPass forward(const NetworkState& net, const NetworkConfig& config, const MultiChannelImage& image) {
  config.validate();
  check_state(net, config);
  if (image.channels() != config.in_channels) {
    fail(ErrorCode::ConfigMismatch, "image has " + std::to_string(image.channels()) + " channels, network expects " +
                                        std::to_string(config.in_channels));
  }
  const auto plan = conv_plan(config);
  const int d = config.depth;
  const int h = image.domain().height();
  const int w = image.domain().width();
  const int mult = config.stride_multiple();
  auto cache = std::make_unique<detail::ForwardCache>();
  cache->version = net.version;
  cache->fingerprint = fingerprint(image);
  cache->config = config;
  cache->padded_h = (h + mult - 1) / mult * mult;
  cache->padded_w = (w + mult - 1) / mult * mult;
  cache->cols.resize(plan.size());
  cache->relu_out.reserve(plan.size());

  Act x(image.channels(), cache->padded_h, cache->padded_w);
  for (int c = 0; c < image.channels(); ++c) {
    for (int y = 0; y < x.h; ++y) {
      for (int q = 0; q < x.w; ++q) {
        x.v[c * x.plane() + static_cast<std::size_t>(y) * x.w + q] = image.at(c, reflect_index(y, h), reflect_index(q, w));
      }
    }
  }

  std::size_t layer = 0;
  auto conv_relu = [&](const Act& in) {
    Act out = conv_forward(net.params[2 * layer], net.params[2 * layer + 1], plan[layer], in, cache->cols[layer]);
    relu_inplace(out);
    ++layer;
    cache->relu_out.push_back(out);
    return out;
  };

  std::vector<const Act*> skips(d);
  std::vector<std::size_t> skip_index(d);
  cache->pool_argmax.resize(d);
  for (int l = 0; l < d; ++l) {
    Act a = conv_relu(x);
    Act s = conv_relu(a);
    skip_index[l] = cache->relu_out.size() - 1;
    x = maxpool(s, cache->pool_argmax[l]);
  }
  x = conv_relu(x);
  x = conv_relu(x);
  for (int l = d - 1; l >= 0; --l) {
    const Act& skip = cache->relu_out[skip_index[l]];
    Act cat = upsample_concat(x, skip);
    x = conv_relu(cat);
    x = conv_relu(x);
  }
  const Act logits =
      conv_forward(net.params[2 * layer], net.params[2 * layer + 1], plan[layer], x, cache->cols[layer]);

  const auto& domain = image.domain();
  const int classes = config.out_channels;
  std::vector<double> z(domain.size() * classes);
  for (std::size_t i = 0; i < domain.size(); ++i) {
    const std::size_t offset = domain.grid_offset(i);
    const std::size_t y = offset / w;
    const std::size_t q = offset % w;
    for (int k = 0; k < classes; ++k) z[i * classes + k] = logits.v[k * logits.plane() + y * logits.w + q];
  }
  ForwardPass pass;
  pass.output_ = ResponsibilityField(domain, classes, softmax_rows(z, classes));
  pass.cache_ = std::move(cache);
  return pass;
}

Gradients backward(const NetworkState& net, const NetworkConfig& config, const ForwardPass& pass,
                   const MultiChannelImage& image, std::span<const double> loss_grad) {
  const auto* cache = pass.cache_.get();
  if (cache == nullptr || cache->version != net.version || !(cache->config == config) ||
      cache->fingerprint != fingerprint(image)) {
    fail(ErrorCode::StaleActivations, "backward needs a forward pass on the same network state and image");
  }
  const auto& domain = image.domain();
  const int classes = config.out_channels;
  if (loss_grad.size() != domain.size() * classes) {
    fail(ErrorCode::ShapeError, "loss gradient must be |Omega| x |K|");
  }
  const auto plan = conv_plan(config);
  const int d = config.depth;
  const int w = domain.width();
  Gradients grads = zero_gradients(net);

  // Softmax backward into the padded logit grid; pixels outside Ω get no gradient.
  Act dx(classes, cache->padded_h, cache->padded_w);
  const auto& probs = pass.output_;
  for (std::size_t i = 0; i < domain.size(); ++i) {
    const auto p = probs.row(i);
    double dot = 0.0;
    for (int k = 0; k < classes; ++k) dot += p[k] * loss_grad[i * classes + k];
    const std::size_t offset = domain.grid_offset(i);
    const std::size_t y = offset / w;
    const std::size_t q = offset % w;
    for (int k = 0; k < classes; ++k) {
      dx.v[k * dx.plane() + y * dx.w + q] = p[k] * (loss_grad[i * classes + k] - dot);
    }
  }

  // Returns the input gradient unless the convolution reads the network input.
  auto conv_backward = [&](std::size_t layer, const Act& dout, int in_h, int in_w, bool need_input) {
    const auto& spec = plan[layer];
    const RowMat& col = cache->cols[layer];
    const Eigen::Index cols = static_cast<Eigen::Index>(spec.in) * spec.kernel * spec.kernel;
    MapMat dweight(grads[2 * layer].data(), spec.out, cols);
    dweight.noalias() += dout.mat() * col.transpose();
    for (int c = 0; c < spec.out; ++c) grads[2 * layer + 1][c] += dout.mat().row(c).sum();
    Act din;
    if (need_input) {
      ConstMapMat weight(net.params[2 * layer].value.data(), spec.out, cols);
      RowMat dcol = weight.transpose() * dout.mat();
      din = Act(spec.in, in_h, in_w);
      col2im(dcol, spec.kernel, din);
    }
    return din;
  };
  auto relu_backward = [&](Act& grad, std::size_t layer) {
    const auto& out = cache->relu_out[layer];
    for (std::size_t i = 0; i < grad.v.size(); ++i) {
      if (!(out.v[i] > 0.0)) grad.v[i] = 0.0;
    }
  };

  std::size_t layer = plan.size() - 1;
  dx = conv_backward(layer, dx, dx.h, dx.w, true);

  std::vector<Act> skip_grads(d);
  for (int l = 0; l < d; ++l) {
    // Decoder level l: conv2 at index layer-1, conv1 at layer-2.
    --layer;
    relu_backward(dx, layer);
    dx = conv_backward(layer, dx, dx.h, dx.w, true);
    --layer;
    relu_backward(dx, layer);
    Act dcat = conv_backward(layer, dx, dx.h, dx.w, true);
    const int low_c = plan[layer].in - (config.base_width << l);
    Act dlow(low_c, dcat.h / 2, dcat.w / 2);
    for (int c = 0; c < low_c; ++c) {
      for (int y = 0; y < dcat.h; ++y) {
        for (int q = 0; q < dcat.w; ++q) {
          dlow.v[c * dlow.plane() + static_cast<std::size_t>(y / 2) * dlow.w + q / 2] +=
              dcat.v[c * dcat.plane() + static_cast<std::size_t>(y) * dcat.w + q];
        }
      }
    }
    Act dskip(dcat.c - low_c, dcat.h, dcat.w);
    std::copy(dcat.v.begin() + static_cast<std::ptrdiff_t>(low_c * dcat.plane()), dcat.v.end(), dskip.v.begin());
    skip_grads[l] = std::move(dskip);
    dx = std::move(dlow);
  }
  // Bottleneck.
  --layer;
  relu_backward(dx, layer);
  dx = conv_backward(layer, dx, dx.h, dx.w, true);
  --layer;
  relu_backward(dx, layer);
  dx = conv_backward(layer, dx, dx.h, dx.w, true);

  for (int l = d - 1; l >= 0; --l) {
    Act& dskip = skip_grads[l];
    const auto& argmax = cache->pool_argmax[l];
    for (int c = 0; c < dx.c; ++c) {
      for (int y = 0; y < dx.h; ++y) {
        for (int q = 0; q < dx.w; ++q) {
          const std::size_t idx = c * dx.plane() + static_cast<std::size_t>(y) * dx.w + q;
          const int o = argmax[idx];
          dskip.v[c * dskip.plane() + static_cast<std::size_t>(2 * y + o / 2) * dskip.w + 2 * q + o % 2] += dx.v[idx];
        }
      }
    }
    --layer;
    relu_backward(dskip, layer);
    Act da = conv_backward(layer, dskip, dskip.h, dskip.w, true);
    --layer;
    relu_backward(da, layer);
    dx = conv_backward(layer, da, da.h, da.w, l > 0);
  }
  return grads;
}

void adamw_step(NetworkState& net, const Gradients& grads, const AdamWOptions& options) {
  if (grads.size() != net.params.size()) {
    fail(ErrorCode::ShapeError, "gradient collection does not match the parameters");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].size() != net.params[i].size()) {
      fail(ErrorCode::ShapeError, "gradient for " + net.params[i].name + " has the wrong size");
    }
  }
  ++net.step;
  net.touch();
  const double t = static_cast<double>(net.step);
  const double c1 = 1.0 - std::pow(options.beta1, t);
  const double c2 = 1.0 - std::pow(options.beta2, t);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto& p = net.params[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double g = grads[i][j];
      p.m[j] = options.beta1 * p.m[j] + (1.0 - options.beta1) * g;
      p.v[j] = options.beta2 * p.v[j] + (1.0 - options.beta2) * g * g;
      const double m_hat = p.m[j] / c1;
      const double v_hat = p.v[j] / c2;
      p.value[j] -= options.lr * options.weight_decay * p.value[j];
      p.value[j] -= options.lr * m_hat / (std::sqrt(v_hat) + options.eps);
    }
  }
}

}  // namespace dgmm
