#include "dgmm/deep_em.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "dgmm/error.hpp"

namespace dgmm {

void DeepFitOptions::validate(int classes, int channels) const {
  if (!(lr > 0.0)) fail(ErrorCode::InvalidConfig, "learning rate must be positive");
  if (!(threshold > 0.0)) fail(ErrorCode::InvalidConfig, "threshold must be positive");
  if (max_steps < 0) fail(ErrorCode::InvalidConfig, "max_steps must be nonnegative");
  if (window < 1) fail(ErrorCode::InvalidConfig, "window must be at least 1");
  if (weight_decay < 0.0) fail(ErrorCode::InvalidConfig, "weight decay must be nonnegative");
  if (lambda != 0.0) {
    if (!mu_data) fail(ErrorCode::InvalidConfig, "lambda != 0 requires mu_data");
    if (mu_data->size() != static_cast<std::size_t>(classes) * channels) {
      fail(ErrorCode::InvalidConfig, "mu_data must be " + std::to_string(classes) + " x " +
                                         std::to_string(channels));
    }
  }
}

MixtureLossOptions DeepFitOptions::loss_options() const {
  MixtureLossOptions o;
  o.kind = variant == DeepVariant::DeepSVG ? MixtureKind::Spatial : MixtureKind::Global;
  o.through_components = through_components;
  o.lambda = lambda;
  o.mu_data = mu_data;
  o.var_floor = var_floor;
  return o;
}

std::string format_loss_record(const LossRecord& record) {
  std::ostringstream out;
  out.precision(10);
  out << record.step << '\t' << record.base << '\t' << record.penalty << '\t' << record.total();
  return out.str();
}

NetworkModel::NetworkModel(NetworkConfig config, NetworkState state, std::span<const MultiChannelImage> images,
                           AdamWOptions optimizer)
    : config_(config), state_(std::move(state)), images_(images), optimizer_(optimizer),
      passes_(images.size()), grads_(zero_gradients(state_)) {}

ResponsibilityField NetworkModel::evaluate(std::size_t image) {
  passes_[image] = forward(state_, config_, images_[image]);
  return passes_[image].output();
}

void NetworkModel::accumulate(std::size_t image, std::span<const double> grad_w) {
  const auto g = backward(state_, config_, passes_[image], images_[image], grad_w);
  for (std::size_t p = 0; p < g.size(); ++p) {
    for (std::size_t j = 0; j < g[p].size(); ++j) grads_[p][j] += g[p][j];
  }
}

void NetworkModel::step() {
  adamw_step(state_, grads_, optimizer_);
  for (auto& g : grads_) std::fill(g.begin(), g.end(), 0.0);
}

LogitTableModel::LogitTableModel(std::span<const MultiChannelImage> images, int classes, std::uint64_t seed,
                                 AdamWOptions optimizer)
    : images_(images), classes_(classes), optimizer_(optimizer), outputs_(images.size()) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t i = 0; i < images.size(); ++i) {
    Parameter p{"logits." + std::to_string(i),
                {static_cast<int>(images[i].pixel_count()), classes},
                std::vector<double>(images[i].pixel_count() * classes),
                std::vector<double>(images[i].pixel_count() * classes, 0.0),
                std::vector<double>(images[i].pixel_count() * classes, 0.0)};
    for (double& z : p.value) z = u(rng);
    table_.params.push_back(std::move(p));
  }
  table_.touch();
  grads_ = zero_gradients(table_);
}

ResponsibilityField LogitTableModel::evaluate(std::size_t image) {
  outputs_[image] = ResponsibilityField(images_[image].domain(), classes_,
                                        softmax_rows(table_.params[image].value, classes_));
  return outputs_[image];
}

void LogitTableModel::accumulate(std::size_t image, std::span<const double> grad_w) {
  const auto& w = outputs_[image];
  auto& g = grads_[image];
  for (std::size_t i = 0; i < w.pixel_count(); ++i) {
    double dot = 0.0;
    for (int k = 0; k < classes_; ++k) dot += w(i, k) * grad_w[i * classes_ + k];
    for (int k = 0; k < classes_; ++k) g[i * classes_ + k] += w(i, k) * (grad_w[i * classes_ + k] - dot);
  }
}

void LogitTableModel::step() {
  adamw_step(table_, grads_, optimizer_);
  for (auto& g : grads_) std::fill(g.begin(), g.end(), 0.0);
}

DeepRunResult run_deep_em(ResponsibilityModel& model, std::span<const MultiChannelImage> images,
                          const DeepFitOptions& options) {
  if (images.empty()) fail(ErrorCode::InvalidArgument, "need at least one image");
  const std::size_t count = images.size();
  DeepRunResult result;
  result.responsibilities.resize(count);
  for (std::size_t i = 0; i < count; ++i) result.responsibilities[i] = model.evaluate(i);
  const int classes = result.responsibilities.front().classes();
  options.validate(classes, images.front().channels());
  const auto loss_options = options.loss_options();

  std::vector<std::vector<double>> grad_w(count);
  result.components.resize(count);
  result.weights.resize(count);
  double reference = 0.0;
  int last_improvement = 0;
  for (int step = 0;; ++step) {
    LossRecord record{step, 0.0, 0.0};
    for (std::size_t i = 0; i < count; ++i) {
      auto loss = evaluate_mixture_loss(images[i], result.responsibilities[i], loss_options);
      record.base += loss.base;
      record.penalty += loss.penalty;
      result.components[i] = std::move(loss.components);
      result.weights[i] = std::move(loss.weights);
      grad_w[i] = std::move(loss.grad_w);
    }
    if (!std::isfinite(record.total())) {
      fail(ErrorCode::NonFinite, "loss became non-finite at step " + std::to_string(step));
    }
    result.trace.push_back(record);
    if (step == 0 || record.total() < reference - options.threshold) {
      reference = record.total();
      last_improvement = step;
    }
    if (step - last_improvement >= options.window) {
      result.converged = true;
      break;
    }
    if (step >= options.max_steps) break;

    for (std::size_t i = 0; i < count; ++i) model.accumulate(i, grad_w[i]);
    model.step();
    ++result.steps;
    for (std::size_t i = 0; i < count; ++i) result.responsibilities[i] = model.evaluate(i);
  }
  return result;
}

namespace {

NetworkConfig bind_config(NetworkConfig config, int channels, int classes) {
  config.in_channels = channels;
  config.out_channels = classes;
  config.validate();
  return config;
}

void check_images(std::span<const MultiChannelImage> images, int classes) {
  if (images.empty()) fail(ErrorCode::InvalidArgument, "need at least one training image");
  if (classes < 1) fail(ErrorCode::InvalidArgument, "need at least one class");
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].channels() != images.front().channels()) {
      fail(ErrorCode::HeterogeneousChannels, "image " + std::to_string(i) + " has " +
                                                 std::to_string(images[i].channels()) + " channels, image 0 has " +
                                                 std::to_string(images.front().channels()));
    }
    if (images[i].pixel_count() < static_cast<std::size_t>(classes)) {
      fail(ErrorCode::TooFewPixels, "image " + std::to_string(i) + " has fewer roi pixels than classes");
    }
  }
}

AdamWOptions optimizer_for(const DeepFitOptions& options) {
  AdamWOptions o;
  o.lr = options.lr;
  o.weight_decay = options.weight_decay;
  return o;
}

}  // namespace

DeepTrainResult deep_train_multi(std::span<const MultiChannelImage> images, int classes,
                                 const NetworkConfig& config, std::uint64_t seed,
                                 const DeepFitOptions& options) {
  check_images(images, classes);
  const auto cfg = bind_config(config, images.front().channels(), classes);
  options.validate(classes, cfg.in_channels);
  NetworkModel model(cfg, init_network(cfg, seed), images, optimizer_for(options));
  auto run = run_deep_em(model, images, options);
  DeepTrainResult out;
  out.network = model.release();
  out.config = cfg;
  out.components = std::move(run.components);
  for (const auto& w : run.responsibilities) out.masks.push_back(argmax_labeling(w));
  out.trace = std::move(run.trace);
  out.steps = run.steps;
  out.converged = run.converged;
  return out;
}

DeepFitResult deep_fit_single(const MultiChannelImage& image, int classes, const NetworkConfig& config,
                              std::uint64_t seed, const DeepFitOptions& options) {
  std::span<const MultiChannelImage> images(&image, 1);
  check_images(images, classes);
  const auto cfg = bind_config(config, image.channels(), classes);
  options.validate(classes, cfg.in_channels);
  NetworkModel model(cfg, init_network(cfg, seed), images, optimizer_for(options));
  auto run = run_deep_em(model, images, options);
  DeepFitResult out;
  out.components = std::move(run.components.front());
  out.weights = std::move(run.weights.front());
  out.responsibilities = std::move(run.responsibilities.front());
  out.mask = argmax_labeling(out.responsibilities);
  out.trace = std::move(run.trace);
  out.steps = run.steps;
  out.converged = run.converged;
  out.network = model.release();
  out.config = cfg;
  return out;
}

Prediction predict(const NetworkState& net, const NetworkConfig& config, const MultiChannelImage& image) {
  auto pass = forward(net, config, image);
  Prediction p{pass.output(), {}};
  p.mask = argmax_labeling(p.responsibilities);
  return p;
}

std::vector<double> estimate_mu_data(std::span<const LabeledImage> samples, int n_images, std::uint64_t seed) {
  if (samples.empty() || n_images < 1) {
    fail(ErrorCode::InvalidArgument, "need at least one labeled image");
  }
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t used = std::min<std::size_t>(static_cast<std::size_t>(n_images), samples.size());
  if (used < samples.size()) {
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(used);
    std::sort(order.begin(), order.end());
  }
  const int classes = samples[order.front()].ground_truth.classes();
  const int m = samples[order.front()].image.channels();
  std::vector<double> mu(static_cast<std::size_t>(classes) * m, 0.0);
  for (std::size_t idx : order) {
    const auto& s = samples[idx];
    if (s.image.channels() != m) {
      fail(ErrorCode::HeterogeneousChannels, "labeled images differ in channel count");
    }
    if (!(s.ground_truth.domain() == s.image.domain()) || s.ground_truth.classes() != classes) {
      fail(ErrorCode::DomainMismatch, "ground truth does not match image " + std::to_string(idx));
    }
    std::vector<double> sums(mu.size(), 0.0);
    std::vector<long> counts(classes, 0);
    for (std::size_t i = 0; i < s.image.pixel_count(); ++i) {
      const int k = s.ground_truth[i];
      ++counts[k];
      for (int j = 0; j < m; ++j) sums[k * m + j] += s.image.sample(i)[j];
    }
    for (int k = 0; k < classes; ++k) {
      if (counts[k] == 0) {
        fail(ErrorCode::MissingClass, "image " + std::to_string(idx) + " has no pixels of class " +
                                          std::to_string(k));
      }
      for (int j = 0; j < m; ++j) mu[k * m + j] += sums[k * m + j] / static_cast<double>(counts[k]);
    }
  }
  for (double& v : mu) v /= static_cast<double>(used);
  return mu;
}

}  // namespace dgmm
