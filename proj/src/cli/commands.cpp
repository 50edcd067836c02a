#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dgmm/checkpoint.hpp"
#include "dgmm/dataset.hpp"
#include "dgmm/deep_em.hpp"
#include "dgmm/error.hpp"
#include "dgmm/evaluation.hpp"
#include "dgmm/gmm.hpp"
#include "dgmm/svgmm.hpp"
#include "dgmm/synthetic.hpp"
#include "text_util.hpp"

namespace dgmm::cli {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Fills options not given on the command line from a key=value file whose
// keys are the long flag names without dashes.
void apply_config(CLI::App& app, const std::string& path) {
  for (const auto& [key, value] : detail::parse_key_values(detail::read_text_file(path))) {
    if (key == "config") fail(ErrorCode::InvalidConfig, path + ": config files cannot nest");
    auto* opt = app.get_option_no_throw("--" + key);
    if (opt == nullptr) fail(ErrorCode::InvalidConfig, path + ": unknown key '" + key + "'");
    if (opt->count() > 0) continue;
    std::istringstream items(value);
    std::string item;
    if (opt->get_expected_max() > 1) {
      while (std::getline(items, item, ',')) opt->add_result(detail::trim(item));
    } else {
      opt->add_result(value);
    }
    try {
      opt->run_callback();
    } catch (const CLI::Error& e) {
      fail(ErrorCode::InvalidConfig, path + ": bad value for " + key + ": " + e.what());
    }
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    fail(ErrorCode::IoError, "cannot create output directory " + dir.string() +
                                 (ec ? ": " + ec.message() : std::string()));
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

std::string format_double(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

// Metrics are single-line tab-separated key=value records.
class Record {
 public:
  Record& add(const std::string& key, const std::string& value) {
    line_ += (line_.empty() ? "" : "\t") + key + "=" + value;
    return *this;
  }
  Record& add(const std::string& key, double value) { return add(key, format_double(value)); }
  Record& add(const std::string& key, long value) { return add(key, std::to_string(value)); }
  Record& add(const std::string& key, int value) { return add(key, std::to_string(value)); }
  const std::string& str() const { return line_; }

 private:
  std::string line_;
};

std::string trace_text(const std::vector<LossRecord>& trace) {
  std::string text = "step\tbase\tpenalty\ttotal\n";
  for (const auto& r : trace) text += format_loss_record(r) + "\n";
  return text;
}

std::string em_trace_text(const std::vector<double>& trace) {
  std::string text = "iteration\tnll\n";
  for (std::size_t i = 0; i < trace.size(); ++i) text += std::to_string(i + 1) + "\t" + format_double(trace[i]) + "\n";
  return text;
}

MultiChannelImage load_normalized(const fs::path& manifest_path) {
  return normalize_image(load_manifest_image(read_manifest(manifest_path)).image);
}

// Options shared by fit and train.
struct DeepFlags {
  double lr = 1e-3;
  double weight_decay = 0.0;
  double lambda = 0.0;
  std::string mu_data;
  int depth = NetworkConfig{}.depth;
  int width = NetworkConfig{}.base_width;
  int kernel = NetworkConfig{}.kernel_size;
  int window = DeepFitOptions{}.window;
  bool through_components = false;

  std::vector<CLI::Option*> options;

  void add_to(CLI::App& app) {
    options = {
        app.add_option("--lr", lr, "AdamW learning rate"),
        app.add_option("--weight-decay", weight_decay, "AdamW decoupled weight decay"),
        app.add_option("--lambda", lambda, "weight of the mean regularizer"),
        app.add_option("--mu-data", mu_data, "K x m reference mean tensor"),
        app.add_option("--depth", depth, "network depth"),
        app.add_option("--width", width, "channels at the first network level"),
        app.add_option("--kernel", kernel, "convolution kernel size"),
        app.add_option("--window", window, "steps without improvement before stopping"),
        app.add_flag("--through-components", through_components,
                     "deepsvg: also differentiate through the M-step means and variances"),
    };
  }

  // Names of deep-only options the user set.
  std::vector<std::string> given() const {
    std::vector<std::string> names;
    for (const auto* o : options) {
      if (o->count() > 0) names.push_back(o->get_name());
    }
    return names;
  }

  NetworkConfig network() const {
    NetworkConfig cfg;
    cfg.depth = depth;
    cfg.base_width = width;
    cfg.kernel_size = kernel;
    return cfg;
  }

  // Checked before anything is loaded or computed.
  void validate() const {
    if (lambda < 0.0) fail(ErrorCode::InvalidConfig, "--lambda must be nonnegative");
    if (lambda > 0.0 && mu_data.empty()) fail(ErrorCode::InvalidConfig, "--lambda > 0 requires --mu-data");
    if (!(lr > 0.0)) fail(ErrorCode::InvalidConfig, "--lr must be positive");
  }

  DeepFitOptions fit_options(DeepVariant variant, int classes, int channels, double threshold,
                             std::optional<int> max_steps) const {
    DeepFitOptions o;
    o.variant = variant;
    o.lr = lr;
    o.weight_decay = weight_decay;
    o.threshold = threshold;
    if (max_steps) o.max_steps = *max_steps;
    o.window = window;
    o.lambda = lambda;
    o.through_components = through_components;
    if (!mu_data.empty()) o.mu_data = read_mean_matrix(mu_data, classes, channels);
    o.validate(classes, channels);
    return o;
  }
};

struct FitCommand {
  std::string config;
  std::string manifest;
  std::string method;
  int classes = 0;
  std::uint64_t seed = 0;
  double threshold = 1e-3;
  std::optional<int> max_iters;
  std::string out;
  bool save_responsibilities = false;
  DeepFlags deep;

  void add_to(CLI::App& app) {
    app.add_option("manifest", manifest, "image manifest")->required();
    app.add_option("--config", config, "key=value file; flags win");
    app.add_option("--method", method, "gmm, svgmm, deepg or deepsvg");
    app.add_option("--classes", classes, "number of classes");
    app.add_option("--seed", seed, "random seed");
    app.add_option("--threshold", threshold, "stopping threshold on the loss gain");
    app.add_option("--max-iters", max_iters, "EM iterations or gradient steps");
    app.add_option("--out", out, "output directory");
    app.add_flag("--save-responsibilities", save_responsibilities, "also write responsibilities.dgmm");
    deep.add_to(app);
  }

  int run(std::ostream& os) const {
    if (method != "gmm" && method != "svgmm" && method != "deepg" && method != "deepsvg") {
      fail(ErrorCode::InvalidConfig, "--method must be gmm, svgmm, deepg or deepsvg, got '" + method + "'");
    }
    if (classes < 1) fail(ErrorCode::InvalidConfig, "--classes must be at least 1");
    if (out.empty()) fail(ErrorCode::InvalidConfig, "--out is required");
    if (!(threshold > 0.0)) fail(ErrorCode::InvalidConfig, "--threshold must be positive");
    const bool is_deep = method == "deepg" || method == "deepsvg";
    if (!is_deep) {
      if (const auto names = deep.given(); !names.empty()) {
        fail(ErrorCode::InvalidConfig, names.front() + " applies only to deepg and deepsvg");
      }
    }
    deep.validate();

    const auto image = load_normalized(manifest);
    const fs::path dir(out);
    ensure_dir(dir);
    const auto start = Clock::now();
    Record record;
    record.add("method", method);

    if (method == "gmm") {
      EmOptions o;
      o.threshold = threshold;
      if (max_iters) o.max_iters = *max_iters;
      const auto r = em_fit(image, classes, seed, o);
      const double elapsed = seconds_since(start);
      const auto mask = argmax_labeling(r.responsibilities);
      write_tensor(dir / "mask.dgmm", mask_to_tensor(mask));
      write_mixture_params(dir / "params.dgmm", r.params.weights, r.params.components);
      if (save_responsibilities) write_tensor(dir / "responsibilities.dgmm", responsibilities_to_tensor(r.responsibilities));
      write_text(dir / "trace.tsv", em_trace_text(r.nll_trace));
      record.add("loss", nll(image, r.params)).add("iterations", r.iterations).add("rescues", r.rescues);
      record.add("converged", r.converged ? 1 : 0).add("seconds", elapsed);
    } else if (method == "svgmm") {
      EmOptions o;
      o.threshold = threshold;
      if (max_iters) o.max_iters = *max_iters;
      const auto r = em_fit_v(image, classes, seed, o);
      const double elapsed = seconds_since(start);
      const auto field = r.proportions_field(image.domain());
      std::vector<double> weights(classes, 0.0);
      for (std::size_t i = 0; i < field.pixel_count(); ++i) {
        for (int k = 0; k < classes; ++k) weights[k] += field(i, k) / static_cast<double>(field.pixel_count());
      }
      write_tensor(dir / "mask.dgmm", mask_to_tensor(r.mask(image.domain())));
      write_mixture_params(dir / "params.dgmm", weights, r.params.components);
      if (save_responsibilities) write_tensor(dir / "responsibilities.dgmm", responsibilities_to_tensor(field));
      write_text(dir / "trace.tsv", em_trace_text(r.nll_trace));
      record.add("loss", nll_v(image, r.params)).add("iterations", r.iterations).add("rescues", r.rescues);
      record.add("converged", r.converged ? 1 : 0).add("seconds", elapsed);
    } else {
      const auto variant = method == "deepg" ? DeepVariant::DeepG : DeepVariant::DeepSVG;
      const auto opts = deep.fit_options(variant, classes, image.channels(), threshold, max_iters);
      const auto r = deep_fit_single(image, classes, deep.network(), seed, opts);
      const double elapsed = seconds_since(start);
      write_tensor(dir / "mask.dgmm", mask_to_tensor(r.mask));
      write_mixture_params(dir / "params.dgmm", r.weights, r.components);
      if (save_responsibilities) write_tensor(dir / "responsibilities.dgmm", responsibilities_to_tensor(r.responsibilities));
      write_text(dir / "trace.tsv", trace_text(r.trace));
      save_checkpoint(dir / "checkpoint", r.config, r.network);
      record.add("loss", r.final_loss()).add("penalty", r.trace.back().penalty).add("steps", r.steps);
      record.add("converged", r.converged ? 1 : 0).add("seconds", elapsed);
    }
    os << record.str() << "\n";
    return 0;
  }
};

struct TrainCommand {
  std::string config;
  std::vector<std::string> manifests;
  int classes = 0;
  std::uint64_t seed = 0;
  double threshold = 1e-3;
  std::optional<int> max_iters;
  std::string out;
  DeepFlags deep;

  void add_to(CLI::App& app) {
    app.add_option("manifests", manifests, "training image manifests");
    app.add_option("--config", config, "key=value file; flags win");
    app.add_option("--classes", classes, "number of classes");
    app.add_option("--seed", seed, "random seed");
    app.add_option("--threshold", threshold, "stopping threshold on the summed loss");
    app.add_option("--max-iters", max_iters, "maximum gradient steps");
    app.add_option("--out", out, "checkpoint directory");
    deep.add_to(app);
  }

  int run(std::ostream& os) const {
    if (manifests.empty()) fail(ErrorCode::InvalidConfig, "train needs at least one manifest");
    if (classes < 1) fail(ErrorCode::InvalidConfig, "--classes must be at least 1");
    if (out.empty()) fail(ErrorCode::InvalidConfig, "--out is required");
    deep.validate();
    std::vector<MultiChannelImage> images;
    for (const auto& m : manifests) images.push_back(load_normalized(m));
    const auto opts =
        deep.fit_options(DeepVariant::DeepSVG, classes, images.front().channels(), threshold, max_iters);
    const fs::path dir(out);
    ensure_dir(dir);
    const auto start = Clock::now();
    const auto r = deep_train_multi(images, classes, deep.network(), seed, opts);
    const double elapsed = seconds_since(start);
    save_checkpoint(dir, r.config, r.network);
    write_text(dir / "trace.tsv", trace_text(r.trace));
    Record record;
    record.add("images", static_cast<int>(images.size())).add("loss", r.trace.back().total());
    record.add("penalty", r.trace.back().penalty).add("steps", r.steps);
    record.add("converged", r.converged ? 1 : 0).add("seconds", elapsed);
    os << record.str() << "\n";
    return 0;
  }
};

struct PredictCommand {
  std::string checkpoint;
  std::string manifest;
  std::string out;
  bool save_responsibilities = false;

  void add_to(CLI::App& app) {
    app.add_option("checkpoint", checkpoint, "checkpoint directory")->required();
    app.add_option("manifest", manifest, "image manifest")->required();
    app.add_option("--out", out, "output directory")->required();
    app.add_flag("--save-responsibilities", save_responsibilities, "also write responsibilities.dgmm");
  }

  int run(std::ostream& os) const {
    const auto ck = load_checkpoint(checkpoint);
    const auto image = load_normalized(manifest);
    if (image.channels() != ck.config.in_channels) {
      fail(ErrorCode::ConfigMismatch, "image has " + std::to_string(image.channels()) +
                                          " channels, checkpoint expects " + std::to_string(ck.config.in_channels));
    }
    const fs::path dir(out);
    ensure_dir(dir);
    const auto start = Clock::now();
    const auto p = predict(ck.network, ck.config, image);
    const double elapsed = seconds_since(start);
    write_tensor(dir / "mask.dgmm", mask_to_tensor(p.mask));
    if (save_responsibilities) write_tensor(dir / "responsibilities.dgmm", responsibilities_to_tensor(p.responsibilities));
    Record record;
    record.add("classes", ck.config.out_channels).add("seconds", elapsed);
    os << record.str() << "\n";
    return 0;
  }
};

struct EvalCommand {
  std::string pred;
  std::string gt;
  std::string roi;
  std::string id = "image";
  int classes = 0;
  bool rearrange = false;
  double nll = std::nan("");

  void add_to(CLI::App& app) {
    app.add_option("pred", pred, "predicted mask tensor")->required();
    app.add_option("gt", gt, "ground-truth mask tensor")->required();
    app.add_option("--classes", classes, "number of classes")->required();
    app.add_option("--roi", roi, "roi tensor (default: full image)");
    app.add_option("--id", id, "image id for the report line");
    app.add_option("--nll", nll, "loss value to carry into the report");
    app.add_flag("--rearrange", rearrange, "relabel the prediction to maximize mean Dice");
  }

  int run(std::ostream& os) const {
    if (classes < 1) fail(ErrorCode::InvalidConfig, "--classes must be at least 1");
    const auto pred_t = read_tensor(pred);
    const auto gt_t = read_tensor(gt);
    if (pred_t.dims != gt_t.dims) fail(ErrorCode::DomainMismatch, "prediction and ground truth differ in shape");
    if (pred_t.dims.size() != 2) fail(ErrorCode::ShapeError, "masks must be 2-d");
    const auto domain = roi.empty() ? PixelDomain::full(static_cast<int>(pred_t.dims[0]), static_cast<int>(pred_t.dims[1]))
                                    : domain_from_tensor(read_tensor(roi));
    const auto p = mask_from_tensor(pred_t, domain, classes);
    const auto g = mask_from_tensor(gt_t, domain, classes);
    const auto report = rearrange ? best_permutation_dice(p, g) : identity_dice(p, g);
    const auto shown = rearrange ? apply_permutation(p, report.permutation) : p;
    os << format_report_line(id, report, nll, boundary_length(shown)) << "\n";
    return 0;
  }
};

struct SynthCommand {
  std::string spec;
  std::string out;
  std::optional<std::uint64_t> seed;

  void add_to(CLI::App& app) {
    app.add_option("spec", spec, "synthetic spec file (key=value)")->required();
    app.add_option("--out", out, "output directory")->required();
    app.add_option("--seed", seed, "override the spec seed");
  }

  int run(std::ostream& os) const {
    auto s = parse_synthetic_spec(detail::read_text_file(spec));
    if (seed) s.seed = *seed;
    const auto sample = generate_synthetic(s);
    const fs::path dir(out);
    ensure_dir(dir);
    write_tensor(dir / "image.dgmm", image_to_tensor(sample.image));
    write_tensor(dir / "mask.dgmm", mask_to_tensor(sample.ground_truth));
    write_tensor(dir / "roi.dgmm", roi_to_tensor(sample.image.domain()));
    write_manifest(dir / "manifest.txt", Manifest{"image.dgmm", fs::path("mask.dgmm"), fs::path("roi.dgmm")});
    os << Record().add("seed", std::to_string(s.seed)).str() << "\n";
    return 0;
  }
};

struct MuDataCommand {
  std::vector<std::string> manifests;
  int classes = 0;
  int n_images = 10;
  std::uint64_t seed = 0;
  std::string out;

  void add_to(CLI::App& app) {
    app.add_option("manifests", manifests, "labeled image manifests")->required();
    app.add_option("--classes", classes, "number of classes")->required();
    app.add_option("--n-images", n_images, "images drawn for the estimate");
    app.add_option("--seed", seed, "random seed for the draw");
    app.add_option("--out", out, "output tensor path")->required();
  }

  int run(std::ostream& os) const {
    std::vector<LabeledImage> samples;
    for (const auto& path : manifests) {
      auto loaded = load_manifest_image(read_manifest(path));
      if (!loaded.ground_truth) fail(ErrorCode::InvalidConfig, path + ": manifest names no mask");
      auto image = normalize_image(loaded.image);
      auto gt = mask_from_tensor(*loaded.ground_truth, image.domain(), classes);
      samples.push_back({std::move(image), std::move(gt)});
    }
    const auto mu = estimate_mu_data(samples, n_images, seed);
    const int channels = samples.front().image.channels();
    write_mean_matrix(out, mu, classes, channels);
    std::string values;
    for (std::size_t i = 0; i < mu.size(); ++i) values += (i ? "," : "") + format_double(mu[i]);
    os << Record().add("classes", classes).add("channels", channels).add("mu", values).str() << "\n";
    return 0;
  }
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app("Gaussian mixture segmentation with EM and network-parameterized responsibilities", "dgmm");
  app.require_subcommand(1);
  SynthCommand synth;
  FitCommand fit;
  TrainCommand train;
  PredictCommand pred;
  EvalCommand eval;
  MuDataCommand mu;
  auto* synth_app = app.add_subcommand("synth", "generate a synthetic image, ground truth and roi");
  auto* fit_app = app.add_subcommand("fit", "segment one image");
  auto* train_app = app.add_subcommand("train", "train a network on several images");
  auto* pred_app = app.add_subcommand("predict", "segment an image with a trained network");
  auto* eval_app = app.add_subcommand("eval", "Dice report of a mask against ground truth");
  auto* mu_app = app.add_subcommand("mu-data", "reference class means from labeled images");
  synth.add_to(*synth_app);
  fit.add_to(*fit_app);
  train.add_to(*train_app);
  pred.add_to(*pred_app);
  eval.add_to(*eval_app);
  mu.add_to(*mu_app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.front()->help());
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "ERROR:" << error_code_name(ErrorCode::InvalidArgument) << ": " << e.what() << "\n";
    return 2;
  }

  try {
    if (fit_app->parsed()) {
      if (!fit.config.empty()) apply_config(*fit_app, fit.config);
      return fit.run(out);
    }
    if (train_app->parsed()) {
      if (!train.config.empty()) apply_config(*train_app, train.config);
      return train.run(out);
    }
    if (synth_app->parsed()) return synth.run(out);
    if (pred_app->parsed()) return pred.run(out);
    if (eval_app->parsed()) return eval.run(out);
    if (mu_app->parsed()) return mu.run(out);
  } catch (const Error& e) {
    err << "ERROR:" << e.code_name() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "ERROR:" << error_code_name(ErrorCode::InvalidArgument) << ": " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace dgmm::cli
