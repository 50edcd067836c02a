#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "dgmm/checkpoint.hpp"
#include "dgmm/dataset.hpp"
#include "dgmm/error.hpp"
#include "support.hpp"

using namespace dgmm;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("image, roi and mask survive the manifest round trip") {
  TempDir dir("dgmm_test_manifest");
  testing::Rng rng(1);
  const auto d = testing::random_domain(rng, 5, 6);
  const auto img = testing::random_image(rng, d, 2);
  std::vector<int> labels(d.size());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 3);
  const SegmentationMask mask(d, 3, labels);
  write_tensor(dir.path / "image.dgmm", image_to_tensor(img));
  write_tensor(dir.path / "roi.dgmm", roi_to_tensor(d));
  write_tensor(dir.path / "mask.dgmm", mask_to_tensor(mask));
  write_manifest(dir.path / "m.txt", {"image.dgmm", fs::path("mask.dgmm"), fs::path("roi.dgmm")});

  const auto manifest = read_manifest(dir.path / "m.txt");
  CHECK(manifest.image == dir.path / "image.dgmm");
  const auto loaded = load_manifest_image(manifest);
  CHECK(loaded.image.domain() == d);
  CHECK(loaded.image.samples() == img.samples());
  REQUIRE(loaded.ground_truth);
  CHECK(mask_from_tensor(*loaded.ground_truth, d, 3) == mask);

  std::ofstream(dir.path / "bad.txt") << "mask=x.dgmm\n";
  CHECK(code_of([&] { read_manifest(dir.path / "bad.txt"); }) == ErrorCode::InvalidConfig);
  std::ofstream(dir.path / "typo.txt") << "image=a.dgmm\nimgae=b.dgmm\n";
  CHECK(code_of([&] { read_manifest(dir.path / "typo.txt"); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([&] { image_from_tensor(image_to_tensor(img), PixelDomain::full(6, 5)); }) ==
        ErrorCode::DomainMismatch);
}

TEST_CASE("responsibility tensor layout") {
  PixelDomain d(1, 3, {1, 0, 1});
  const ResponsibilityField w(d, 2, {0.25, 0.75, 1.0, 0.0});
  const auto t = responsibilities_to_tensor(w);
  CHECK(t.dims == std::vector<std::uint32_t>{2, 1, 3});
  CHECK(t.to_doubles() == std::vector<double>{0.25, 0.0, 1.0, 0.75, 0.0, 0.0});
}

TEST_CASE("checkpoint round trip") {
  TempDir dir("dgmm_test_checkpoint");
  NetworkConfig cfg;
  cfg.in_channels = 2;
  cfg.out_channels = 3;
  cfg.depth = 2;
  cfg.base_width = 3;
  auto net = init_network(cfg, 9);
  testing::Rng rng(2);
  Gradients g = zero_gradients(net);
  for (auto& p : g) {
    for (double& v : p) v = std::normal_distribution<double>(0.0, 1.0)(rng);
  }
  adamw_step(net, g, {});
  save_checkpoint(dir.path, cfg, net);
  const auto back = load_checkpoint(dir.path);
  CHECK(back.config == cfg);
  CHECK(back.network.step == 1);
  REQUIRE(back.network.params.size() == net.params.size());
  for (std::size_t p = 0; p < net.params.size(); ++p) {
    CHECK(back.network.params[p].name == net.params[p].name);
    CHECK(back.network.params[p].value == net.params[p].value);
    CHECK(back.network.params[p].m == net.params[p].m);
    CHECK(back.network.params[p].v == net.params[p].v);
  }
  const auto img = testing::random_image(rng, PixelDomain::full(7, 5), 2);
  CHECK(forward(back.network, back.config, img).output().weights() ==
        forward(net, cfg, img).output().weights());

  // A parameter file that no longer matches the recorded configuration.
  write_tensor(dir.path / "head.weight.dgmm", TensorFile::from_doubles({2}, std::vector<double>{1, 2}));
  const auto e = code_of([&] { load_checkpoint(dir.path); });
  CHECK((e == ErrorCode::ShapeError || e == ErrorCode::ConfigMismatch));
  CHECK(code_of([&] { load_checkpoint(dir.path / "missing"); }) == ErrorCode::IoError);
}

TEST_CASE("mixture parameter and mean matrix files") {
  TempDir dir("dgmm_test_params");
  const std::vector<DiagGaussian> comps{{{0.5, 1.0}, {0.1, 0.2}}, {{-1.0, 3.0}, {2.0, 0.3}}};
  write_mixture_params(dir.path / "p.dgmm", {0.25, 0.75}, comps);
  const auto back = read_mixture_params(dir.path / "p.dgmm");
  CHECK(back.weights == std::vector<double>{0.25, 0.75});
  REQUIRE(back.classes() == 2);
  CHECK(back.components[1].mean == comps[1].mean);
  CHECK(back.components[1].var == comps[1].var);

  write_mean_matrix(dir.path / "mu.dgmm", {1, 2, 3}, 3, 1);
  CHECK(read_mean_matrix(dir.path / "mu.dgmm", 3, 1) == std::vector<double>{1, 2, 3});
  CHECK(code_of([&] { read_mean_matrix(dir.path / "mu.dgmm", 2, 1); }) == ErrorCode::ShapeError);
}
