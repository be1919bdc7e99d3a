#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>

#include "mdt/core/errors.hpp"
#include "mdt/fen/fen.hpp"
#include "test_util.hpp"

using namespace mdt;
using testutil::random_tensor;

namespace {

fen::Fen<float> make_fen(std::uint64_t seed = 42, const std::string& variant = "vgg16") {
  fen::FenConfig cfg;
  cfg.variant = variant;
  cfg.seed = seed;
  return fen::Fen<float>::build(cfg);
}

// explicit double-loop Gram oracle
Tensor<double> gram_oracle(const Tensor<float>& f) {
  const i64 n = f.dim(0), c = f.dim(1), hw = f.dim(2) * f.dim(3);
  Tensor<double> g({n, c, c});
  for (i64 b = 0; b < n; ++b)
    for (i64 i = 0; i < c; ++i)
      for (i64 j = 0; j < c; ++j) {
        double acc = 0.0;
        for (i64 p = 0; p < hw; ++p)
          acc += static_cast<double>(f.data()[(b * c + i) * hw + p]) *
                 static_cast<double>(f.data()[(b * c + j) * hw + p]);
        g.data()[(b * c + i) * c + j] = acc / static_cast<double>(c * hw);
      }
  return g;
}

}  // namespace

TEST_CASE("random-seeded FEN is reproducible") {
  auto f1 = make_fen(42);
  auto f2 = make_fen(42);
  auto img = random_tensor<float>({2, 1, 64, 64}, 5);
  auto a = f1.extract(img, {"relu3_2"});
  auto b = f2.extract(img, {"relu3_2"});
  CHECK(testutil::bitwise_equal(a[0].values, b[0].values));
  // and pure: same handle twice
  auto c = f1.extract(img, {"relu3_2"});
  CHECK(testutil::bitwise_equal(a[0].values, c[0].values));
}

TEST_CASE("config validation") {
  fen::FenConfig cfg;
  cfg.content_layers.clear();
  CHECK_THROWS_AS(fen::Fen<float>::build(cfg), ConfigError);
  cfg = {};
  cfg.domain_layers = {"relu9_9"};
  CHECK_THROWS_AS(fen::Fen<float>::build(cfg), ConfigError);
  cfg = {};
  cfg.variant = "resnet";
  CHECK_THROWS_AS(fen::Fen<float>::build(cfg), ConfigError);
}

TEST_CASE("vgg19 weight file refuses to load as vgg16") {
  testutil::TmpDir tmp("fenw");
  const std::string path = (tmp.path / "w.mdt").string();
  make_fen(1, "vgg19").export_weights(path);
  fen::FenConfig cfg;
  cfg.variant = "vgg16";
  cfg.weights_source = "pretrained-file";
  cfg.weights_path = path;
  CHECK_THROWS_WITH_AS(fen::Fen<float>::build(cfg),
                       doctest::Contains("FEN manifest mismatch"), std::runtime_error);
}

TEST_CASE("weight file round-trip reproduces activations") {
  testutil::TmpDir tmp("fenrt");
  const std::string path = (tmp.path / "w.mdt").string();
  auto f = make_fen(9);
  f.export_weights(path);
  fen::FenConfig cfg;
  cfg.weights_source = "pretrained-file";
  cfg.weights_path = path;
  auto g = fen::Fen<float>::build(cfg);
  auto img = random_tensor<float>({1, 1, 32, 32}, 2);
  CHECK(testutil::bitwise_equal(f.extract(img, {"relu2_2"})[0].values,
                                g.extract(img, {"relu2_2"})[0].values));
}

TEST_CASE("spatial dims follow the pooling schedule") {
  auto f = make_fen();
  auto img = random_tensor<float>({1, 1, 64, 64}, 3);
  auto maps = f.extract(img, {"relu1_2", "relu4_1"});
  CHECK(maps[0].values.shape() == std::vector<i64>{1, 64, 64, 64});
  CHECK(maps[1].values.shape() == std::vector<i64>{1, 512, 8, 8});
}

TEST_CASE("deep layers reject too-small inputs") {
  auto img = random_tensor<float>({1, 1, 16, 16}, 3);
  fen::FenConfig cfg;
  cfg.seed = 1;
  cfg.domain_layers = {"relu5_3"};
  auto f = fen::Fen<float>::build(cfg);
  CHECK_THROWS_WITH_AS(f.extract(img, {"relu5_3"}),
                       doctest::Contains("input too small for layer relu5_3"),
                       std::runtime_error);
}

TEST_CASE("batch elements are independent") {
  auto f = make_fen();
  auto one = random_tensor<float>({1, 1, 32, 32}, 8);
  Tensor<float> two({2, 1, 32, 32});
  std::copy(one.data(), one.data() + one.numel(), two.data());
  std::copy(one.data(), one.data() + one.numel(), two.data() + one.numel());
  auto m = f.extract(two, {"relu2_2"});
  const i64 half = m[0].values.numel() / 2;
  for (i64 i = 0; i < half; ++i)
    CHECK(m[0].values[i] == m[0].values[half + i]);
}

TEST_CASE("gram matches the hand-written oracle") {
  // C=2, H=1, W=2, channels [1,2] and [3,4]
  Tensor<float> f({1, 2, 1, 2});
  f[0] = 1;
  f[1] = 2;
  f[2] = 3;
  f[3] = 4;
  auto g = fen::gram<float>(f);
  CHECK(g[0] == doctest::Approx(1.25));
  CHECK(g[1] == doctest::Approx(2.75));
  CHECK(g[2] == doctest::Approx(2.75));
  CHECK(g[3] == doctest::Approx(6.25));

  // all-zero features -> zero matrix
  Tensor<float> z({1, 3, 4, 4});
  auto gz = fen::gram<float>(z);
  for (i64 i = 0; i < gz.numel(); ++i) CHECK(gz[i] == 0.0f);

  // constant c, C=1, H=W=2 -> [c^2]
  Tensor<float> cst({1, 1, 2, 2});
  cst.fill(0.5f);
  CHECK(fen::gram<float>(cst)[0] == doctest::Approx(0.25));

  // random tensors against the double-loop oracle
  for (int trial = 0; trial < 10; ++trial) {
    auto r = random_tensor<float>({2, 5, 3, 4}, 100 + trial, -1.0f, 1.0f);
    auto gr = fen::gram<float>(r);
    auto go = gram_oracle(r);
    for (i64 i = 0; i < gr.numel(); ++i)
      CHECK(static_cast<double>(gr[i]) == doctest::Approx(go[i]).epsilon(1e-5));
  }
}

TEST_CASE("gram laws: symmetry, PSD, scaling, permutation") {
  const int trials = 300;
  for (int t = 0; t < trials; ++t) {
    CounterRng rng(t, 0x99);
    const i64 c = 1 + static_cast<i64>(rng.next_below(6));
    const i64 h = 1 + static_cast<i64>(rng.next_below(5));
    const i64 w = 1 + static_cast<i64>(rng.next_below(5));
    auto f = random_tensor<float>({1, c, h, w}, 1000 + t, -2.0f, 2.0f);
    auto g = fen::gram<float>(f);

    double gmax = 0.0;
    for (i64 i = 0; i < g.numel(); ++i)
      gmax = std::max(gmax, std::abs(static_cast<double>(g[i])));
    for (i64 i = 0; i < c; ++i)
      for (i64 j = 0; j < c; ++j)
        CHECK(std::abs(static_cast<double>(g[i * c + j]) - g[j * c + i]) <=
              1e-6 * std::max(gmax, 1e-30));

    Eigen::MatrixXd m(c, c);
    for (i64 i = 0; i < c; ++i)
      for (i64 j = 0; j < c; ++j) m(i, j) = g[i * c + j];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
    const double lmax = std::max(eig.eigenvalues().maxCoeff(), 0.0);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-6 * std::max(lmax, 1e-30));

    // scale law: gram(a f) = a^2 gram(f)
    const float a = static_cast<float>(rng.next_uniform(0.2, 3.0));
    Tensor<float> fa(f.shape());
    for (i64 i = 0; i < f.numel(); ++i) fa[i] = a * f[i];
    auto ga = fen::gram<float>(fa);
    for (i64 i = 0; i < g.numel(); ++i)
      CHECK(static_cast<double>(ga[i]) ==
            doctest::Approx(static_cast<double>(a) * a * g[i]).epsilon(1e-5));

    // permutation law: shuffling spatial positions preserves the Gram
    std::vector<i64> perm(static_cast<size_t>(h * w));
    for (size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<i64>(i);
    for (size_t i = perm.size(); i > 1; --i)
      std::swap(perm[i - 1], perm[rng.next_below(i)]);
    Tensor<float> fp(f.shape());
    for (i64 ch = 0; ch < c; ++ch)
      for (i64 p = 0; p < h * w; ++p)
        fp.data()[ch * h * w + p] = f.data()[ch * h * w + perm[static_cast<size_t>(p)]];
    auto gp = fen::gram<float>(fp);
    for (i64 i = 0; i < g.numel(); ++i)
      CHECK(std::abs(static_cast<double>(gp[i]) - g[i]) <= 1e-6 * std::max(gmax, 1.0));
  }
}

TEST_CASE("gram backward matches finite differences") {
  auto f = random_tensor<double>({1, 3, 2, 2}, 77, -1.0, 1.0);
  auto gg = random_tensor<double>({1, 3, 3}, 78, -1.0, 1.0);
  auto gf = fen::gram_backward<double>(f, gg);
  const double h = 1e-6;
  for (i64 i = 0; i < f.numel(); ++i) {
    auto fp = f;
    fp[i] += h;
    auto fm = f;
    fm[i] -= h;
    auto gp = fen::gram<double>(fp);
    auto gm = fen::gram<double>(fm);
    double fd = 0.0;
    for (i64 j = 0; j < gp.numel(); ++j) fd += gg[j] * (gp[j] - gm[j]) / (2 * h);
    CHECK(gf[i] == doctest::Approx(fd).epsilon(1e-4));
  }
}

TEST_CASE("grayscale replication matches explicit 3-channel input") {
  auto f = make_fen(4);
  auto img1 = random_tensor<float>({1, 1, 32, 32}, 6);
  Tensor<float> img3({1, 3, 32, 32});
  for (i64 c = 0; c < 3; ++c)
    std::copy(img1.data(), img1.data() + 32 * 32, img3.data() + c * 32 * 32);
  CHECK(testutil::bitwise_equal(f.extract(img1, {"relu1_2"})[0].values,
                                f.extract(img3, {"relu1_2"})[0].values));
}
