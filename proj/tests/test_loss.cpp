#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mdt/loss/loss.hpp"
#include "test_util.hpp"

using namespace mdt;
using testutil::random_tensor;

namespace {

// feature extractor stub: features are the image tensor itself
struct PassthroughFen {
  std::vector<fen::FeatureMap<float>> extract(const Tensor<float>& images,
                                              const std::vector<std::string>& layers) const {
    std::vector<fen::FeatureMap<float>> out;
    for (const auto& l : layers) out.push_back({images, l});
    return out;
  }
};

const std::vector<std::string> kOne = {"l0"};

Tensor<float> scalar_image(float v) {
  Tensor<float> t({1, 1, 1, 1});
  t[0] = v;
  return t;
}

}  // namespace

TEST_CASE("content loss on a stub extractor") {
  PassthroughFen f;
  CHECK(loss::content_loss(f, scalar_image(2.0f), scalar_image(5.0f), kOne) ==
        doctest::Approx(9.0));
  // symmetric in its two images
  auto a = random_tensor<float>({2, 1, 4, 4}, 1);
  auto b = random_tensor<float>({2, 1, 4, 4}, 2);
  CHECK(loss::content_loss(f, a, b, kOne) == doctest::Approx(loss::content_loss(f, b, a, kOne)));
  // zero at identity
  CHECK(loss::content_loss(f, a, a, kOne) == 0.0);
}

TEST_CASE("domain loss on a stub extractor") {
  PassthroughFen f;
  // constant 1-channel features c1=1, c2=3: grams [1], [9] -> (9-1)^2 = 64
  Tensor<float> c1({1, 1, 2, 2}), c2({1, 1, 2, 2});
  c1.fill(1.0f);
  c2.fill(3.0f);
  CHECK(loss::domain_loss(f, c2, c1, kOne) == doctest::Approx(64.0));
  CHECK(loss::domain_loss(f, c1, c1, kOne) == 0.0);

  // spatial permutation of either argument leaves the loss unchanged
  auto a = random_tensor<float>({1, 3, 2, 4}, 5);
  Tensor<float> ap(a.shape());
  const i64 hw = 8;
  std::vector<i64> perm = {5, 3, 7, 1, 0, 6, 2, 4};
  for (i64 c = 0; c < 3; ++c)
    for (i64 p = 0; p < hw; ++p)
      ap.data()[c * hw + p] = a.data()[c * hw + perm[static_cast<size_t>(p)]];
  auto b = random_tensor<float>({1, 3, 2, 4}, 6);
  CHECK(loss::domain_loss(f, a, b, kOne) ==
        doctest::Approx(loss::domain_loss(f, ap, b, kOne)).epsilon(1e-6));
  CHECK(loss::domain_loss(f, b, a, kOne) ==
        doctest::Approx(loss::domain_loss(f, b, ap, kOne)).epsilon(1e-6));
}

TEST_CASE("total loss arithmetic and report identity") {
  PassthroughFen f;
  loss::LossWeights w;
  w.alpha_default = 1.0;

  // content = (sqrt(2))^2 = 2, one domain term (0 - sqrt(3))^2... use gram
  // values: constants u, v give grams u^2, v^2 and loss (u^2 - v^2)^2
  auto I = scalar_image(0.0f);
  auto Ip = scalar_image(std::sqrt(2.0f));
  auto IX = scalar_image(0.0f);
  auto IXp = scalar_image(std::pow(3.0f, 0.25f));
  std::map<int, std::pair<const Tensor<float>*, const Tensor<float>*>> targets{
      {0, {&IX, &IXp}}};
  auto r = loss::total_loss(f, I, Ip, targets, w, kOne, kOne);
  CHECK(r.content == doctest::Approx(2.0));
  CHECK(r.domain_per_target.at(0) == doctest::Approx(3.0));
  CHECK(r.total == doctest::Approx(5.0));

  // zero targets: total == content
  std::map<int, std::pair<const Tensor<float>*, const Tensor<float>*>> none;
  auto r2 = loss::total_loss(f, I, Ip, none, w, kOne, kOne);
  CHECK(r2.total == r2.content);

  // report identity under default weights
  loss::LossWeights wd;
  auto a = random_tensor<float>({2, 1, 4, 4}, 7);
  auto b = random_tensor<float>({2, 1, 4, 4}, 8);
  auto c = random_tensor<float>({2, 1, 4, 4}, 9);
  auto d = random_tensor<float>({2, 1, 4, 4}, 10);
  std::map<int, std::pair<const Tensor<float>*, const Tensor<float>*>> t2{{3, {&c, &d}}};
  auto r3 = loss::total_loss(f, a, b, t2, wd, kOne, kOne);
  CHECK(r3.content >= 0.0);
  CHECK(r3.domain_per_target.at(3) >= 0.0);
  const double recomputed = r3.content + wd.alpha_for(3) * r3.domain_per_target.at(3);
  CHECK(std::abs(r3.total - recomputed) <= 1e-6 * std::max(1.0, std::abs(r3.total)));
}

TEST_CASE("total loss zero at identity") {
  PassthroughFen f;
  loss::LossWeights w;
  auto I = random_tensor<float>({2, 1, 4, 4}, 20);
  auto X = random_tensor<float>({2, 1, 4, 4}, 21);
  std::map<int, std::pair<const Tensor<float>*, const Tensor<float>*>> targets{
      {0, {&X, &X}}};
  auto r = loss::total_loss(f, I, I, targets, w, kOne, kOne);
  CHECK(r.total == 0.0);
}

TEST_CASE("total is affine in alpha with slope equal to the domain term") {
  PassthroughFen f;
  auto I = random_tensor<float>({1, 1, 4, 4}, 30);
  auto Ip = random_tensor<float>({1, 1, 4, 4}, 31);
  auto IX = random_tensor<float>({1, 1, 4, 4}, 32);
  auto IXp = random_tensor<float>({1, 1, 4, 4}, 33);
  std::map<int, std::pair<const Tensor<float>*, const Tensor<float>*>> targets{
      {0, {&IX, &IXp}}};
  loss::LossWeights w1, w2;
  w1.alpha_default = 1.0;
  w2.alpha_default = 2.0;
  auto r1 = loss::total_loss(f, I, Ip, targets, w1, kOne, kOne);
  auto r2 = loss::total_loss(f, I, Ip, targets, w2, kOne, kOne);
  CHECK(r2.total - r1.total == doctest::Approx(r1.domain_per_target.at(0)).epsilon(1e-9));
}

TEST_CASE("optional transfer-content term folds into the total") {
  PassthroughFen f;
  loss::LossWeights w;
  w.alpha_default = 1.0;
  w.lambda_content_on_transfer = 0.5;
  auto I = scalar_image(1.0f);
  auto Ip = scalar_image(1.0f);
  auto IX = scalar_image(2.0f);
  auto IXp = scalar_image(3.0f);
  std::map<int, std::pair<const Tensor<float>*, const Tensor<float>*>> targets{
      {0, {&IX, &IXp}}};
  auto r = loss::total_loss(f, I, Ip, targets, w, kOne, kOne);
  // domain: (9-4)^2 = 25; transfer content: (3-1)^2 = 4
  CHECK(r.transfer_content == doctest::Approx(4.0));
  CHECK(r.total == doctest::Approx(0.0 + 25.0 + 0.5 * 4.0));
}

TEST_CASE("non-finite losses are reported by component") {
  PassthroughFen f;
  loss::LossWeights w;
  auto I = scalar_image(1.0f);
  auto bad = scalar_image(std::numeric_limits<float>::quiet_NaN());
  std::map<int, std::pair<const Tensor<float>*, const Tensor<float>*>> none;
  CHECK_THROWS_WITH_AS(loss::total_loss(f, I, bad, none, w, kOne, kOne),
                       doctest::Contains("non-finite loss (content)"), std::runtime_error);
  auto IX = scalar_image(0.5f);
  std::map<int, std::pair<const Tensor<float>*, const Tensor<float>*>> targets{
      {4, {&IX, &bad}}};
  CHECK_THROWS_WITH_AS(loss::total_loss(f, I, I, targets, w, kOne, kOne),
                       doctest::Contains("non-finite loss (domain 4)"), std::runtime_error);
}

TEST_CASE("weight validation") {
  loss::LossWeights w;
  w.alpha_default = 0.0;
  CHECK_THROWS_AS(loss::validate_weights(w), ConfigError);
  w = {};
  w.alpha[2] = -1.0;
  CHECK_THROWS_AS(loss::validate_weights(w), ConfigError);
  w = {};
  w.lambda_content_on_transfer = -0.1;
  CHECK_THROWS_AS(loss::validate_weights(w), ConfigError);
}
