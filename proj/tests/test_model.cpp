#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>

#include "mdt/core/errors.hpp"
#include "mdt/model/model.hpp"
#include "mdt/model/model_io.hpp"
#include "test_util.hpp"

using namespace mdt;
using model::Generator;
using model::ModelConfig;
using testutil::random_tensor;

namespace {

ModelConfig small_config(int domains = 2) {
  ModelConfig cfg;
  cfg.base_channels = 8;
  cfg.scales = 3;
  cfg.transfer_depth = 2;
  cfg.transfer_growth = 4;
  cfg.n_domains = domains;
  return cfg;
}

std::string hash_params(Generator<float>& g) {
  std::string out;
  for (auto& p : g.parameters()) {
    out += p.name;
    out.append(reinterpret_cast<const char*>(p.value->data()),
               sizeof(float) * static_cast<size_t>(p.value->numel()));
  }
  return hex64(fnv1a64(out.data(), out.size()));
}

}  // namespace

TEST_CASE("config validation") {
  ModelConfig bad = small_config(0);
  CHECK_THROWS_AS(Generator<float>(bad, 1), ConfigError);
  bad = small_config();
  bad.scales = 4;
  CHECK_THROWS_AS(Generator<float>(bad, 1), ConfigError);
  bad = small_config();
  bad.transfer_variant = "banked";
  CHECK_THROWS_AS(Generator<float>(bad, 1), ConfigError);
}

TEST_CASE("deterministic init") {
  Generator<float> a(small_config(), 7);
  Generator<float> b(small_config(), 7);
  CHECK(hash_params(a) == hash_params(b));
  Generator<float> c(small_config(), 8);
  CHECK(hash_params(a) != hash_params(c));
}

TEST_CASE("encoder channel plan doubles per scale") {
  ModelConfig cfg;
  cfg.base_channels = 32;
  cfg.scales = 3;
  Generator<float> g(cfg, 1);
  CHECK(g.channel_plan() == std::vector<i64>{32, 64, 128});
}

TEST_CASE("encode shapes, purity, batch independence") {
  Generator<float> g(small_config(), 3);
  auto img = random_tensor<float>({2, 1, 64, 64}, 10);
  auto feats = g.encode(img);
  REQUIRE(feats.size() == 3);
  CHECK(feats[0].shape() == std::vector<i64>{2, 8, 64, 64});
  CHECK(feats[1].shape() == std::vector<i64>{2, 16, 32, 32});
  CHECK(feats[2].shape() == std::vector<i64>{2, 32, 16, 16});

  auto feats2 = g.encode(img);
  for (size_t s = 0; s < feats.size(); ++s)
    CHECK(testutil::bitwise_equal(feats[s], feats2[s]));

  Tensor<float> dup({2, 1, 64, 64});
  std::copy(img.data(), img.data() + 64 * 64, dup.data());
  std::copy(img.data(), img.data() + 64 * 64, dup.data() + 64 * 64);
  auto fd = g.encode(dup);
  for (size_t s = 0; s < fd.size(); ++s) {
    const i64 half = fd[s].numel() / 2;
    for (i64 i = 0; i < half; ++i) REQUIRE(fd[s][i] == fd[s][half + i]);
  }

  Tensor<float> odd({1, 1, 60, 64});
  CHECK_THROWS_WITH_AS(g.encode(odd), doctest::Contains("divisible by 4"),
                       std::invalid_argument);
}

TEST_CASE("apply_transfer preserves shapes and rejects unknown domains") {
  Generator<float> g(small_config(2), 3);
  auto img = random_tensor<float>({1, 1, 32, 32}, 4);
  auto feats = g.encode(img);
  auto tf = g.apply_transfer(feats, 1);
  REQUIRE(tf.size() == feats.size());
  for (size_t s = 0; s < tf.size(); ++s) CHECK(tf[s].shape() == feats[s].shape());
  CHECK_THROWS_WITH_AS(g.apply_transfer(feats, 2), doctest::Contains("unknown domain"),
                       std::invalid_argument);
  CHECK_THROWS_AS(g.apply_transfer(feats, -1), std::invalid_argument);
}

TEST_CASE("residual identity: zeroed head makes reconstruct exact") {
  Generator<float> g(small_config(), 5);
  for (auto& p : g.parameters())
    if (p.name.rfind("dec.head", 0) == 0) p.value->fill(0.0f);
  auto img = random_tensor<float>({2, 1, 32, 32}, 6);
  auto out = g.reconstruct(img);
  CHECK(testutil::bitwise_equal(out, img));
}

TEST_CASE("clamp keeps saturated residuals at the bound") {
  Generator<float> g(small_config(), 5);
  // force r = +0.5 everywhere: zero head weights, bias 0.5
  for (auto& p : g.parameters()) {
    if (p.name == "dec.head.w") p.value->fill(0.0f);
    if (p.name == "dec.head.b") p.value->fill(0.5f);
  }
  Tensor<float> ones({1, 1, 32, 32});
  ones.fill(1.0f);
  auto out = g.reconstruct(ones);
  for (i64 i = 0; i < out.numel(); ++i) REQUIRE(out[i] == 1.0f);
}

TEST_CASE("no-residual ablation depends on the source only through features") {
  ModelConfig cfg = small_config();
  cfg.residual_output = false;
  Generator<float> g(cfg, 9);
  auto a = random_tensor<float>({1, 1, 32, 32}, 1);
  auto b = random_tensor<float>({1, 1, 32, 32}, 2);
  auto feats = g.encode(a);
  auto out_a = g.decode(feats, a);
  auto out_b = g.decode(feats, b);
  CHECK(testutil::bitwise_equal(out_a, out_b));
}

TEST_CASE("translate/reconstruct are the documented compositions") {
  Generator<float> g(small_config(2), 11);
  auto img = random_tensor<float>({2, 1, 32, 32}, 3);
  auto manual = g.decode(g.apply_transfer(g.encode(img), 1), img);
  CHECK(testutil::bitwise_equal(manual, g.translate(img, 1)));
  auto rec = g.decode(g.encode(img), img);
  CHECK(testutil::bitwise_equal(rec, g.reconstruct(img)));
  CHECK(g.translate(img, 0).shape() == img.shape());
  for (i64 d = 0; d < 2; ++d) CHECK(g.translate(img, d).shape() == img.shape());
}

TEST_CASE("untrained residual model stays near the identity") {
  ModelConfig cfg;
  cfg.base_channels = 32;
  cfg.scales = 3;
  cfg.n_domains = 2;
  Generator<float> g(cfg, 42);
  auto img = random_tensor<float>({2, 1, 64, 64}, 13, 0.1f, 0.9f);
  auto out = g.reconstruct(img);
  double mean_abs = 0.0;
  for (i64 i = 0; i < out.numel(); ++i)
    mean_abs += std::abs(static_cast<double>(out[i]) - img[i]);
  mean_abs /= static_cast<double>(out.numel());
  CHECK(mean_abs < 0.5);
}

TEST_CASE("parameter count scales linearly in the domain count") {
  ModelConfig cfg = small_config(1);
  const auto pc1 = Generator<float>::parameter_count(cfg);
  CHECK(pc1.per_domain > 0);
  CHECK(pc1.total == pc1.shared + pc1.per_domain);
  i64 prev = pc1.total;
  for (int n = 2; n <= 5; ++n) {
    cfg.n_domains = n;
    const auto pc = Generator<float>::parameter_count(cfg);
    CHECK(pc.shared == pc1.shared);
    CHECK(pc.per_domain == pc1.per_domain);
    CHECK(pc.total - prev == pc1.per_domain);
    CHECK(pc.total == pc1.shared + n * pc1.per_domain);
    prev = pc.total;
  }
  // a model actually built with n domains carries exactly that many tensors
  cfg.n_domains = 3;
  Generator<float> g(cfg, 1);
  i64 total = 0;
  for (auto& p : g.parameters()) total += p.value->numel();
  CHECK(total == Generator<float>::parameter_count(cfg).total);
}

TEST_CASE("single_conv ablation has fewer per-domain parameters") {
  ModelConfig dense = small_config();
  ModelConfig single = dense;
  single.transfer_variant = "single_conv";
  CHECK(Generator<float>::parameter_count(single).per_domain <
        Generator<float>::parameter_count(dense).per_domain);
  // and it still runs
  Generator<float> g(single, 2);
  auto img = random_tensor<float>({1, 1, 32, 32}, 5);
  CHECK(g.translate(img, 0).shape() == img.shape());
}

TEST_CASE("checkpoint round-trip is bitwise and hash-guarded") {
  testutil::TmpDir tmp("ckpt");
  const std::string path = (tmp.path / "m.ckpt").string();
  Generator<float> g(small_config(2), 21);
  model::CheckpointMeta meta;
  meta.config = g.config();
  meta.iteration = 17;
  meta.source_domain = "src";
  meta.target_domains = {"t1", "t2"};
  meta.fen_config_hash = "aabb";
  model::save_checkpoint(path, g, meta);

  model::CheckpointMeta back;
  Generator<float> loaded = model::load_checkpoint(path, &back);
  CHECK(back.iteration == 17);
  CHECK(back.target_domains == std::vector<std::string>{"t1", "t2"});
  CHECK(hash_params(g) == hash_params(loaded));

  // tamper with the stored hash: loader must refuse without the override
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  in.close();
  const auto pos = bytes.find("\"config_hash\":\"");
  REQUIRE(pos != std::string::npos);
  bytes[pos + 15] = bytes[pos + 15] == '0' ? '1' : '0';
  std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes;
  CHECK_THROWS_WITH_AS(model::load_checkpoint(path, &back),
                       doctest::Contains("config hash mismatch"), ConfigError);
  Generator<float> forced = model::load_checkpoint(path, &back, true);
  CHECK(hash_params(g) == hash_params(forced));
}
