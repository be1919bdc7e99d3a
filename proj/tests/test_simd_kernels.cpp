// Equivalence tests: every SIMD kernel variant against the scalar reference
// (and GEMM additionally against a naive double-precision oracle).

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#include "mdt/core/rng.hpp"
#include "mdt/simd/kernels.hpp"

using namespace mdt;
using simd::i64;
using simd::Isa;
using simd::KernelTable;

namespace {

std::vector<const KernelTable*> available_tables() {
  std::vector<const KernelTable*> out;
  for (Isa isa : {Isa::scalar, Isa::avx2, Isa::avx512})
    if (const KernelTable* t = simd::kernels_for(isa)) out.push_back(t);
  return out;
}

std::vector<float> random_vec(size_t n, CounterRng& rng, float lo = -1.0f, float hi = 1.0f) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.next_uniform(lo, hi));
  return v;
}

// Naive double-precision GEMM oracle.
void gemm_oracle(bool ta, bool tb, i64 m, i64 n, i64 k, float alpha,
                 const std::vector<float>& a, i64 lda, const std::vector<float>& b,
                 i64 ldb, float beta, std::vector<double>& c, i64 ldc) {
  auto el = [](bool tr, const std::vector<float>& p, i64 ld, i64 r, i64 col) {
    return static_cast<double>(tr ? p[static_cast<size_t>(col * ld + r)]
                                  : p[static_cast<size_t>(r * ld + col)]);
  };
  for (i64 i = 0; i < m; ++i)
    for (i64 j = 0; j < n; ++j) {
      double acc = 0.0;
      for (i64 kk = 0; kk < k; ++kk) acc += el(ta, a, lda, i, kk) * el(tb, b, ldb, kk, j);
      double& out = c[static_cast<size_t>(i * ldc + j)];
      out = alpha * acc + (beta == 0.0f ? 0.0 : static_cast<double>(beta) * out);
    }
}

}  // namespace

TEST_CASE("at least the scalar table is always available") {
  REQUIRE(simd::kernels_for(Isa::scalar) != nullptr);
  CHECK(simd::cpu_supports(simd::active_isa()));
  MESSAGE("active ISA: ", std::string(simd::isa_name(simd::active_isa())));
}

TEST_CASE("gemm variants match a double-precision oracle") {
  CounterRng rng(2024, 1);
  const i64 sizes[][3] = {{1, 1, 1},  {2, 3, 4},   {5, 7, 9},    {8, 16, 32},
                          {17, 1, 5}, {33, 65, 7}, {64, 64, 64}, {3, 130, 257},
                          {96, 48, 300}};
  for (const KernelTable* table : available_tables()) {
    for (const auto& s : sizes) {
      const i64 m = s[0], n = s[1], k = s[2];
      for (bool ta : {false, true})
        for (bool tb : {false, true})
          for (float beta : {0.0f, 1.0f, 0.5f}) {
            const float alpha = 1.0f;
            const i64 lda = ta ? m : k;
            const i64 ldb = tb ? k : n;
            auto a = random_vec(static_cast<size_t>((ta ? k : m) * lda), rng);
            auto b = random_vec(static_cast<size_t>((tb ? n : k) * ldb), rng);
            auto c = random_vec(static_cast<size_t>(m * n), rng);
            std::vector<double> ref(c.begin(), c.end());
            gemm_oracle(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, ref, n);
            table->gemm(ta, tb, m, n, k, alpha, a.data(), lda, b.data(), ldb,
                        beta, c.data(), n);
            double max_err = 0.0;
            for (size_t i = 0; i < c.size(); ++i)
              max_err = std::max(max_err, std::abs(static_cast<double>(c[i]) - ref[i]));
            // float accumulation over k terms of O(1) magnitude
            const double tol = 1e-6 * (static_cast<double>(k) + 10.0);
            CAPTURE(m);
            CAPTURE(n);
            CAPTURE(k);
            CAPTURE(ta);
            CAPTURE(tb);
            CAPTURE(beta);
            CHECK(max_err <= tol);
          }
    }
  }
}

TEST_CASE("elementwise variants match the scalar reference") {
  const KernelTable* ref = simd::kernels_for(Isa::scalar);
  CounterRng rng(7, 2);
  const size_t n = 1031;  // odd size exercises the tails
  auto x = random_vec(n, rng, -2.0f, 2.0f);
  auto y = random_vec(n, rng, -2.0f, 2.0f);

  for (const KernelTable* t : available_tables()) {
    std::vector<float> out_ref(n), out(n);

    ref->relu_fwd(n, x.data(), out_ref.data());
    t->relu_fwd(n, x.data(), out.data());
    CHECK(out == out_ref);

    ref->relu_bwd(n, y.data(), x.data(), out_ref.data());
    t->relu_bwd(n, y.data(), x.data(), out.data());
    CHECK(out == out_ref);

    ref->vadd(n, x.data(), y.data(), out_ref.data());
    t->vadd(n, x.data(), y.data(), out.data());
    CHECK(out == out_ref);

    ref->add_clamp01(n, x.data(), y.data(), out_ref.data());
    t->add_clamp01(n, x.data(), y.data(), out.data());
    CHECK(out == out_ref);

    out_ref = y;
    out = y;
    ref->vaxpy(n, 0.37f, x.data(), out_ref.data());
    t->vaxpy(n, 0.37f, x.data(), out.data());
    for (size_t i = 0; i < n; ++i) CHECK(out[i] == doctest::Approx(out_ref[i]).epsilon(1e-6));

    ref->vscale(n, -1.25f, x.data(), out_ref.data());
    t->vscale(n, -1.25f, x.data(), out.data());
    CHECK(out == out_ref);

    ref->scale_shift(n, x.data(), 0.8f, -0.1f, out_ref.data());
    t->scale_shift(n, x.data(), 0.8f, -0.1f, out.data());
    for (size_t i = 0; i < n; ++i) CHECK(out[i] == doctest::Approx(out_ref[i]).epsilon(1e-6));
  }
}

TEST_CASE("reduction variants agree to near double precision") {
  CounterRng rng(99, 3);
  for (size_t n : {1u, 7u, 64u, 1000u, 65537u}) {
    auto x = random_vec(n, rng);
    auto y = random_vec(n, rng);
    double ref_sum = 0.0, ref_dot = 0.0, ref_sq = 0.0;
    for (size_t i = 0; i < n; ++i) {
      ref_sum += x[i];
      ref_dot += static_cast<double>(x[i]) * y[i];
      const double d = static_cast<double>(x[i]) - y[i];
      ref_sq += d * d;
    }
    for (const KernelTable* t : available_tables()) {
      CHECK(t->reduce_sum(n, x.data()) == doctest::Approx(ref_sum).epsilon(1e-12));
      CHECK(t->dot(n, x.data(), y.data()) == doctest::Approx(ref_dot).epsilon(1e-12));
      CHECK(t->sqdiff_sum(n, x.data(), y.data()) == doctest::Approx(ref_sq).epsilon(1e-12));
      float mean = 0, var = 0;
      t->moments(n, x.data(), &mean, &var);
      CHECK(static_cast<double>(mean) == doctest::Approx(ref_sum / n).epsilon(1e-6));
    }
  }
}

TEST_CASE("adam step variants agree") {
  CounterRng rng(5, 4);
  const size_t n = 517;
  const simd::AdamHyper h{1e-3f, 0.9f, 0.999f, 1e-8f, 0.1f, 0.001999f};
  auto g = random_vec(n, rng);
  auto p0 = random_vec(n, rng);
  auto m0 = random_vec(n, rng, 0.0f, 0.1f);
  auto v0 = random_vec(n, rng, 0.0f, 0.1f);

  const KernelTable* ref = simd::kernels_for(Isa::scalar);
  auto pr = p0, mr = m0, vr = v0;
  ref->adam_step(n, pr.data(), g.data(), mr.data(), vr.data(), h);

  for (const KernelTable* t : available_tables()) {
    auto p = p0, m = m0, v = v0;
    t->adam_step(n, p.data(), g.data(), m.data(), v.data(), h);
    for (size_t i = 0; i < n; ++i) {
      CHECK(p[i] == doctest::Approx(pr[i]).epsilon(1e-6));
      CHECK(m[i] == doctest::Approx(mr[i]).epsilon(1e-6));
      CHECK(v[i] == doctest::Approx(vr[i]).epsilon(1e-6));
    }
  }
}

TEST_CASE("gemm throughput probe" * doctest::skip()) {
  const i64 m = 64, k = 576, n = 4096;
  CounterRng rng(1, 1);
  auto a = random_vec(static_cast<size_t>(m * k), rng);
  auto b = random_vec(static_cast<size_t>(k * n), rng);
  std::vector<float> c(static_cast<size_t>(m * n));
  for (Isa isa : {Isa::scalar, Isa::avx2, Isa::avx512}) {
    const KernelTable* t = simd::kernels_for(isa);
    if (!t) continue;
    const int reps = isa == Isa::scalar ? 5 : 50;
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r)
      t->gemm(false, false, m, n, k, 1.0f, a.data(), k, b.data(), n, 0.0f, c.data(), n);
    const auto t1 = std::chrono::steady_clock::now();
    const double sec = std::chrono::duration<double>(t1 - t0).count();
    const double gflops = 2.0 * m * n * k * reps / sec / 1e9;
    std::printf("%-8s %6.2f GFLOP/s\n", simd::isa_name(isa), gflops);
  }
}
