#include <benchmark/benchmark.h>

#include "catdif/cat.hpp"
#include "catdif/glm.hpp"
#include "catdif/glmm.hpp"
#include "catdif/pool.hpp"
#include "catdif/prep.hpp"
#include "catdif/rng.hpp"

using namespace catdif;

namespace {

std::vector<Item> bench_pool(int n) {
  PoolConfig cfg;
  cfg.n_items = n;
  return generate_pool(cfg, 12345);
}

ItemFrame bench_frame(int n_clusters, int per_cluster) {
  Rng rng(777);
  ItemFrame frame;
  frame.item_id = "B";
  for (int j = 1; j <= n_clusters; ++j) {
    double u = 0.6 * normal(rng);
    for (int i = 0; i < per_cluster; ++i) {
      FrameRow r;
      r.j = j;
      r.g = i % 2;
      r.theta_K = normal(rng);
      r.theta_s = r.theta_K;
      double eta = -0.1 + 0.3 * r.g + 0.5 * r.theta_K + u;
      r.y = uniform01(rng) < 1.0 / (1.0 + std::exp(-eta)) ? 1 : 0;
      frame.rows.push_back(r);
      ++frame.cluster_sizes[j];
    }
  }
  return frame;
}

void BM_prob_correct(benchmark::State& state) {
  Item item{"X", 1.2, 0.4, 0.18, 0};
  IrtConfig cfg;
  double theta = -0.3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(prob_correct(theta, item, cfg));
    theta = theta > 3.0 ? -3.0 : theta + 1e-4;
  }
}
BENCHMARK(BM_prob_correct);

void BM_estimate_mle(benchmark::State& state) {
  std::vector<Item> pool = bench_pool(64);
  IrtConfig cfg;
  Rng rng(1);
  ResponseVector rv;
  for (int i = 0; i < static_cast<int>(state.range(0)); ++i)
    rv.add(pool[i], i % 2);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_mle(rv, cfg));
}
BENCHMARK(BM_estimate_mle)->Arg(10)->Arg(25)->Arg(35);

void BM_estimate_eap(benchmark::State& state) {
  std::vector<Item> pool = bench_pool(64);
  IrtConfig cfg;
  ResponseVector rv;
  for (int i = 0; i < 25; ++i) rv.add(pool[i], i % 2);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_eap(rv, cfg));
}
BENCHMARK(BM_estimate_eap);

void BM_administer(benchmark::State& state) {
  std::vector<Item> pool = bench_pool(200);
  CatConfig cfg;
  cfg.test_length = static_cast<int>(state.range(0));
  Examinee e{1, 0.2, 0};
  Rng rng(9);
  for (auto _ : state) {
    ExposureTallies tallies(pool.size());
    benchmark::DoNotOptimize(
        administer(e, pool, FocalMap{}, cfg, tallies, rng));
  }
}
BENCHMARK(BM_administer)->Arg(25)->Arg(35);

void BM_fit_glm_s1(benchmark::State& state) {
  ItemFrame frame = bench_frame(40, static_cast<int>(state.range(0)) / 40);
  for (auto _ : state)
    benchmark::DoNotOptimize(fit_glm(frame, GlmSpec::S1()));
}
BENCHMARK(BM_fit_glm_s1)->Arg(400)->Arg(2000);

void BM_fit_glmm_m1(benchmark::State& state) {
  ItemFrame frame = bench_frame(50, 10);
  for (auto _ : state)
    benchmark::DoNotOptimize(fit_glmm(frame, GlmmSpec::M1()));
}
BENCHMARK(BM_fit_glmm_m1);

void BM_fit_glmm_m6(benchmark::State& state) {
  ItemFrame frame = bench_frame(50, 10);
  for (auto _ : state)
    benchmark::DoNotOptimize(fit_glmm(frame, GlmmSpec::M6()));
}
BENCHMARK(BM_fit_glmm_m6);

}  // namespace

BENCHMARK_MAIN();
