#include "fixtures.hpp"

#include "infoprio/empowerment.hpp"
#include "infoprio/metrics.hpp"
#include "infoprio/nn.hpp"
#include "infoprio/world_model.hpp"

#include <benchmark/benchmark.h>

using namespace infoprio;

static void BM_DenseForwardBackward(benchmark::State& state) {
  Rng r(1);
  const int width = static_cast<int>(state.range(0));
  nn::DenseNet net = nn::DenseNet::random({32, width, width, 16}, r);
  Mat x = Mat::Random(32, 64);
  for (auto _ : state) {
    const auto cache = nn::forward_cached(net, x);
    benchmark::DoNotOptimize(nn::backward(net, cache, cache.output));
  }
}
BENCHMARK(BM_DenseForwardBackward)->Arg(64)->Arg(300);

static void BM_ChannelCapacity(benchmark::State& state) {
  Rng r(2);
  const int n = static_cast<int>(state.range(0));
  Mat ch(n, n);
  for (int a = 0; a < n; ++a) {
    for (int j = 0; j < n; ++j) ch(a, j) = r.gamma(1.0);
    ch.row(a) /= ch.row(a).sum();
  }
  for (auto _ : state) benchmark::DoNotOptimize(empowerment::channel_capacity(ch, 1e-10, 500).capacity);
}
BENCHMARK(BM_ChannelCapacity)->Arg(4)->Arg(32);

static void BM_ShortestPathKernel(benchmark::State& state) {
  Rng r(3);
  const int n = static_cast<int>(state.range(0));
  std::vector<Vec> a, b;
  for (int i = 0; i < n; ++i) {
    a.push_back(Vec::Random(4));
    b.push_back(Vec::Random(2));
  }
  const auto g1 = metrics::SimilarityGraph::build(a);
  const auto g2 = metrics::SimilarityGraph::build(b);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::shortest_path_kernel(g1, g2));
}
BENCHMARK(BM_ShortestPathKernel)->Arg(16)->Arg(64);

static void BM_LagrangianLoss(benchmark::State& state) {
  const envs::EnvConfig env = envs::preset("ring");
  world::WorldModelConfig mc;
  mc.obs_dim = env.observation_dim();
  mc.num_actions = env.num_actions;
  Rng init(4);
  const auto model = world::WorldModel::random(mc, init);
  const auto buf = fixtures::random_replay(env, 4, 5);
  Rng pick(6);
  const auto windows = buf.sample_windows(16, 16, pick);
  Rng noise(7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(world::lagrangian_loss(model, nullptr, windows, 1.0, 0.0, world::LossConfig{}, noise).loss);
  }
}
BENCHMARK(BM_LagrangianLoss)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
