#include <benchmark/benchmark.h>

#include "flowfuse/assess.hpp"
#include "flowfuse/flowmath.hpp"
#include "flowfuse/fusion.hpp"
#include "flowfuse/net.hpp"
#include "flowfuse/rng.hpp"
#include "flowfuse/synthgen.hpp"

using namespace flowfuse;

namespace {

SceneData make_scene(std::uint64_t seed) {
  SceneSpec spec;
  spec.seed = seed;
  return gen_scene(spec);
}

void BM_WarpBackward(benchmark::State& state) {
  const SceneData scene = make_scene(1);
  for (auto _ : state)
    benchmark::DoNotOptimize(warp_backward(scene.image1, scene.gt));
}
BENCHMARK(BM_WarpBackward);

void BM_EndpointErrorMap(benchmark::State& state) {
  const SceneData scene = make_scene(2);
  CorruptionSpec c = corruption_from_name("noisy");
  c.seed = 7;
  const FlowField est = corrupt_flow(scene.gt, scene.occluded, scene.image0, c);
  for (auto _ : state)
    benchmark::DoNotOptimize(endpoint_error_map(est, scene.gt));
}
BENCHMARK(BM_EndpointErrorMap);

void BM_UNetForward64(benchmark::State& state) {
  UNet net;
  net.init({.in_c = 11, .out_c = 1, .levels = 3, .base_channels = 16}, 3);
  Tensor x(1, 11, 64, 64);
  Rng rng(4);
  for (float& v : x.data) v = static_cast<float>(rng.uniform());
  for (auto _ : state) benchmark::DoNotOptimize(unet_forward(net, x));
}
BENCHMARK(BM_UNetForward64);

void BM_UNetForwardBackward64(benchmark::State& state) {
  UNet net;
  net.init({.in_c = 11, .out_c = 1, .levels = 3, .base_channels = 16}, 3);
  Tensor x(1, 11, 64, 64);
  Rng rng(4);
  for (float& v : x.data) v = static_cast<float>(rng.uniform());
  UNetGrads grads;
  for (auto _ : state) {
    UNetTape tape;
    Tensor out = unet_forward(net, x, &tape);
    Tensor d_out(out.n, out.c, out.h, out.w);
    for (float& v : d_out.data) v = 1.f;
    grads.init_like(net);
    unet_backward(net, tape, d_out, grads);
    benchmark::DoNotOptimize(grads);
  }
}
BENCHMARK(BM_UNetForwardBackward64);

void BM_OracleFuse(benchmark::State& state) {
  const SceneData scene = make_scene(5);
  FlowBundle bundle;
  bundle.image0 = scene.image0;
  bundle.image1 = scene.image1;
  bundle.gt = scene.gt;
  for (const char* name : {"smooth", "noisy", "patch", "zerocc"}) {
    CorruptionSpec c = corruption_from_name(name);
    c.seed = Rng::derive(9, static_cast<std::uint64_t>(bundle.methods.size()));
    bundle.methods.emplace_back(name,
                                corrupt_flow(scene.gt, scene.occluded, scene.image0, c));
  }
  for (auto _ : state) benchmark::DoNotOptimize(oracle_fuse(bundle));
}
BENCHMARK(BM_OracleFuse);

}  // namespace

BENCHMARK_MAIN();
