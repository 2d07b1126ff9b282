#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "groupemo/nn/adam.hpp"
#include "groupemo/nn/model.hpp"
#include "groupemo/top_down.hpp"

using namespace groupemo;

namespace {

Tensor<float> random_batch(std::size_t n, Rng rng) {
  Tensor<float> t({n, 64, 64, 3});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.uniform());
  return t;
}

void BM_FirstConvForward(benchmark::State& state) {
  const auto spec = nn::reference_architecture();
  const auto params = nn::init_params<float>(spec, Rng(1));
  const auto batch = random_batch(static_cast<std::size_t>(state.range(0)), Rng(2));
  for (auto _ : state) {
    auto out = nn::layer_apply(spec.layers[0], params.layers[0], batch);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FirstConvForward)->Arg(1)->Arg(16);

void BM_FirstConvBackward(benchmark::State& state) {
  const auto spec = nn::reference_architecture();
  const auto params = nn::init_params<float>(spec, Rng(1));
  const auto batch = random_batch(static_cast<std::size_t>(state.range(0)), Rng(2));
  const auto fwd = nn::layer_forward(spec.layers[0], params.layers[0], batch, false, nullptr);
  const Tensor<float> grad(fwd.output.shape(), 1.0f);
  for (auto _ : state) {
    auto g = nn::layer_backward(spec.layers[0], params.layers[0], fwd.cache, grad);
    benchmark::DoNotOptimize(g.grad_in.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FirstConvBackward)->Arg(1)->Arg(16);

void BM_Predict(benchmark::State& state) {
  const auto spec = state.range(1) ? nn::reference_architecture() : nn::compact_architecture();
  const nn::Network<float> net(spec, nn::init_params<float>(spec, Rng(3)));
  const auto batch = random_batch(static_cast<std::size_t>(state.range(0)), Rng(4));
  for (auto _ : state) {
    auto out = net.predict(batch);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Predict)->ArgNames({"batch", "reference"})->Args({1, 0})->Args({32, 0})->Args({1, 1})->Args({32, 1});

void BM_TrainStep(benchmark::State& state) {
  const auto spec = nn::compact_architecture();
  nn::Network<float> net(spec, nn::init_params<float>(spec, Rng(5)));
  auto adam = nn::AdamState<float>::for_params(net.params());
  const auto batch = random_batch(static_cast<std::size_t>(state.range(0)), Rng(6));
  Rng rng(7);
  for (auto _ : state) {
    std::vector<nn::ForwardCache<float>> caches;
    const auto out = net.forward_train(batch, rng, caches);
    const Tensor<float> grad(out.shape(), 0.01f);
    const auto grads = net.backward(caches, grad, spec.layers.size());
    nn::adam_step(adam, net.mutable_params(), grads);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainStep)->Arg(32);

void BM_InferPosterior(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  top_down::ScenePosteriorModel m;
  m.prior = {0.4, 0.35, 0.25};
  Rng rng(8);
  std::vector<std::string> words;
  for (std::size_t i = 0; i < n; ++i) {
    m.vocabulary.push_back("w" + std::to_string(100000 + i));
    m.p_true.push_back({0.05 + 0.9 * rng.uniform(), 0.05 + 0.9 * rng.uniform(), 0.05 + 0.9 * rng.uniform()});
    if (rng.bernoulli(0.5)) words.push_back(m.vocabulary.back());
  }
  for (auto _ : state) {
    const auto e = top_down::set_evidence(m, words);
    benchmark::DoNotOptimize(top_down::infer_posterior(m, e));
  }
}
BENCHMARK(BM_InferPosterior)->Arg(8)->Arg(64)->Arg(1024);

}  // namespace

BENCHMARK_MAIN();
