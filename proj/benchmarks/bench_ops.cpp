#include <benchmark/benchmark.h>

#include <random>

#include "omnic/losses.hpp"
#include "omnic/ops.hpp"
#include "omnic/tape.hpp"

namespace {

using omnic::Tape;
using omnic::TensorF;
namespace ops = omnic::ops;

TensorF random_tensor(omnic::Shape shape, std::uint64_t seed, bool requires_grad = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  TensorF t = TensorF::zeros(std::move(shape), requires_grad);
  for (float& v : t.data()) v = g(rng);
  return t;
}

void BM_MatmulForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const TensorF a = random_tensor({n, n}, 1), b = random_tensor({n, n}, 2);
  for (auto _ : state) {
    auto tape = Tape<float>::no_grad();
    benchmark::DoNotOptimize(ops::matmul(tape, a, b).data().data());
  }
  state.counters["flops"] = benchmark::Counter(static_cast<double>(state.iterations()) * 2.0 * n * n * n,
                                              benchmark::Counter::kIsRate);
}
BENCHMARK(BM_MatmulForward)->Arg(64)->Arg(128)->Arg(256);

void BM_MatmulForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  TensorF a = random_tensor({n, n}, 1, true), b = random_tensor({n, n}, 2, true);
  for (auto _ : state) {
    a.clear_grad();
    b.clear_grad();
    Tape<float> tape;
    TensorF loss = ops::sum(tape, ops::matmul(tape, a, b));
    tape.backward(loss);
    benchmark::DoNotOptimize(a.grad().data());
  }
}
BENCHMARK(BM_MatmulForwardBackward)->Arg(64)->Arg(128);

void BM_SoftmaxLastdim(benchmark::State& state) {
  const TensorF x = random_tensor({64, 17, 17}, 3);
  for (auto _ : state) {
    auto tape = Tape<float>::no_grad();
    benchmark::DoNotOptimize(ops::softmax_lastdim(tape, x).data().data());
  }
}
BENCHMARK(BM_SoftmaxLastdim);

void BM_LayerNorm(benchmark::State& state) {
  const TensorF x = random_tensor({32, 17, 64}, 4);
  const TensorF gain = TensorF::full({64}, 1.0f), bias = TensorF::zeros({64});
  for (auto _ : state) {
    auto tape = Tape<float>::no_grad();
    benchmark::DoNotOptimize(ops::layer_norm(tape, x, gain, bias, 1e-5f).data().data());
  }
}
BENCHMARK(BM_LayerNorm);

void BM_NtXentForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  TensorF z = random_tensor({2 * n, 32}, 5, true);
  const auto pairing = omnic::nt_xent_pairing(n);
  for (auto _ : state) {
    z.clear_grad();
    Tape<float> tape;
    TensorF loss = omnic::nt_xent_loss(tape, z, std::span<const std::int32_t>(pairing), 0.05);
    tape.backward(loss);
    benchmark::DoNotOptimize(z.grad().data());
  }
}
BENCHMARK(BM_NtXentForwardBackward)->Arg(16)->Arg(128);

}  // namespace
