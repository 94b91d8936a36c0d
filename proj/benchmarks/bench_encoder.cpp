#include <benchmark/benchmark.h>

#include "omnic/corpus.hpp"
#include "omnic/encoder.hpp"
#include "omnic/losses.hpp"
#include "omnic/ops.hpp"

namespace {

using namespace omnic;

std::vector<ModalitySample> batch_of(Modality m, std::size_t n) {
  const EncoderConfig c = EncoderConfig::desk();
  auto samples = generate_corpus(SyntheticCorpusSpec::for_config(c, m, 2, (n + 1) / 2, 0.2, 1));
  samples.resize(n);
  return samples;
}

void BM_EncodeInference(benchmark::State& state) {
  const auto m = static_cast<Modality>(state.range(0));
  const auto enc = OmniEncoder<float>::init(EncoderConfig::desk(), 0);
  const auto batch = batch_of(m, 64);
  for (auto _ : state) benchmark::DoNotOptimize(extract_features(enc, batch).data());
  state.SetItemsProcessed(state.iterations() * 64);
  state.SetLabel(modality_name(m));
}
BENCHMARK(BM_EncodeInference)->DenseRange(0, 2);

// One pretraining step without the optimizer: two views, projection, NT-Xent, backward.
void BM_ContrastiveStep(benchmark::State& state) {
  const auto m = static_cast<Modality>(state.range(0));
  auto enc = OmniEncoder<float>::init(EncoderConfig::desk(), 0);
  const auto batch = batch_of(m, 16);
  const auto pairing = nt_xent_pairing(16);
  const auto params = named_parameters(enc);
  for (auto _ : state) {
    for (auto p : params) p.tensor.clear_grad();
    Tape<float> tape;
    const TensorF z1 = project(tape, enc, encode(tape, enc, std::span<const ModalitySample>(batch)), m);
    const TensorF z2 = project(tape, enc, encode(tape, enc, std::span<const ModalitySample>(batch)), m);
    TensorF loss = nt_xent_loss(tape, ops::concat(tape, {z1, z2}, 0), std::span<const std::int32_t>(pairing), 0.05);
    tape.backward(loss);
    benchmark::DoNotOptimize(loss.item());
  }
  state.SetLabel(modality_name(m));
}
BENCHMARK(BM_ContrastiveStep)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
